#include "csam/planner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "csam/kd_tree.hpp"
#include "csam/rollout_evaluator.hpp"

namespace csam {

GpDeviationModel::GpDeviationModel(MultiOutputGp gp) : gp_(std::move(gp)) {
  if (!gp_.trained()) throw std::invalid_argument("GpDeviationModel: untrained GP");
}

DeviationEstimate GpDeviationModel::predict(const RemovalFeatures& features,
                                            const CuttingSurface& /*action*/) const {
  const auto preds = gp_.predict(features.values);
  DeviationEstimate est;
  est.mean = preds.front().mean;
  for (const auto& p : preds) est.variance += p.variance;
  est.variance /= static_cast<double>(preds.size());
  return est;
}

DeviationEstimate GroundTruthDeviationModel::predict(const RemovalFeatures& features,
                                                     const CuttingSurface& action) const {
  return {gt_deviation(action, features.removal_volume(), params_), 0.0};
}

TransitionPrediction predict_transition(const PointCloud& s, const CuttingSurface& a,
                                        const DeviationModel* model, FeatureMode mode,
                                        const ActionBounds& bounds) {
  const Plane plane = plane_from_action(a);
  auto parts = split(s, plane);
  TransitionPrediction out;
  out.features = extract_features(parts.removed, a, mode);
  if (!parts.removed.empty() && model != nullptr) {
    const auto est = model->predict(out.features, a);
    out.deviation = est.mean;
    out.variance = est.variance;
  }
  if (out.deviation == 0.0) {
    out.next = std::move(parts.kept);
  } else {
    out.next = split(s, apply_deviation(a, out.deviation, bounds)).kept;
  }
  return out;
}

double eta(double alpha, double beta, double current_err, double init_err) {
  if (!(init_err > 0.0)) throw std::invalid_argument("eta: init_err must be positive");
  if (!(current_err >= 0.0)) throw std::invalid_argument("eta: current_err must be non-negative");
  if (beta == 0.0) return alpha;
  return alpha * std::pow(current_err / init_err, beta);
}

namespace {

double max_sq_gap(const PointCloud& from, const PointCloud& to) {
  const KdTree tree(to.points());
  double worst = 0.0;
  for (const auto& p : from) worst = std::max(worst, tree.nearest(p).sq_dist);
  return worst;
}

}  // namespace

bool detect_overcut(const PointCloud& predicted, const PointCloud& target, double margin) {
  if (target.empty()) throw std::invalid_argument("detect_overcut: empty target");
  if (predicted.empty()) return true;
  return max_sq_gap(target, predicted) > margin * margin;
}

double default_overcut_margin(const PointCloud& target) {
  return 2.0 * mean_nearest_neighbor_spacing(target);
}

CostTerms cost(const PointCloud& predicted, const CuttingSurface& /*a*/, double variance,
               const PointCloud& target, double eta_value, const CostSettings& settings) {
  if (target.empty()) throw std::invalid_argument("cost: empty target");
  CostTerms terms;
  terms.variance = eta_value * variance;
  const double margin =
      settings.overcut_margin > 0.0 ? settings.overcut_margin : default_overcut_margin(target);
  if (predicted.empty()) {
    terms.shape = std::numeric_limits<double>::infinity();
    terms.overcut = settings.overcut_penalty;
    return terms;
  }
  if (settings.downsample_n > 0) {
    terms.shape = chamfer(downsample(predicted, settings.downsample_n, settings.seed),
                          downsample(target, settings.downsample_n, settings.seed + 1));
  } else {
    terms.shape = chamfer(predicted, target);
  }
  terms.overcut = detect_overcut(predicted, target, margin) ? settings.overcut_penalty : 0.0;
  return terms;
}

void PlannerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("PlannerConfig: horizon must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("PlannerConfig: n_samples must be >= 1");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(eta_floor >= 0.0)) {
    throw std::invalid_argument("PlannerConfig: alpha, beta, eta_floor must be non-negative");
  }
  if (!(overcut_penalty > 0.0)) throw std::invalid_argument("PlannerConfig: penalty must be > 0");
  bounds.validate();
}

std::vector<std::vector<CuttingSurface>> sample_sequences(const PlannerConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::vector<CuttingSurface>> seqs(cfg.n_samples);
  for (auto& seq : seqs) {
    seq.reserve(cfg.horizon);
    for (std::size_t h = 0; h < cfg.horizon; ++h) seq.push_back(sample_action(cfg.bounds, rng));
  }
  return seqs;
}

namespace {

PlanResult start_plan(const PointCloud& s, const PointCloud& target, const PlannerConfig& cfg,
                      double current_err, double init_err) {
  cfg.validate();
  if (s.empty() || target.empty()) throw std::invalid_argument("plan: empty cloud");
  PlanResult r;
  r.eta = std::max(cfg.eta_floor, eta(cfg.alpha, cfg.beta, current_err, init_err));
  r.candidate_costs.assign(cfg.n_samples, std::numeric_limits<double>::infinity());
  return r;
}

void pick_best(PlanResult& r) {
  // Index-ordered scan: the lowest index wins ties, independent of the
  // schedule that filled candidate_costs.
  r.best_index = 0;
  r.best_cost = r.candidate_costs[0];
  for (std::size_t i = 1; i < r.candidate_costs.size(); ++i) {
    if (r.candidate_costs[i] < r.best_cost) {
      r.best_cost = r.candidate_costs[i];
      r.best_index = i;
    }
  }
}

}  // namespace

PlanResult plan(const PointCloud& s, const PointCloud& target, const DeviationModel* model,
                const PlannerConfig& cfg, double current_err, double init_err) {
  PlanResult r = start_plan(s, target, cfg, current_err, init_err);
  const auto seqs = sample_sequences(cfg);
  RolloutEvaluator::Options opt;
  opt.mode = cfg.mode;
  opt.bounds = cfg.bounds;
  opt.overcut_penalty = cfg.overcut_penalty;
  opt.overcut_margin = cfg.overcut_margin > 0.0 ? cfg.overcut_margin : default_overcut_margin(target);

  if (cfg.cost_downsample > 0) {
    // Downsampled costs are not subset-structured; use the reference path.
    return plan_serial(s, target, model, cfg, current_err, init_err);
  }
  const RolloutEvaluator evaluator(s, target, model, opt);
  const auto n = static_cast<std::int64_t>(seqs.size());
  const double eta_value = r.eta;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    r.candidate_costs[i] = evaluator.evaluate(seqs[i], eta_value).mean_cost;
  }
  pick_best(r);
  r.best_sequence = seqs[r.best_index];
  r.best_terms = evaluator.evaluate(r.best_sequence, eta_value).terms;
  return r;
}

PlanResult plan_serial(const PointCloud& s, const PointCloud& target, const DeviationModel* model,
                       const PlannerConfig& cfg, double current_err, double init_err) {
  PlanResult r = start_plan(s, target, cfg, current_err, init_err);
  const auto seqs = sample_sequences(cfg);
  CostSettings settings;
  settings.overcut_penalty = cfg.overcut_penalty;
  settings.overcut_margin =
      cfg.overcut_margin > 0.0 ? cfg.overcut_margin : default_overcut_margin(target);
  settings.downsample_n = cfg.cost_downsample;
  settings.seed = cfg.seed;

  std::vector<std::vector<CostTerms>> terms(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    PointCloud cur = s;
    double total = 0.0;
    for (const auto& a : seqs[i]) {
      CostTerms t;
      if (cur.empty()) {
        t.shape = std::numeric_limits<double>::infinity();
        t.overcut = cfg.overcut_penalty;
      } else {
        auto pred = predict_transition(cur, a, model, cfg.mode, cfg.bounds);
        t = cost(pred.next, a, pred.variance, target, r.eta, settings);
        cur = std::move(pred.next);
      }
      total += t.total();
      terms[i].push_back(t);
    }
    r.candidate_costs[i] = total / static_cast<double>(seqs[i].size());
  }
  pick_best(r);
  r.best_sequence = seqs[r.best_index];
  r.best_terms = terms[r.best_index];
  return r;
}

}  // namespace csam
