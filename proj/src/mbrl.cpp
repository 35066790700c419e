#include "csam/mbrl.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace csam {

std::string_view to_string(Policy p) noexcept {
  switch (p) {
    case Policy::kRandom: return "random";
    case Policy::kGeometric: return "geometric";
    case Policy::kProposed: return "proposed";
    case Policy::kProposedGt: return "proposed_gt";
  }
  return "?";
}

Policy parse_policy(std::string_view s) {
  std::string v(s);
  for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (char& c : v) {
    if (c == '-') c = '_';
  }
  if (v == "random") return Policy::kRandom;
  if (v == "geometric") return Policy::kGeometric;
  if (v == "proposed") return Policy::kProposed;
  if (v == "proposed_gt") return Policy::kProposedGt;
  throw std::invalid_argument("unknown policy: " + std::string(s));
}

void ExperimentConfig::validate() const {
  if (n_episode < 1 || task_horizon < 1 || initial.n_init < 1) {
    throw std::invalid_argument("ExperimentConfig: n_episode, T and n_init must be >= 1");
  }
  if (!(initial.volume_min >= 0.0) || !(initial.volume_min <= initial.volume_max)) {
    throw std::invalid_argument("ExperimentConfig: invalid initial volume range");
  }
  if (initial.max_retries < 1 || gp_restarts < 1) {
    throw std::invalid_argument("ExperimentConfig: retries and restarts must be >= 1");
  }
  if (!(gp_max_lengthscale >= 1e-2)) throw std::invalid_argument("ExperimentConfig: gp_max_lengthscale < 1e-2");
  if (!(reference_factor > 0.0)) throw std::invalid_argument("ExperimentConfig: bad reference factor");
  env.object.validate();
  env.resistance.validate();
  env.bounds.validate();
  planner.validate();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(base ^ mix(stream));
}

namespace {
// Stream identifiers for derive_seed.
constexpr std::uint64_t kEpisodeStream = 0x1000;
constexpr std::uint64_t kCollectStream = 0x2000;
constexpr std::uint64_t kFitStream = 0x3000;
constexpr std::uint64_t kRandomPolicyStream = 0x4000;
constexpr std::uint64_t kPlanStream = 0x5000;
}  // namespace

std::uint64_t episode_seed(std::uint64_t experiment_seed, std::size_t episode) noexcept {
  return derive_seed(experiment_seed, kEpisodeStream + episode);
}

// ---------------------------------------------------------------------------
// Dataset

bool Dataset::add(const RemovalFeatures& x, double y, bool interrupted) {
  if (interrupted) {
    ++interrupted_;
    return false;
  }
  if (!std::isfinite(y)) throw std::invalid_argument("Dataset: non-finite target");
  if (dim_ == 0) dim_ = x.values.size();
  if (x.values.size() != dim_) throw std::invalid_argument("Dataset: feature dimension mismatch");
  x_.push_back(x.values);
  y_.push_back(y);
  return true;
}

void Dataset::append(const Dataset& other) {
  if (!other.empty()) {
    if (dim_ == 0) dim_ = other.dim_;
    if (other.dim_ != dim_) throw std::invalid_argument("Dataset: feature dimension mismatch");
  }
  x_.insert(x_.end(), other.x_.begin(), other.x_.end());
  y_.insert(y_.end(), other.y_.begin(), other.y_.end());
  interrupted_ += other.interrupted_;
}

Eigen::MatrixXd Dataset::X() const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x_[i][j];
    }
  }
  return X;
}

Eigen::MatrixXd Dataset::Y() const {
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(size()), 1);
  for (std::size_t i = 0; i < size(); ++i) Y(static_cast<Eigen::Index>(i), 0) = y_[i];
  return Y;
}

Dataset Dataset::from_model(const GpModel& model, FeatureMode mode) {
  if (model.dim() != feature_dim(mode)) {
    throw std::invalid_argument("Dataset::from_model: model dimension does not match feature mode");
  }
  Dataset d;
  const auto& X = model.inputs();
  const auto& Y = model.outputs();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    RemovalFeatures f{mode, std::vector<double>(static_cast<std::size_t>(X.cols()))};
    for (Eigen::Index j = 0; j < X.cols(); ++j) f.values[static_cast<std::size_t>(j)] = X(i, j);
    d.add(f, Y[i], false);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Logs and metrics

double EpisodeLog::final_chamfer() const {
  if (steps.empty()) throw std::logic_error("EpisodeLog: no steps");
  return steps.back().realized_err;
}

std::size_t EpisodeLog::interrupts() const noexcept {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.interrupted ? 1 : 0;
  return n;
}

double shape_prediction_error_rate(double predicted_err, double realized_err) {
  if (!(realized_err > 0.0)) {
    throw std::invalid_argument("shape_prediction_error_rate: realised error must be positive");
  }
  return std::abs(predicted_err - realized_err) / realized_err * 100.0;
}

double shape_prediction_error_rate(const PointCloud& predicted, const PointCloud& real,
                                   const PointCloud& target) {
  return shape_prediction_error_rate(chamfer(predicted, target), chamfer(real, target));
}

std::optional<std::size_t> steps_to_reference(const EpisodeLog& log, double reference_err) {
  for (const auto& s : log.steps) {
    if (s.realized_err <= reference_err) return s.t;
  }
  return std::nullopt;
}

double reference_line(const std::vector<EpisodeLog>& reference, double factor) {
  if (reference.empty()) throw std::invalid_argument("reference_line: no episodes");
  double sum = 0.0;
  for (const auto& e : reference) sum += e.final_chamfer();
  return factor * sum / static_cast<double>(reference.size());
}

// ---------------------------------------------------------------------------
// Loop

InitialCollection collect_initial(const EnvConfig& env_cfg, const InitialDataConfig& cfg,
                                  std::uint64_t seed) {
  if (cfg.n_init < 1) throw std::invalid_argument("collect_initial: n must be >= 1");
  GrindingEnv env(env_cfg);
  std::mt19937_64 rng(seed);
  InitialCollection out;
  for (std::size_t i = 0; i < cfg.n_init; ++i) {
    const EnvState& st = env.reset(derive_seed(seed, i), 1);
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < cfg.max_retries && !accepted; ++attempt) {
      const CuttingSurface a = sample_action(env_cfg.bounds, rng);
      ++out.attempts;
      const Plane plane = plane_from_action(a);
      const auto parts = split(st.current, plane);
      if (parts.removed.empty()) continue;
      const double v = removal_volume(parts.removed, plane);
      if (v < cfg.volume_min || v > cfg.volume_max) continue;
      const auto rec = env.step(a);
      out.data.add(rec.features, rec.deviation, rec.interrupted);
      accepted = true;
    }
    if (!accepted) {
      throw std::invalid_argument("collect_initial: no action with removal volume in [" +
                                  std::to_string(cfg.volume_min) + ", " +
                                  std::to_string(cfg.volume_max) + "] after " +
                                  std::to_string(cfg.max_retries) + " draws");
    }
  }
  return out;
}

MultiOutputGp train_csdm(const Dataset& data, const FitOptions& options) {
  if (data.empty()) throw std::invalid_argument("train_csdm: empty dataset");
  return fit_multi(data.X(), data.Y(), GpHyperparams{}, options);
}

namespace {

FitOptions fit_options(const ExperimentConfig& cfg, std::uint64_t seed) {
  FitOptions o;
  o.restarts = cfg.gp_restarts;
  o.max_lengthscale = cfg.gp_max_lengthscale;
  o.seed = seed;
  return o;
}

}  // namespace

EpisodeResult run_episode(GrindingEnv& env, const DeviationModel* model, Policy policy,
                          const ExperimentConfig& cfg, std::size_t episode, double init_err) {
  using clock = std::chrono::steady_clock;
  const DeviationModel* planning_model =
      (policy == Policy::kProposed || policy == Policy::kProposedGt) ? model : nullptr;
  if (policy == Policy::kProposed && model == nullptr) {
    throw std::invalid_argument("run_episode: PROPOSED needs a deviation model");
  }
  const PointCloud& target = env.state().target;
  const double margin =
      cfg.planner.overcut_margin > 0.0 ? cfg.planner.overcut_margin : default_overcut_margin(target);
  std::mt19937_64 random_rng(derive_seed(env.state().seed, kRandomPolicyStream));

  EpisodeResult out;
  out.log.episode = episode;
  out.log.object_seed = env.state().seed;
  for (std::size_t t = 1; t <= cfg.task_horizon; ++t) {
    const auto t0 = clock::now();
    const PointCloud& s = env.state().current;
    StepLog row;
    row.episode = episode;
    row.t = t;
    row.chamfer = chamfer(s, target);

    CuttingSurface a;
    if (policy == Policy::kRandom) {
      for (std::size_t k = 0; k <= cfg.random_retries; ++k) {
        a = sample_action(cfg.env.bounds, random_rng);
        const auto geo = predict_transition(s, a, nullptr, cfg.env.mode, cfg.env.bounds);
        if (!detect_overcut(geo.next, target, margin)) break;
      }
    } else {
      PlannerConfig pc = cfg.planner;
      pc.bounds = cfg.env.bounds;
      pc.mode = cfg.env.mode;
      pc.seed = derive_seed(env.state().seed, kPlanStream + t);
      const PlanResult plan_result = plan(s, target, planning_model, pc, row.chamfer, init_err);
      a = plan_result.best_sequence.front();
      row.cost = plan_result.best_terms.front();
    }

    const auto pred = predict_transition(s, a, planning_model, cfg.env.mode, cfg.env.bounds);
    row.predicted_err =
        pred.next.empty() ? std::numeric_limits<double>::infinity() : chamfer(pred.next, target);
    if (policy == Policy::kRandom) {
      row.cost.shape = row.predicted_err;
      row.cost.overcut = detect_overcut(pred.next, target, margin) ? cfg.planner.overcut_penalty : 0.0;
    }

    const TransitionRecord rec = env.step(a);
    row.action = a;
    row.deviation = rec.deviation;
    row.interrupted = rec.interrupted;
    row.volume = rec.volume;
    row.realized_err =
        rec.next.empty() ? std::numeric_limits<double>::infinity() : chamfer(rec.next, target);
    out.rows.add(rec.features, rec.deviation, rec.interrupted);
    row.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    out.log.steps.push_back(row);
  }
  return out;
}

MbrlResult run_mbrl(const ExperimentConfig& cfg, const MbrlOptions& options) {
  cfg.validate();
  MbrlResult out;
  const bool learns = cfg.policy == Policy::kProposed;

  // Denominator of the eta schedule: the initial error of the object the
  // deviation model is trained on.
  const std::uint64_t collect_seed = derive_seed(cfg.seed, kCollectStream);
  {
    const auto obj = make_object(cfg.env.object, derive_seed(collect_seed, 0));
    out.init_err = chamfer(obj.initial, obj.target);
  }

  std::optional<GpDeviationModel> gp_model;
  if (learns) {
    if (options.model) {
      out.model = *options.model;
      out.data = Dataset::from_model(options.model->output(0), cfg.env.mode);
      if (options.model_init_err > 0.0) out.init_err = options.model_init_err;
    } else {
      auto init = collect_initial(cfg.env, cfg.initial, collect_seed);
      out.initial_attempts = init.attempts;
      out.data = std::move(init.data);
      out.model = train_csdm(out.data, fit_options(cfg, derive_seed(cfg.seed, kFitStream)));
    }
    gp_model.emplace(*out.model);
  }
  const GroundTruthDeviationModel gt_model(cfg.env.resistance);

  GrindingEnv env(cfg.env);
  for (std::size_t e = 0; e < cfg.n_episode; ++e) {
    env.reset(episode_seed(cfg.seed, e), cfg.task_horizon);
    const DeviationModel* model = nullptr;
    if (cfg.policy == Policy::kProposed) model = &*gp_model;
    if (cfg.policy == Policy::kProposedGt) model = &gt_model;
    auto result = run_episode(env, model, cfg.policy, cfg, e, out.init_err);
    out.episodes.push_back(std::move(result.log));
    if (learns) {
      out.data.append(result.rows);
      if (options.retrain) {
        out.model = train_csdm(out.data, fit_options(cfg, derive_seed(cfg.seed, kFitStream + e + 1)));
        gp_model.emplace(*out.model);
      }
    }
  }
  return out;
}

}  // namespace csam
