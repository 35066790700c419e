#include "csam/rollout_evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csam {

RolloutEvaluator::RolloutEvaluator(const PointCloud& start, const PointCloud& target,
                                   const DeviationModel* model, Options options)
    : start_(start.begin(), start.end()),
      target_(target.begin(), target.end()),
      neighbors_(std::max<std::size_t>(1, std::min(options.neighbors, start.size()))),
      start_tree_(start.points()),
      model_(model),
      options_(options) {
  if (start.empty() || target.empty()) throw std::invalid_argument("RolloutEvaluator: empty cloud");
  const KdTree target_tree(target.points());
  const auto ns = static_cast<std::int64_t>(start_.size());
  sq_dist_to_target_.resize(start_.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ns; ++i) sq_dist_to_target_[i] = target_tree.nearest(start_[i]).sq_dist;

  const auto nt = static_cast<std::int64_t>(target_.size());
  knn_.resize(target_.size() * neighbors_);
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < nt; ++q) {
    const auto nn = start_tree_.k_nearest(target_[q], neighbors_);
    std::copy(nn.begin(), nn.end(), knn_.begin() + q * static_cast<std::int64_t>(neighbors_));
  }
}

RolloutEvaluator::Rollout RolloutEvaluator::evaluate(std::span<const CuttingSurface> sequence,
                                                     double eta_value) const {
  Rollout out;
  out.terms.reserve(sequence.size());
  std::vector<std::uint8_t> alive(start_.size(), 1);
  std::vector<std::uint32_t> counts = start_tree_.full_counts();
  std::size_t n_alive = start_.size();
  const bool full = options_.mode == FeatureMode::kFull;
  const double margin_sq = options_.overcut_margin * options_.overcut_margin;
  double total = 0.0;

  for (const CuttingSurface& a : sequence) {
    // Geometric removal on the current predicted shape.
    const Plane plane = plane_from_action(a);
    std::size_t removed = 0;
    double dist_sum = 0.0;
    Point lo = Point::Constant(std::numeric_limits<double>::infinity());
    Point hi = -lo;
    for (std::size_t i = 0; i < start_.size(); ++i) {
      if (!alive[i]) continue;
      const double sd = plane.signed_distance(start_[i]);
      if (sd > 0.0) {
        ++removed;
        dist_sum += sd;
        if (full) {
          lo = lo.cwiseMin(start_[i]);
          hi = hi.cwiseMax(start_[i]);
        }
      }
    }

    double variance = 0.0;
    if (removed > 0) {
      double deviation = 0.0;
      if (model_ != nullptr) {
        RemovalFeatures e{options_.mode, {}};
        const double volume = dist_sum / static_cast<double>(removed);
        if (full) {
          const Point ext = hi - lo;
          e.values = {volume, ext.x(), ext.y(), ext.z(), a.roll, a.pitch};
        } else {
          e.values = {volume, a.roll};
        }
        const auto est = model_->predict(e, a);
        deviation = est.mean;
        variance = est.variance;
      }
      const Plane cut = deviation == 0.0 ? plane
                                         : plane_from_action(apply_deviation(a, deviation, options_.bounds));
      for (std::size_t i = 0; i < start_.size(); ++i) {
        if (alive[i] && cut.removes(start_[i])) {
          alive[i] = 0;
          start_tree_.erase(i, counts);
          --n_alive;
        }
      }
    }

    CostTerms terms;
    if (n_alive == 0) {
      terms.shape = std::numeric_limits<double>::infinity();
      terms.overcut = options_.overcut_penalty;
    } else {
      double to_target = 0.0;
      for (std::size_t i = 0; i < start_.size(); ++i) {
        if (alive[i]) to_target += sq_dist_to_target_[i];
      }
      // Fall back to a masked tree search when all k precomputed
      // neighbours of a target point are gone.
      std::vector<double> d2(target_.size(), -1.0);
      for (std::size_t q = 0; q < target_.size(); ++q) {
        const Neighbor* nn = &knn_[q * neighbors_];
        for (std::size_t k = 0; k < neighbors_; ++k) {
          if (alive[nn[k].index]) {
            d2[q] = nn[k].sq_dist;
            break;
          }
        }
        if (d2[q] < 0.0) d2[q] = start_tree_.nearest_alive(target_[q], alive, counts).sq_dist;
      }
      double from_target = 0.0;
      double worst = 0.0;
      for (const double v : d2) {
        from_target += v;
        worst = std::max(worst, v);
      }
      terms.shape = to_target / static_cast<double>(n_alive) +
                    from_target / static_cast<double>(target_.size());
      terms.overcut = worst > margin_sq ? options_.overcut_penalty : 0.0;
    }
    terms.variance = eta_value * variance;
    total += terms.total();
    out.terms.push_back(terms);
  }
  out.mean_cost = sequence.empty() ? 0.0 : total / static_cast<double>(sequence.size());
  return out;
}

}  // namespace csam
