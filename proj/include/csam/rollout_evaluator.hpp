// Scores candidate action sequences against a fixed start shape.
//
// Every predicted shape in a rollout is a subset of the start shape, so it
// is represented as an alive-mask over the start points. Squared distances
// from start points to the target and the k nearest start points of each
// target point are computed once; a rollout step then costs O(|s| + |target|)
// instead of rebuilding nearest-neighbour structures. Results match chaining
// predict_transition() and cost() on materialised clouds.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csam/kd_tree.hpp"
#include "csam/planner.hpp"

namespace csam {

class RolloutEvaluator {
 public:
  struct Options {
    FeatureMode mode = FeatureMode::kSim;
    ActionBounds bounds;
    double overcut_penalty = 1000.0;
    double overcut_margin = 1.0;
    std::size_t neighbors = 16;
  };

  RolloutEvaluator(const PointCloud& start, const PointCloud& target, const DeviationModel* model,
                   Options options);

  struct Rollout {
    double mean_cost = 0.0;
    std::vector<CostTerms> terms;
  };

  /// Thread-safe.
  [[nodiscard]] Rollout evaluate(std::span<const CuttingSurface> sequence, double eta_value) const;

 private:
  std::vector<Point> start_;
  std::vector<Point> target_;
  std::vector<double> sq_dist_to_target_;  // per start point
  std::vector<Neighbor> knn_;               // neighbors_ entries per target point
  std::size_t neighbors_;
  KdTree start_tree_;
  const DeviationModel* model_;
  Options options_;
};

}  // namespace csam
