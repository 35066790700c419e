// Cutting-surface-aware forward prediction and random-shooting MPC.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "csam/cutting.hpp"
#include "csam/gp.hpp"
#include "csam/point_cloud.hpp"
#include "csam/sim_env.hpp"

namespace csam {

struct DeviationEstimate {
  double mean = 0.0;      // predicted z deviation
  double variance = 0.0;  // mean predictive variance over the model outputs
};

/// Maps removal features and the action to a predicted cut-height deviation.
/// Implementations must be safe to call concurrently.
class DeviationModel {
 public:
  virtual ~DeviationModel() = default;
  [[nodiscard]] virtual DeviationEstimate predict(const RemovalFeatures& features,
                                                  const CuttingSurface& action) const = 0;
};

/// Learned deviation model. Output 0 is the z deviation; the variance is
/// averaged over all outputs.
class GpDeviationModel final : public DeviationModel {
 public:
  explicit GpDeviationModel(MultiOutputGp gp);
  [[nodiscard]] DeviationEstimate predict(const RemovalFeatures& features,
                                          const CuttingSurface& action) const override;
  [[nodiscard]] const MultiOutputGp& gp() const noexcept { return gp_; }

 private:
  MultiOutputGp gp_;
};

/// Oracle deviation model backed by the simulator's resistance model.
class GroundTruthDeviationModel final : public DeviationModel {
 public:
  explicit GroundTruthDeviationModel(GtDeviationParams params) : params_(params) {}
  [[nodiscard]] DeviationEstimate predict(const RemovalFeatures& features,
                                          const CuttingSurface& action) const override;

 private:
  GtDeviationParams params_;
};

struct TransitionPrediction {
  PointCloud next;
  RemovalFeatures features;
  double deviation = 0.0;
  double variance = 0.0;
};

/// Split, extract features, predict the deviation, then split again at the
/// deviated surface. A null model is the purely geometric prediction. An
/// action that removes nothing is predicted to deviate by 0 with variance 0.
[[nodiscard]] TransitionPrediction predict_transition(const PointCloud& s, const CuttingSurface& a,
                                                      const DeviationModel* model, FeatureMode mode,
                                                      const ActionBounds& bounds);

/// Variance-cost coefficient alpha * (current_err / init_err)^beta.
[[nodiscard]] double eta(double alpha, double beta, double current_err, double init_err);

/// Over-cut test: true iff some target point is farther than `margin` from
/// every point of the predicted shape.
[[nodiscard]] bool detect_overcut(const PointCloud& predicted, const PointCloud& target, double margin);

/// 2 x mean nearest-neighbour spacing of the target.
[[nodiscard]] double default_overcut_margin(const PointCloud& target);

struct CostTerms {
  double shape = 0.0;
  double overcut = 0.0;
  double variance = 0.0;  // already scaled by eta

  [[nodiscard]] double total() const noexcept { return shape + overcut + variance; }
};

struct CostSettings {
  double overcut_penalty = 1000.0;
  double overcut_margin = -1.0;  // <= 0: default_overcut_margin(target)
  std::size_t downsample_n = 0;  // 0: use full clouds
  std::uint64_t seed = 0;
};

/// Chamfer shape error + over-cut penalty + eta * variance.
[[nodiscard]] CostTerms cost(const PointCloud& predicted, const CuttingSurface& a, double variance,
                             const PointCloud& target, double eta_value,
                             const CostSettings& settings = {});

struct PlannerConfig {
  std::size_t horizon = 3;
  std::size_t n_samples = 1000;
  double alpha = 300.0;  // variance cost is in mm^2 against a squared-distance shape cost
  double beta = 1.0;
  double eta_floor = 0.0;
  double overcut_penalty = 1000.0;
  double overcut_margin = -1.0;  // <= 0: default_overcut_margin(target)
  std::size_t cost_downsample = 0;  // 0: exact full-cloud Chamfer
  ActionBounds bounds;
  FeatureMode mode = FeatureMode::kSim;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PlanResult {
  std::vector<CuttingSurface> best_sequence;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  std::vector<CostTerms> best_terms;  // per horizon step of the best sequence
  std::vector<double> candidate_costs;
  double eta = 0.0;
};

/// Uniform random action within the bounds.
template <typename Rng>
CuttingSurface sample_action(const ActionBounds& b, Rng& rng);

/// Draws n_samples sequences of length H, each action uniform in the bounds.
[[nodiscard]] std::vector<std::vector<CuttingSurface>> sample_sequences(const PlannerConfig& cfg);

/// Random-shooting MPC over the mean horizon cost. Candidates are scored in
/// parallel; ties resolve to the lowest sample index.
[[nodiscard]] PlanResult plan(const PointCloud& s, const PointCloud& target,
                              const DeviationModel* model, const PlannerConfig& cfg,
                              double current_err, double init_err);

/// Serial reference for plan(): every candidate is rolled out with
/// predict_transition() and scored with cost() on materialised clouds.
[[nodiscard]] PlanResult plan_serial(const PointCloud& s, const PointCloud& target,
                                     const DeviationModel* model, const PlannerConfig& cfg,
                                     double current_err, double init_err);

}  // namespace csam

#include "csam/planner_inl.hpp"
