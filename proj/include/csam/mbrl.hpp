// Iterative learning loop: initial random data collection, episodic MPC,
// deviation-model retraining, baseline policies and evaluation metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "csam/gp.hpp"
#include "csam/planner.hpp"
#include "csam/sim_env.hpp"

namespace csam {

enum class Policy { kRandom, kGeometric, kProposed, kProposedGt };

[[nodiscard]] std::string_view to_string(Policy p) noexcept;
[[nodiscard]] Policy parse_policy(std::string_view s);

struct InitialDataConfig {
  std::size_t n_init = 15;
  double volume_min = 0.0;
  double volume_max = 4.0;
  std::size_t max_retries = 100;  // rejection-sampling attempts per sample
};

struct ExperimentConfig {
  std::size_t n_episode = 5;
  std::size_t task_horizon = 40;  // T
  Policy policy = Policy::kProposed;
  EnvConfig env;
  PlannerConfig planner;  // planner.seed is replaced per step
  InitialDataConfig initial;
  std::size_t gp_restarts = 5;
  double gp_max_lengthscale = 1.0;  // standardised input units; keeps variance growing off the data
  std::size_t random_retries = 100;  // RANDOM policy re-draws of over-cutting actions
  double reference_factor = 1.15;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic 64-bit seed mixing (splitmix64 finaliser).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// Object seed of episode `e`; shared by every policy run with the same
/// experiment seed.
[[nodiscard]] std::uint64_t episode_seed(std::uint64_t experiment_seed, std::size_t episode) noexcept;

/// Training rows (x = removal features incl. action angles, y = realised
/// deviation). Rows from interrupted steps are refused and only counted.
class Dataset {
 public:
  /// Returns false (and counts) when `interrupted` is set.
  bool add(const RemovalFeatures& x, double y, bool interrupted);
  void append(const Dataset& other);

  [[nodiscard]] std::size_t size() const noexcept { return y_.size(); }
  [[nodiscard]] bool empty() const noexcept { return y_.empty(); }
  [[nodiscard]] std::size_t interrupted_count() const noexcept { return interrupted_; }
  [[nodiscard]] const std::vector<std::vector<double>>& inputs() const noexcept { return x_; }
  [[nodiscard]] const std::vector<double>& outputs() const noexcept { return y_; }

  [[nodiscard]] Eigen::MatrixXd X() const;
  [[nodiscard]] Eigen::MatrixXd Y() const;  // N x 1

  /// Rebuilds a dataset from a stored model's training set.
  [[nodiscard]] static Dataset from_model(const GpModel& model, FeatureMode mode);

 private:
  std::vector<std::vector<double>> x_;
  std::vector<double> y_;
  std::size_t interrupted_ = 0;
  std::size_t dim_ = 0;
};

struct StepLog {
  std::size_t episode = 0;
  std::size_t t = 0;  // 1-based
  double chamfer = 0.0;  // error of the state the action was chosen in
  CuttingSurface action;
  double deviation = 0.0;  // realised, dev_large when interrupted
  double predicted_err = 0.0;  // chamfer(predicted next, target)
  double realized_err = 0.0;   // chamfer(next, target)
  CostTerms cost;
  bool interrupted = false;
  double volume = 0.0;
  double wall_seconds = 0.0;
};

struct EpisodeLog {
  std::size_t episode = 0;
  std::uint64_t object_seed = 0;
  std::vector<StepLog> steps;

  [[nodiscard]] double final_chamfer() const;
  [[nodiscard]] std::size_t interrupts() const noexcept;
};

struct InitialCollection {
  Dataset data;
  std::size_t attempts = 0;  // actions drawn, accepted or not
};

/// Executes `n` random actions, each on a fresh copy of the object, whose
/// geometric removal is non-empty with V_geom in [volume_min, volume_max].
/// Throws std::invalid_argument if a sample exhausts its retries.
[[nodiscard]] InitialCollection collect_initial(const EnvConfig& env, const InitialDataConfig& cfg,
                                                std::uint64_t seed);

struct EpisodeResult {
  EpisodeLog log;
  Dataset rows;
};

/// One episode of T steps from `env`'s current state. `model` is the
/// deviation model used by PROPOSED / PROPOSED_GT; GEOMETRIC and RANDOM
/// ignore it.
[[nodiscard]] EpisodeResult run_episode(GrindingEnv& env, const DeviationModel* model, Policy policy,
                                        const ExperimentConfig& cfg, std::size_t episode,
                                        double init_err);

/// Fits the deviation GP; options.seed drives the restarts.
[[nodiscard]] MultiOutputGp train_csdm(const Dataset& data, const FitOptions& options);

struct MbrlOptions {
  std::optional<MultiOutputGp> model;  // preloaded deviation model
  double model_init_err = 0.0;         // initial shape error of its training object
  bool retrain = true;
};

struct MbrlResult {
  std::vector<EpisodeLog> episodes;
  std::optional<MultiOutputGp> model;  // final model (PROPOSED only)
  Dataset data;
  double init_err = 0.0;  // denominator of the eta schedule
  std::size_t initial_attempts = 0;
};

[[nodiscard]] MbrlResult run_mbrl(const ExperimentConfig& cfg, const MbrlOptions& options = {});

/// |d(pred, target) - d(real, target)| / d(real, target) * 100.
[[nodiscard]] double shape_prediction_error_rate(const PointCloud& predicted, const PointCloud& real,
                                                 const PointCloud& target);
[[nodiscard]] double shape_prediction_error_rate(double predicted_err, double realized_err);

/// First 1-based step whose realised error is <= reference_err.
[[nodiscard]] std::optional<std::size_t> steps_to_reference(const EpisodeLog& log, double reference_err);

/// reference_factor x mean final error of the given episodes.
[[nodiscard]] double reference_line(const std::vector<EpisodeLog>& reference, double factor);

}  // namespace csam
