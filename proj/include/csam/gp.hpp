// Gaussian-process regression with an ARD squared-exponential kernel.
//
// Used as the cutting-surface-deviation model: inputs are removal features
// (which already carry the action angles), the output is the deviation of
// the cut height.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace csam {

struct GpHyperparams {
  std::vector<double> lengthscales;  // one per input dimension
  double signal_variance = 1.0;
  double noise_variance = 1e-2;

  /// Throws std::invalid_argument unless every value is finite and > 0 and
  /// there are `dim` lengthscales.
  void validate(std::size_t dim) const;

  friend bool operator==(const GpHyperparams&, const GpHyperparams&) = default;
};

/// Raised when K + noise*I stays indefinite after the maximum jitter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sv * exp(-0.5 * sum_j ((x1_j - x2_j) / l_j)^2)
[[nodiscard]] double kernel(std::span<const double> x1, std::span<const double> x2,
                            const GpHyperparams& hyp);

/// Gram matrix K_ij = kernel(row_i, row_j) without noise. Rows are built in
/// parallel.
[[nodiscard]] Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& X, const GpHyperparams& hyp);
[[nodiscard]] Eigen::MatrixXd gram_matrix_serial(const Eigen::MatrixXd& X,
                                                 const GpHyperparams& hyp);

enum class Standardize { kNone, kZScore };

/// Inputs are mapped to (x - input_mean) / input_scale and outputs are
/// centred on output_mean before any kernel evaluation. Identity for
/// Standardize::kNone.
struct Standardization {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  double output_mean = 0.0;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;      // floored at zero
  double raw_variance = 0.0;  // before flooring
};

class GpModel {
 public:
  /// Untrained model; predict() throws std::logic_error.
  GpModel() = default;

  /// Model with no observations: predicts mean 0 and variance sv.
  [[nodiscard]] static GpModel prior(GpHyperparams hyp, std::size_t dim);

  /// Posterior for fixed hyperparameters. X is N x d, one row per input.
  [[nodiscard]] static GpModel condition(Eigen::MatrixXd X, Eigen::VectorXd Y, GpHyperparams hyp,
                                         Standardize standardize = Standardize::kNone);

  /// Rebuilds a model from stored parts (used by deserialisation).
  [[nodiscard]] static GpModel from_parts(Eigen::MatrixXd X, Eigen::VectorXd Y, GpHyperparams hyp,
                                          Standardization standardization);

  [[nodiscard]] bool trained() const noexcept { return trained_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(Y_.size()); }

  [[nodiscard]] GpPrediction predict(std::span<const double> x) const;

  /// -1/2 y^T (K + s2 I)^-1 y - 1/2 log|K + s2 I| - N/2 log(2 pi), y centred.
  [[nodiscard]] double log_marginal_likelihood() const;

  [[nodiscard]] const Eigen::MatrixXd& inputs() const noexcept { return X_; }
  [[nodiscard]] const Eigen::VectorXd& outputs() const noexcept { return Y_; }
  [[nodiscard]] const GpHyperparams& hyperparams() const noexcept { return hyp_; }
  [[nodiscard]] const Standardization& standardization() const noexcept { return std_; }
  /// Diagonal jitter that was needed for the factorisation (0 if none).
  [[nodiscard]] double jitter() const noexcept { return jitter_; }

 private:
  void require_trained() const;
  void refresh();

  bool trained_ = false;
  std::size_t dim_ = 0;
  Eigen::MatrixXd X_;
  Eigen::VectorXd Y_;
  GpHyperparams hyp_;
  Standardization std_;

  Eigen::MatrixXd Xs_;  // standardised inputs
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

struct FitOptions {
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
  Standardize standardize = Standardize::kZScore;
  int max_iterations = 200;
  // Box for the lengthscales, in standardised input units.
  double min_lengthscale = 1e-2;
  double max_lengthscale = 1e3;
};

/// Maximises the log marginal likelihood over log-hyperparameters with BFGS
/// from `restarts` starting points (the first is `init`, the rest are
/// random perturbations of it). If `init` has no lengthscales, data-driven
/// defaults are used. Hyperparameters live in the standardised space.
[[nodiscard]] GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                          const GpHyperparams& init, const FitOptions& options = {});

/// Log marginal likelihood and its gradient with respect to
/// (log l_1..log l_d, log sv, log noise) for already-standardised data.
struct LmlValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};
[[nodiscard]] LmlValue log_marginal_likelihood_with_gradient(const Eigen::MatrixXd& Xs,
                                                             const Eigen::VectorXd& y_centered,
                                                             const GpHyperparams& hyp);

/// Independent single-output GPs sharing one input set.
class MultiOutputGp {
 public:
  MultiOutputGp() = default;
  explicit MultiOutputGp(std::vector<GpModel> outputs);

  [[nodiscard]] std::size_t num_outputs() const noexcept { return outputs_.size(); }
  [[nodiscard]] const GpModel& output(std::size_t j) const { return outputs_.at(j); }
  [[nodiscard]] bool trained() const noexcept;
  [[nodiscard]] std::size_t dim() const;

  [[nodiscard]] std::vector<GpPrediction> predict(std::span<const double> x) const;

 private:
  std::vector<GpModel> outputs_;
};

/// Fits one GP per column of Y.
[[nodiscard]] MultiOutputGp fit_multi(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                      const GpHyperparams& init, const FitOptions& options = {});

}  // namespace csam
