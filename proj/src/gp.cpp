#include "csam/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

namespace csam {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

// Escalating diagonal jitter, relative to the mean diagonal of the matrix.
constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

Factorization factorize(const Eigen::MatrixXd& A) {
  Factorization f;
  const auto n = A.rows();
  const double scale = n > 0 ? std::max(A.diagonal().mean(), std::numeric_limits<double>::min()) : 1.0;
  for (double rel : kJitterLadder) {
    const double jitter = rel * scale;
    if (jitter == 0.0) {
      f.llt.compute(A);
    } else {
      Eigen::MatrixXd B = A;
      B.diagonal().array() += jitter;
      f.llt.compute(B);
    }
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw NumericalError("Cholesky factorisation failed after maximum jitter");
}

double sq_scaled_distance(const double* a, const double* b, const std::vector<double>& ls,
                          std::size_t d) {
  double r2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = (a[j] - b[j]) / ls[j];
    r2 += t * t;
  }
  return r2;
}

Standardization make_standardization(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                     Standardize mode) {
  const auto d = X.cols();
  Standardization s;
  s.input_mean = Eigen::VectorXd::Zero(d);
  s.input_scale = Eigen::VectorXd::Ones(d);
  s.output_mean = 0.0;
  if (mode == Standardize::kNone || X.rows() == 0) return s;
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = X.col(j).mean();
    const double var = (X.col(j).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    s.input_mean[j] = mean;
    s.input_scale[j] = sd > 1e-12 * (1.0 + std::abs(mean)) ? sd : 1.0;
  }
  s.output_mean = Y.mean();
  return s;
}

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& X, const Standardization& s) {
  Eigen::MatrixXd Xs = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Xs.col(j) = (X.col(j).array() - s.input_mean[j]) / s.input_scale[j];
  }
  return Xs;
}

void check_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y) {
  if (X.rows() != Y.size()) throw std::invalid_argument("GP: X and Y row counts differ");
  if (!X.allFinite()) throw std::invalid_argument("GP: non-finite input values");
  if (!Y.allFinite()) throw std::invalid_argument("GP: non-finite output values");
}

}  // namespace

void GpHyperparams::validate(std::size_t dim) const {
  if (lengthscales.size() != dim) {
    throw std::invalid_argument("GpHyperparams: expected " + std::to_string(dim) +
                                " lengthscales, got " + std::to_string(lengthscales.size()));
  }
  const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!std::all_of(lengthscales.begin(), lengthscales.end(), ok) || !ok(signal_variance) ||
      !ok(noise_variance)) {
    throw std::invalid_argument("GpHyperparams: values must be finite and positive");
  }
}

double kernel(std::span<const double> x1, std::span<const double> x2, const GpHyperparams& hyp) {
  if (x1.size() != x2.size() || x1.size() != hyp.lengthscales.size()) {
    throw std::invalid_argument("kernel: dimension mismatch");
  }
  return hyp.signal_variance *
         std::exp(-0.5 * sq_scaled_distance(x1.data(), x2.data(), hyp.lengthscales, x1.size()));
}

Eigen::MatrixXd gram_matrix_serial(const Eigen::MatrixXd& X, const GpHyperparams& hyp) {
  const auto n = X.rows();
  const auto d = static_cast<std::size_t>(X.cols());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = X;
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = hyp.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = hyp.signal_variance *
                       std::exp(-0.5 * sq_scaled_distance(R.row(i).data(), R.row(j).data(),
                                                          hyp.lengthscales, d));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& X, const GpHyperparams& hyp) {
  const auto n = X.rows();
  const auto d = static_cast<std::size_t>(X.cols());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = X;
  Eigen::MatrixXd K(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = hyp.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = hyp.signal_variance *
                std::exp(-0.5 * sq_scaled_distance(R.row(i).data(), R.row(j).data(),
                                                   hyp.lengthscales, d));
    }
  }
  K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

// ---------------------------------------------------------------------------
// GpModel

GpModel GpModel::prior(GpHyperparams hyp, std::size_t dim) {
  hyp.validate(dim);
  GpModel m;
  m.trained_ = true;
  m.dim_ = dim;
  m.X_ = Eigen::MatrixXd(0, static_cast<Eigen::Index>(dim));
  m.Y_ = Eigen::VectorXd(0);
  m.hyp_ = std::move(hyp);
  m.std_ = make_standardization(m.X_, m.Y_, Standardize::kNone);
  m.refresh();
  return m;
}

GpModel GpModel::condition(Eigen::MatrixXd X, Eigen::VectorXd Y, GpHyperparams hyp,
                           Standardize standardize) {
  check_data(X, Y);
  auto s = make_standardization(X, Y, standardize);
  return from_parts(std::move(X), std::move(Y), std::move(hyp), std::move(s));
}

GpModel GpModel::from_parts(Eigen::MatrixXd X, Eigen::VectorXd Y, GpHyperparams hyp,
                            Standardization standardization) {
  check_data(X, Y);
  const auto dim = static_cast<std::size_t>(X.cols());
  hyp.validate(dim);
  if (standardization.input_mean.size() != X.cols() ||
      standardization.input_scale.size() != X.cols()) {
    throw std::invalid_argument("GpModel: standardisation dimension mismatch");
  }
  GpModel m;
  m.trained_ = true;
  m.dim_ = dim;
  m.X_ = std::move(X);
  m.Y_ = std::move(Y);
  m.hyp_ = std::move(hyp);
  m.std_ = std::move(standardization);
  m.refresh();
  return m;
}

void GpModel::refresh() {
  Xs_ = apply_standardization(X_, std_);
  const auto n = Y_.size();
  if (n == 0) {
    alpha_ = Eigen::VectorXd(0);
    jitter_ = 0.0;
    return;
  }
  Eigen::MatrixXd A = gram_matrix(Xs_, hyp_);
  A.diagonal().array() += hyp_.noise_variance;
  auto f = factorize(A);
  llt_ = std::move(f.llt);
  jitter_ = f.jitter;
  alpha_ = llt_.solve((Y_.array() - std_.output_mean).matrix());
}

void GpModel::require_trained() const {
  if (!trained_) throw std::logic_error("GpModel: model is not trained");
}

GpPrediction GpModel::predict(std::span<const double> x) const {
  require_trained();
  if (x.size() != dim_) throw std::invalid_argument("GpModel::predict: dimension mismatch");
  std::vector<double> xs(dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    xs[j] = (x[j] - std_.input_mean[static_cast<Eigen::Index>(j)]) /
            std_.input_scale[static_cast<Eigen::Index>(j)];
  }
  const double kss = hyp_.signal_variance;
  const auto n = Y_.size();
  GpPrediction out;
  if (n == 0) {
    out.mean = std_.output_mean;
    out.raw_variance = kss;
    out.variance = kss;
    return out;
  }
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double t = (Xs_(i, static_cast<Eigen::Index>(j)) - xs[j]) / hyp_.lengthscales[j];
      r2 += t * t;
    }
    ks[i] = kss * std::exp(-0.5 * r2);
  }
  out.mean = std_.output_mean + ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  out.raw_variance = kss - v.squaredNorm();
  out.variance = std::max(0.0, out.raw_variance);
  return out;
}

double GpModel::log_marginal_likelihood() const {
  require_trained();
  const auto n = Y_.size();
  if (n == 0) return 0.0;
  const Eigen::VectorXd yc = (Y_.array() - std_.output_mean).matrix();
  const Eigen::MatrixXd L = llt_.matrixL();
  const double log_det_half = L.diagonal().array().log().sum();
  return -0.5 * yc.dot(alpha_) - log_det_half - 0.5 * static_cast<double>(n) * kLog2Pi;
}

// ---------------------------------------------------------------------------
// Fitting

LmlValue log_marginal_likelihood_with_gradient(const Eigen::MatrixXd& Xs,
                                               const Eigen::VectorXd& y_centered,
                                               const GpHyperparams& hyp) {
  const auto n = Xs.rows();
  const auto d = static_cast<std::size_t>(Xs.cols());
  hyp.validate(d);
  Eigen::MatrixXd K = gram_matrix(Xs, hyp);
  Eigen::MatrixXd A = K;
  A.diagonal().array() += hyp.noise_variance;
  const auto f = factorize(A);
  const Eigen::VectorXd alpha = f.llt.solve(y_centered);
  const Eigen::MatrixXd L = f.llt.matrixL();

  LmlValue out;
  out.value = -0.5 * y_centered.dot(alpha) - L.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * kLog2Pi;

  // dLML/dtheta = 1/2 tr((alpha alpha^T - A^-1) dA/dtheta)
  Eigen::MatrixXd W = alpha * alpha.transpose() - f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 2));
  for (std::size_t j = 0; j < d; ++j) {
    const double inv_l2 = 1.0 / (hyp.lengthscales[j] * hyp.lengthscales[j]);
    double g = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        const double diff = Xs(r, static_cast<Eigen::Index>(j)) - Xs(c, static_cast<Eigen::Index>(j));
        g += W(r, c) * K(r, c) * diff * diff * inv_l2;
      }
    }
    out.gradient[static_cast<Eigen::Index>(j)] = 0.5 * g;
  }
  out.gradient[static_cast<Eigen::Index>(d)] = 0.5 * (W.array() * K.array()).sum();
  out.gradient[static_cast<Eigen::Index>(d + 1)] = 0.5 * hyp.noise_variance * W.trace();
  return out;
}

namespace {

struct Objective {
  const Eigen::MatrixXd* Xs;
  const Eigen::VectorXd* y;
  std::size_t dim;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

constexpr double kPenaltyWeight = 10.0;
constexpr double kFailedObjective = 1e300;

GpHyperparams from_log(const gsl_vector* theta, std::size_t dim) {
  GpHyperparams h;
  h.lengthscales.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) h.lengthscales[j] = std::exp(gsl_vector_get(theta, j));
  h.signal_variance = std::exp(gsl_vector_get(theta, dim));
  h.noise_variance = std::exp(gsl_vector_get(theta, dim + 1));
  return h;
}

GpHyperparams from_log(const Eigen::VectorXd& theta, std::size_t dim) {
  GpHyperparams h;
  h.lengthscales.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) h.lengthscales[j] = std::exp(theta[static_cast<Eigen::Index>(j)]);
  h.signal_variance = std::exp(theta[static_cast<Eigen::Index>(dim)]);
  h.noise_variance = std::exp(theta[static_cast<Eigen::Index>(dim + 1)]);
  return h;
}

// Negative LML plus a quadratic penalty outside the log-space box.
void objective_fdf(const gsl_vector* theta, void* params, double* f, gsl_vector* df) {
  const auto& obj = *static_cast<const Objective*>(params);
  const std::size_t p = obj.dim + 2;
  double penalty = 0.0;
  Eigen::VectorXd pen_grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < p; ++k) {
    const double t = gsl_vector_get(theta, k);
    const auto kk = static_cast<Eigen::Index>(k);
    if (t < obj.lo[kk]) {
      penalty += kPenaltyWeight * (obj.lo[kk] - t) * (obj.lo[kk] - t);
      pen_grad[kk] = -2.0 * kPenaltyWeight * (obj.lo[kk] - t);
    } else if (t > obj.hi[kk]) {
      penalty += kPenaltyWeight * (t - obj.hi[kk]) * (t - obj.hi[kk]);
      pen_grad[kk] = 2.0 * kPenaltyWeight * (t - obj.hi[kk]);
    }
  }
  bool ok = true;
  LmlValue lml;
  for (std::size_t k = 0; k < p && ok; ++k) ok = std::isfinite(gsl_vector_get(theta, k)) && std::abs(gsl_vector_get(theta, k)) < 700.0;
  if (ok) {
    try {
      lml = log_marginal_likelihood_with_gradient(*obj.Xs, *obj.y, from_log(theta, obj.dim));
      ok = std::isfinite(lml.value) && lml.gradient.allFinite();
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok) {
    if (f) *f = kFailedObjective;
    if (df) gsl_vector_set_zero(df);
    return;
  }
  if (f) *f = -lml.value + penalty;
  if (df) {
    for (std::size_t k = 0; k < p; ++k) {
      gsl_vector_set(df, k, -lml.gradient[static_cast<Eigen::Index>(k)] + pen_grad[static_cast<Eigen::Index>(k)]);
    }
  }
}

double objective_f(const gsl_vector* theta, void* params) {
  double f = 0.0;
  objective_fdf(theta, params, &f, nullptr);
  return f;
}

void objective_df(const gsl_vector* theta, void* params, gsl_vector* df) {
  objective_fdf(theta, params, nullptr, df);
}

Eigen::VectorXd minimize(const Objective& obj, const Eigen::VectorXd& start, int max_iterations) {
  const std::size_t p = obj.dim + 2;
  gsl_multimin_function_fdf fn;
  fn.n = p;
  fn.f = &objective_f;
  fn.df = &objective_df;
  fn.fdf = &objective_fdf;
  fn.params = const_cast<Objective*>(&obj);

  gsl_vector* x = gsl_vector_alloc(p);
  for (std::size_t k = 0; k < p; ++k) gsl_vector_set(x, k, start[static_cast<Eigen::Index>(k)]);
  gsl_multimin_fdfminimizer* s =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, p);
  gsl_multimin_fdfminimizer_set(s, &fn, x, 0.1, 0.1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(s->gradient, 1e-5) == GSL_SUCCESS) break;
  }
  Eigen::VectorXd best(static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < p; ++k) best[static_cast<Eigen::Index>(k)] = gsl_vector_get(s->x, k);
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(x);
  return best;
}

}  // namespace

GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, const GpHyperparams& init,
            const FitOptions& options) {
  check_data(X, Y);
  if (X.rows() < 1) throw std::invalid_argument("fit: need at least one observation");
  if (!(options.min_lengthscale > 0.0) || !(options.min_lengthscale <= options.max_lengthscale)) {
    throw std::invalid_argument("fit: invalid lengthscale box");
  }
  const auto dim = static_cast<std::size_t>(X.cols());
  gsl_set_error_handler_off();

  Standardization stdz = make_standardization(X, Y, options.standardize);
  const Eigen::MatrixXd Xs = apply_standardization(X, stdz);
  const Eigen::VectorXd yc = (Y.array() - stdz.output_mean).matrix();
  const double n = static_cast<double>(Y.size());
  const double var_y = yc.squaredNorm() / n;
  const double out_scale = var_y > 0.0 ? var_y : 1.0;

  GpHyperparams start = init;
  if (start.lengthscales.empty()) {
    start.lengthscales.assign(dim, 1.0);
    start.signal_variance = out_scale;
    start.noise_variance = 1e-2 * out_scale;
  }
  start.validate(dim);

  const auto p = static_cast<Eigen::Index>(dim + 2);
  Objective obj{&Xs, &yc, dim, Eigen::VectorXd(p), Eigen::VectorXd(p)};
  for (std::size_t j = 0; j < dim; ++j) {
    obj.lo[static_cast<Eigen::Index>(j)] = std::log(options.min_lengthscale);
    obj.hi[static_cast<Eigen::Index>(j)] = std::log(options.max_lengthscale);
  }
  obj.lo[p - 2] = std::log(1e-6 * out_scale);
  obj.hi[p - 2] = std::log(1e3 * out_scale);
  obj.lo[p - 1] = std::log(1e-8 * out_scale);
  obj.hi[p - 1] = std::log(10.0 * out_scale);

  Eigen::VectorXd theta0(p);
  for (std::size_t j = 0; j < dim; ++j) theta0[static_cast<Eigen::Index>(j)] = std::log(start.lengthscales[j]);
  theta0[p - 2] = std::log(start.signal_variance);
  theta0[p - 1] = std::log(start.noise_variance);
  theta0 = theta0.cwiseMax(obj.lo).cwiseMin(obj.hi);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> perturb(-2.0, 2.0);

  double best_lml = -std::numeric_limits<double>::infinity();
  GpHyperparams best_hyp = from_log(theta0, dim);
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    Eigen::VectorXd start_theta = theta0;
    if (r > 0) {
      for (Eigen::Index k = 0; k < p; ++k) start_theta[k] += perturb(rng);
      start_theta = start_theta.cwiseMax(obj.lo).cwiseMin(obj.hi);
    }
    Eigen::VectorXd theta = minimize(obj, start_theta, options.max_iterations);
    if (!theta.allFinite()) continue;
    theta = theta.cwiseMax(obj.lo).cwiseMin(obj.hi);
    const GpHyperparams hyp = from_log(theta, dim);
    double lml = -std::numeric_limits<double>::infinity();
    try {
      lml = log_marginal_likelihood_with_gradient(Xs, yc, hyp).value;
    } catch (const NumericalError&) {
      continue;
    }
    if (std::isfinite(lml) && lml > best_lml) {
      best_lml = lml;
      best_hyp = hyp;
    }
  }
  return GpModel::from_parts(X, Y, best_hyp, std::move(stdz));
}

// ---------------------------------------------------------------------------
// MultiOutputGp

MultiOutputGp::MultiOutputGp(std::vector<GpModel> outputs) : outputs_(std::move(outputs)) {
  for (const auto& m : outputs_) {
    if (m.dim() != outputs_.front().dim()) {
      throw std::invalid_argument("MultiOutputGp: input dimensions differ");
    }
  }
}

bool MultiOutputGp::trained() const noexcept {
  return !outputs_.empty() &&
         std::all_of(outputs_.begin(), outputs_.end(), [](const GpModel& m) { return m.trained(); });
}

std::size_t MultiOutputGp::dim() const { return outputs_.empty() ? 0 : outputs_.front().dim(); }

std::vector<GpPrediction> MultiOutputGp::predict(std::span<const double> x) const {
  if (!trained()) throw std::logic_error("MultiOutputGp: model is not trained");
  std::vector<GpPrediction> out;
  out.reserve(outputs_.size());
  for (const auto& m : outputs_) out.push_back(m.predict(x));
  return out;
}

MultiOutputGp fit_multi(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                        const GpHyperparams& init, const FitOptions& options) {
  if (X.rows() != Y.rows()) throw std::invalid_argument("fit_multi: row count mismatch");
  std::vector<GpModel> models;
  models.reserve(static_cast<std::size_t>(Y.cols()));
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    FitOptions o = options;
    o.seed = options.seed + static_cast<std::uint64_t>(j);
    models.push_back(fit(X, Y.col(j), init, o));
  }
  return MultiOutputGp(std::move(models));
}

}  // namespace csam
