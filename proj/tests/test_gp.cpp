#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "csam/gp.hpp"
#include "csam/gp_io.hpp"
#include "test_util.hpp"

using namespace csam;

namespace {

Eigen::MatrixXd random_inputs(std::mt19937_64& rng, int n, int d, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = u(rng);
  return X;
}

GpHyperparams random_hyp(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> l(0.3, 3.0), sv(0.2, 4.0), nv(1e-3, 0.5);
  GpHyperparams h;
  for (int j = 0; j < d; ++j) h.lengthscales.push_back(l(rng));
  h.signal_variance = sv(rng);
  h.noise_variance = nv(rng);
  return h;
}

double k_oracle(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, const GpHyperparams& h) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double t = (a(j) - b(j)) / h.lengthscales[static_cast<std::size_t>(j)];
    s += t * t;
  }
  return h.signal_variance * std::exp(-0.5 * s);
}

// Dense LU solve of the textbook posterior formulas.
std::pair<double, double> predict_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                         const GpHyperparams& h, const Eigen::RowVectorXd& x) {
  const auto n = X.rows();
  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = k_oracle(X.row(i), X.row(j), h);
    K(i, i) += h.noise_variance;
    ks(i) = k_oracle(X.row(i), x, h);
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  const double mean = ks.dot(lu.solve(Y));
  const double var = h.signal_variance - ks.dot(lu.solve(ks));
  return {mean, var};
}

std::vector<double> row(const Eigen::MatrixXd& X, Eigen::Index i) {
  std::vector<double> v(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) v[static_cast<std::size_t>(j)] = X(i, j);
  return v;
}

}  // namespace

TEST_CASE("kernel") {
  const GpHyperparams h{{1.0, 1.0}, 2.0, 0.1};
  const std::vector<double> a{0, 0}, b{1, 0}, far{1e3, 0};
  CHECK(kernel(a, a, h) == 2.0);
  CHECK(kernel(a, b, h) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(kernel(a, far, h) == doctest::Approx(0.0));
  double prev = kernel(a, a, h);
  for (double dx = 0.1; dx < 5.0; dx += 0.1) {
    const std::vector<double> c{0.0, dx};
    const double k = kernel(a, c, h);
    CHECK(k < prev);
    prev = k;
  }
  const std::vector<double> three{0, 0, 0};
  CHECK_THROWS_AS((void)kernel(a, three, h), std::invalid_argument);
}

TEST_CASE("gram matrices are PSD and serial equals parallel") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = random_inputs(rng, 100, 3);
    const GpHyperparams h = random_hyp(rng, 3);
    const Eigen::MatrixXd K = gram_matrix(X, h);
    CHECK(K == gram_matrix_serial(X, h));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("hyperparameter validation") {
  CHECK_NOTHROW(GpHyperparams({1.0}, 1.0, 0.1).validate(1));
  CHECK_THROWS_AS(GpHyperparams({1.0}, 1.0, 0.1).validate(2), std::invalid_argument);
  CHECK_THROWS_AS(GpHyperparams({-1.0}, 1.0, 0.1).validate(1), std::invalid_argument);
  CHECK_THROWS_AS(GpHyperparams({1.0}, 0.0, 0.1).validate(1), std::invalid_argument);
  CHECK_THROWS_AS(GpHyperparams({1.0}, 1.0, std::nan("")).validate(1), std::invalid_argument);
}

TEST_CASE("prediction matches a dense solve") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> n_dist(1, 50), d_dist(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = n_dist(rng), d = d_dist(rng);
    const Eigen::MatrixXd X = random_inputs(rng, n, d);
    const Eigen::VectorXd Y = random_inputs(rng, n, 1, 3.0).col(0);
    const GpHyperparams h = random_hyp(rng, d);
    const GpModel m = GpModel::condition(X, Y, h);
    for (int q = 0; q < 5; ++q) {
      const Eigen::MatrixXd xq = random_inputs(rng, 1, d, 3.0);
      const auto [mean, var] = predict_oracle(X, Y, h, xq.row(0));
      const auto p = m.predict(row(xq, 0));
      CHECK(std::abs(p.mean - mean) <= 1e-8);
      CHECK(std::abs(p.raw_variance - var) <= 1e-8);
      CHECK(p.variance >= 0.0);
      CHECK(p.raw_variance >= -1e-9);
    }
  }
}

TEST_CASE("two-point closed form") {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  Eigen::VectorXd Y(2);
  Y << 1.0, -1.0;
  const GpHyperparams h{{1.0}, 1.0, 0.1};
  const double k01 = std::exp(-0.5);
  // Inverse of [[1.1, k],[k, 1.1]] written out by hand.
  const double det = 1.1 * 1.1 - k01 * k01;
  const Eigen::Matrix2d inv = (Eigen::Matrix2d() << 1.1, -k01, -k01, 1.1).finished() / det;
  const double x = 0.3;
  const Eigen::Vector2d ks(std::exp(-0.5 * x * x), std::exp(-0.5 * (x - 1) * (x - 1)));
  const auto p = GpModel::condition(X, Y, h).predict(std::vector<double>{x});
  CHECK(p.mean == doctest::Approx(ks.dot(inv * Y)).epsilon(1e-12));
  CHECK(p.variance == doctest::Approx(1.0 - ks.dot(inv * ks)).epsilon(1e-12));
}

TEST_CASE("prior and untrained models") {
  const GpModel prior = GpModel::prior({{1.0, 2.0}, 3.5, 0.1}, 2);
  const auto p = prior.predict(std::vector<double>{0.4, -1.0});
  CHECK(p.mean == 0.0);
  CHECK(p.variance == 3.5);
  CHECK_THROWS_AS((void)GpModel{}.predict(std::vector<double>{0.0}), std::logic_error);
  CHECK_THROWS_AS((void)prior.predict(std::vector<double>{0.0}), std::invalid_argument);
}

TEST_CASE("posterior contraction and noise-free interpolation") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd X(8, 2);
  for (int i = 0; i < 8; ++i) X.row(i) << i * 1.5, (i % 3) * 2.0;
  const Eigen::VectorXd Y = random_inputs(rng, 8, 1).col(0);

  const GpModel small = GpModel::condition(X, Y, {{1.0, 1.0}, 1.0, 1e-4});
  for (int i = 0; i < 8; ++i) CHECK(small.predict(row(X, i)).variance <= 1e-4 + 1e-6);

  const GpModel exact = GpModel::condition(X, Y, {{1.0, 1.0}, 1.0, 1e-9});
  for (int i = 0; i < 8; ++i) CHECK(std::abs(exact.predict(row(X, i)).mean - Y(i)) <= 1e-5);

  Eigen::MatrixXd X1(1, 2);
  X1 << 0.3, 0.7;
  Eigen::VectorXd Y1(1);
  Y1 << 2.5;
  const GpModel one = fit(X1, Y1, {});
  CHECK(one.predict(row(X1, 0)).mean == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("log marginal likelihood") {
  SUBCASE("scalar formula") {
    Eigen::MatrixXd X(1, 1);
    X << 0.2;
    Eigen::VectorXd Y(1);
    Y << 1.7;
    const GpHyperparams h{{1.0}, 0.8, 0.3};
    const double c = 0.8 + 0.3;
    const double expected = -0.5 * 1.7 * 1.7 / c - 0.5 * std::log(c) - 0.5 * std::log(2 * std::numbers::pi);
    CHECK(GpModel::condition(X, Y, h).log_marginal_likelihood() == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("more noise fits pure noise better") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::MatrixXd X = random_inputs(rng, 40, 1);
    Eigen::VectorXd Y(40);
    for (auto& y : Y) y = g(rng);
    double prev = -1e300;
    for (double nv : {1e-3, 1e-2, 0.1, 0.5}) {
      const double lml = GpModel::condition(X, Y, {{0.05}, 0.05, nv}).log_marginal_likelihood();
      CHECK(lml > prev);
      prev = lml;
    }
  }
  SUBCASE("row permutation invariance and gradient") {
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd X = random_inputs(rng, 20, 2);
    const Eigen::VectorXd Y = random_inputs(rng, 20, 1).col(0);
    const GpHyperparams h{{0.7, 1.3}, 1.2, 0.05};
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(20);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 20, rng);
    const double a = GpModel::condition(X, Y, h).log_marginal_likelihood();
    const double b = GpModel::condition(perm * X, perm * Y, h).log_marginal_likelihood();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));

    const auto v = log_marginal_likelihood_with_gradient(X, Y, h);
    CHECK(v.value == doctest::Approx(a).epsilon(1e-12));
    std::vector<double> logs{std::log(0.7), std::log(1.3), std::log(1.2), std::log(0.05)};
    for (std::size_t k = 0; k < logs.size(); ++k) {
      auto at = [&](double delta) {
        auto l = logs;
        l[k] += delta;
        GpHyperparams hh{{std::exp(l[0]), std::exp(l[1])}, std::exp(l[2]), std::exp(l[3])};
        return log_marginal_likelihood_with_gradient(X, Y, hh).value;
      };
      const double fd = (at(1e-6) - at(-1e-6)) / 2e-6;
      CHECK(v.gradient(static_cast<Eigen::Index>(k)) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("fit recovers a smooth function") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> noise(0.0, 1e-3);
  auto f = [](double x0, double x1) {
    return std::exp(-0.5 * ((x0 - 0.5) * (x0 - 0.5) / 0.64 + x1 * x1 / 4.0)) -
           0.7 * std::exp(-0.5 * ((x0 + 1.0) * (x0 + 1.0) / 0.64 + (x1 - 1.0) * (x1 - 1.0) / 4.0));
  };
  const Eigen::MatrixXd X = random_inputs(rng, 80, 2);
  Eigen::VectorXd Y(80);
  for (int i = 0; i < 80; ++i) Y(i) = f(X(i, 0), X(i, 1)) + noise(rng);

  FitOptions opt;
  opt.seed = 4;
  const GpModel m = fit(X, Y, {}, opt);

  const Eigen::MatrixXd T = random_inputs(rng, 200, 2, 1.8);
  Eigen::VectorXd truth(200);
  double sq = 0.0;
  for (int i = 0; i < 200; ++i) {
    truth(i) = f(T(i, 0), T(i, 1));
    const double e = m.predict(row(T, i)).mean - truth(i);
    sq += e * e;
  }
  const double rmse = std::sqrt(sq / 200.0);
  const double sd = std::sqrt((Y.array() - Y.mean()).square().mean());
  CHECK(rmse <= 0.05 * sd);

  const GpModel again = fit(X, Y, {}, opt);
  CHECK(again.hyperparams() == m.hyperparams());
}

TEST_CASE("fit errors and lengthscale box") {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 2;
  Eigen::VectorXd Y(3);
  Y << 0, std::nan(""), 1;
  CHECK_THROWS_AS((void)fit(X, Y, {}), std::invalid_argument);
  CHECK_THROWS_AS((void)fit(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), {}), std::invalid_argument);

  Y << 0.0, 1.0, 2.0;
  FitOptions opt;
  opt.max_lengthscale = 0.5;
  const GpModel capped = fit(X, Y, {}, opt);
  CHECK(capped.hyperparams().lengthscales[0] <= 0.5 * (1 + 1e-9));
  opt.min_lengthscale = 1.0;
  CHECK_THROWS_AS((void)fit(X, Y, {}, opt), std::invalid_argument);
}

TEST_CASE("multi-output with one output equals the single model") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd X = random_inputs(rng, 25, 2);
  const Eigen::MatrixXd Y = random_inputs(rng, 25, 1);
  FitOptions opt;
  opt.seed = 7;
  const GpModel single = fit(X, Y.col(0), {}, opt);
  const MultiOutputGp multi = fit_multi(X, Y, {}, opt);
  REQUIRE(multi.num_outputs() == 1);
  for (int q = 0; q < 20; ++q) {
    const auto x = row(random_inputs(rng, 1, 2), 0);
    const auto a = single.predict(x);
    const auto b = multi.predict(x);
    CHECK(a.mean == b[0].mean);
    CHECK(a.variance == b[0].variance);
  }
  CHECK_THROWS_AS((void)MultiOutputGp{}.predict(std::vector<double>{0, 0}), std::logic_error);
}

TEST_CASE("model persistence round trip") {
  std::mt19937_64 rng(77);
  const Eigen::MatrixXd X = random_inputs(rng, 30, 3);
  Eigen::MatrixXd Y(30, 2);
  Y.col(0) = random_inputs(rng, 30, 1).col(0);
  Y.col(1) = random_inputs(rng, 30, 1).col(0) * 10.0;
  const MultiOutputGp model = fit_multi(X, Y, {}, {});

  test::TempDir dir("gp");
  const auto path = dir.path() / "m.json";
  save_gp(model, path, {{"note", "x"}});
  const LoadedGp back = load_gp(path);
  CHECK(back.meta["note"] == "x");
  REQUIRE(back.model.num_outputs() == 2);
  for (int q = 0; q < 50; ++q) {
    const auto x = row(random_inputs(rng, 1, 3, 4.0), 0);
    const auto a = model.predict(x);
    const auto b = back.model.predict(x);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(a[j].mean - b[j].mean) <= 1e-10);
      CHECK(std::abs(a[j].variance - b[j].variance) <= 1e-10);
    }
  }

  {
    std::ofstream out(dir.path() / "bad.json");
    out << R"({"format": "csam-gp", "version": 99, "outputs": []})";
  }
  CHECK_THROWS((void)load_gp(dir.path() / "bad.json"));
  CHECK_THROWS((void)load_gp(dir.path() / "missing.json"));
}
