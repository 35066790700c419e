#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "csam/planner.hpp"
#include "csam/rollout_evaluator.hpp"
#include "test_util.hpp"

using namespace csam;

namespace {

// Deviation proportional to V with a variance that depends on the cut
// height, so variance can reorder candidates when alpha > 0.
class StubModel final : public DeviationModel {
 public:
  StubModel(double gain, double var_scale) : gain_(gain), var_scale_(var_scale) {}
  DeviationEstimate predict(const RemovalFeatures& f, const CuttingSurface& a) const override {
    return {gain_ * f.removal_volume(), var_scale_ * (1.0 + std::sin(a.z) + a.roll * a.roll)};
  }

 private:
  double gain_, var_scale_;
};

ObjectSpec small_object() {
  ObjectSpec spec;
  spec.density = 0.02;
  return spec;
}

PlannerConfig small_planner(std::size_t n, std::uint64_t seed) {
  PlannerConfig cfg;
  cfg.n_samples = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("predict_transition") {
  const auto o = make_object(small_object(), 1);
  const ActionBounds b;

  SUBCASE("no model is the geometric split") {
    const CuttingSurface a{0.1, 0.2, 30};
    const auto p = predict_transition(o.initial, a, nullptr, FeatureMode::kSim, b);
    CHECK(p.next == split(o.initial, a).kept);
    CHECK(p.deviation == 0.0);
    CHECK(p.variance == 0.0);
  }
  SUBCASE("no-cut action") {
    const StubModel m(0.5, 1.0);
    const CuttingSurface a{0, 0, 44};
    const auto p = predict_transition(o.initial, a, &m, FeatureMode::kFull, b);
    CHECK(p.next == o.initial);
    CHECK(p.variance == 0.0);
    CHECK(p.features.values == std::vector<double>{0, 0, 0, 0, 0, 0});
    const auto again = predict_transition(p.next, a, nullptr, FeatureMode::kSim, b);
    CHECK(again.next == p.next);
  }
  SUBCASE("a matching model beats geometry") {
    EnvConfig env;
    env.object = small_object();
    const GroundTruthDeviationModel gt(env.resistance);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-0.35, 0.35), z(32.0, 35.5);
    int tested = 0;
    while (tested < 10) {
      const CuttingSurface a{ang(rng), ang(rng), z(rng)};
      EnvState st = reset(env.object, 1, 1);
      const auto real = step(st, a, env);
      if (real.interrupted || real.deviation == 0.0) continue;
      const auto with = predict_transition(o.initial, a, &gt, env.mode, env.bounds);
      const auto without = predict_transition(o.initial, a, nullptr, env.mode, env.bounds);
      CHECK(chamfer(with.next, real.next) < chamfer(without.next, real.next));
      ++tested;
    }
  }
}

TEST_CASE("eta") {
  CHECK(eta(3.0, 0.0, 7.0, 2.0) == 3.0);
  CHECK(eta(3.0, 1.0, 2.0, 2.0) == 3.0);
  CHECK(eta(3.0, 1.0, 0.5, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK_THROWS_AS((void)eta(3.0, 1.0, 1.0, 0.0), std::invalid_argument);
  for (const double beta : {0.5, 1.0, 2.0}) {
    double prev = 0.0;
    for (double e = 0.0; e < 10.0; e += 0.25) {
      const double v = eta(3.0, beta, e, 4.0);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("cost and over-cut") {
  const auto o = make_object(small_object(), 2);
  const double margin = default_overcut_margin(o.target);
  CHECK(margin > 0.0);

  const auto exact = cost(o.target, {}, 0.0, o.target, 0.0);
  CHECK(exact.total() == 0.0);
  const auto var_only = cost(o.target, {}, 0.3, o.target, 2.0);
  CHECK(var_only.total() == doctest::Approx(0.6).epsilon(1e-15));

  CHECK_FALSE(detect_overcut(o.initial, o.target, margin));
  CHECK_FALSE(detect_overcut(o.target, o.target, margin));

  // Delete the upper half of the target: its top is no longer covered.
  double zmid = 0.0;
  for (const auto& p : o.target) zmid += p.z();
  zmid /= static_cast<double>(o.target.size());
  const PointCloud lower = split(o.target, CuttingSurface{0, 0, zmid}).kept;
  CHECK(detect_overcut(lower, o.target, margin));
  // Brute-force coverage oracle agrees.
  double worst = 0.0;
  for (const auto& t : o.target) {
    double best = 1e300;
    for (const auto& p : lower) best = std::min(best, (p - t).squaredNorm());
    worst = std::max(worst, best);
  }
  CHECK(worst > margin * margin);
  CHECK(cost(lower, {}, 0.0, o.target, 0.0).total() >= 1000.0);
  CHECK(detect_overcut(PointCloud{}, o.target, margin));
}

TEST_CASE("sampling") {
  const PlannerConfig cfg = small_planner(200, 5);
  const auto a = sample_sequences(cfg);
  CHECK(a == sample_sequences(cfg));
  REQUIRE(a.size() == 200);
  for (const auto& seq : a) {
    REQUIRE(seq.size() == cfg.horizon);
    for (const auto& act : seq) CHECK(cfg.bounds.contains(act));
  }
  PlannerConfig bad = cfg;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_samples = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("plan matches the serial reference") {
  const auto o = make_object(small_object(), 3);
  const double e0 = chamfer(o.initial, o.target);
  const StubModel stub(0.6, 0.4);
  const GroundTruthDeviationModel gt{GtDeviationParams{}};
  const DeviationModel* models[] = {nullptr, &stub, &gt};
  for (const auto* model : models) {
    for (const auto mode : {FeatureMode::kSim, FeatureMode::kFull}) {
      PlannerConfig cfg = small_planner(60, 11);
      cfg.mode = mode;
      const auto fast = plan(o.initial, o.target, model, cfg, e0, e0);
      const auto slow = plan_serial(o.initial, o.target, model, cfg, e0, e0);
      REQUIRE(fast.candidate_costs.size() == slow.candidate_costs.size());
      for (std::size_t i = 0; i < fast.candidate_costs.size(); ++i) {
        const double a = fast.candidate_costs[i], b = slow.candidate_costs[i];
        if (std::isinf(b)) {
          CHECK(a == b);
        } else {
          CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)));
        }
      }
      CHECK(fast.best_index == slow.best_index);
      CHECK(fast.best_sequence == slow.best_sequence);
      CHECK(fast.best_cost == *std::min_element(fast.candidate_costs.begin(), fast.candidate_costs.end()));
      REQUIRE(fast.best_terms.size() == cfg.horizon);
    }
  }
}

TEST_CASE("plan invariants") {
  const auto o = make_object(small_object(), 4);
  const double e0 = chamfer(o.initial, o.target);

  SUBCASE("single sample") {
    const PlannerConfig cfg = small_planner(1, 8);
    const auto r = plan(o.initial, o.target, nullptr, cfg, e0, e0);
    CHECK(r.best_index == 0);
    CHECK(r.best_sequence == sample_sequences(cfg)[0]);
  }
  SUBCASE("argmin, determinism and tie-breaking") {
    const StubModel stub(0.3, 1.0);
    const PlannerConfig cfg = small_planner(300, 9);
    const auto r = plan(o.initial, o.target, &stub, cfg, e0, e0);
    const auto again = plan(o.initial, o.target, &stub, cfg, e0, e0);
    CHECK(r.candidate_costs == again.candidate_costs);
    CHECK(r.best_index == again.best_index);
    for (std::size_t i = 0; i < r.candidate_costs.size(); ++i) {
      CHECK(r.best_cost <= r.candidate_costs[i]);
      if (i < r.best_index) CHECK(r.candidate_costs[i] > r.best_cost);
    }
  }
  SUBCASE("variance is ignored when alpha is zero") {
    PlannerConfig cfg = small_planner(300, 10);
    cfg.alpha = 0.0;
    const StubModel low(0.3, 0.01), high(0.3, 50.0);
    const auto a = plan(o.initial, o.target, &low, cfg, e0, e0);
    const auto b = plan(o.initial, o.target, &high, cfg, e0, e0);
    CHECK(a.best_index == b.best_index);
    CHECK(a.candidate_costs == b.candidate_costs);
    cfg.alpha = 100.0;
    const auto c = plan(o.initial, o.target, &high, cfg, e0, e0);
    CHECK(c.candidate_costs != a.candidate_costs);
  }
  SUBCASE("downsampled costs use the reference path") {
    PlannerConfig cfg = small_planner(20, 12);
    cfg.cost_downsample = 200;
    const auto a = plan(o.initial, o.target, nullptr, cfg, e0, e0);
    const auto b = plan_serial(o.initial, o.target, nullptr, cfg, e0, e0);
    CHECK(a.candidate_costs == b.candidate_costs);
  }
}

TEST_CASE("rollout evaluator rejects empty clouds") {
  const auto o = make_object(small_object(), 4);
  CHECK_THROWS_AS(RolloutEvaluator(PointCloud{}, o.target, nullptr, {}), std::invalid_argument);
  CHECK_THROWS_AS(RolloutEvaluator(o.initial, PointCloud{}, nullptr, {}), std::invalid_argument);
}

TEST_CASE("greedy geometric planning descends in a resistance-free world") {
  EnvConfig env;
  env.object = small_object();
  env.resistance.k_sim = 0.0;
  EnvState st = reset(env.object, 6, 15);
  const double e0 = chamfer(st.current, st.target);
  const double resolution = 2.0 * std::pow(mean_nearest_neighbor_spacing(st.target), 2);
  double prev = e0;
  for (std::size_t t = 0; t < 15; ++t) {
    PlannerConfig cfg = small_planner(400, 100 + t);
    cfg.horizon = 1;
    const auto r = plan(st.current, st.target, nullptr, cfg, prev, e0);
    (void)step(st, r.best_sequence.front(), env);
    const double err = chamfer(st.current, st.target);
    if (prev > resolution) {
      CHECK(err < prev);
    } else {
      CHECK(err <= prev);
    }
    prev = err;
  }
  CHECK(prev < 0.25 * e0);
}
