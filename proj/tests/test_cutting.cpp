#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csam/cutting.hpp"
#include "test_util.hpp"

using namespace csam;

namespace {

PointCloud unit_cube() {
  PointCloud c;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) c.push_back(Point(x, y, z));
  return c;
}

// Rotation-matrix oracle for the plane normal: R_y(pitch) * R_x(roll) * e_z.
Point oracle_normal(double roll, double pitch) {
  Eigen::Matrix3d rx, ry;
  rx << 1, 0, 0, 0, std::cos(roll), -std::sin(roll), 0, std::sin(roll), std::cos(roll);
  ry << std::cos(pitch), 0, std::sin(pitch), 0, 1, 0, -std::sin(pitch), 0, std::cos(pitch);
  return ry * rx * Point::UnitZ();
}

std::vector<Point> sorted(const PointCloud& c) {
  std::vector<Point> v(c.begin(), c.end());
  std::sort(v.begin(), v.end(), [](const Point& a, const Point& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  return v;
}

}  // namespace

TEST_CASE("plane_from_action") {
  const Plane flat = plane_from_action({0, 0, 0.5});
  CHECK(flat.normal == Point(0, 0, 1));
  CHECK(flat.offset == 0.5);

  const Plane origin = plane_from_action({0, 0, 0});
  CHECK(origin.normal == Point(0, 0, 1));
  CHECK(origin.offset == 0.0);

  const double r = std::numbers::pi / 6;
  const Plane tilted = plane_from_action({r, 0, 0.2});
  CHECK((tilted.normal - Point(0, -std::sin(r), std::cos(r))).norm() <= 1e-15);
  CHECK(tilted.signed_distance(Point(0, 0, 0.2)) == doctest::Approx(0.0).epsilon(1e-15));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(-1.0, 1.0), z(-5.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    const CuttingSurface a{ang(rng), ang(rng), z(rng)};
    const Plane p = plane_from_action(a);
    CHECK(std::abs(p.normal.norm() - 1.0) <= 1e-12);
    CHECK((p.normal - oracle_normal(a.roll, a.pitch)).norm() <= 1e-12);
    CHECK(std::abs(p.signed_distance(Point(0, 0, a.z))) <= 1e-12);
  }
}

TEST_CASE("split examples") {
  const PointCloud cube = unit_cube();
  const auto s = split(cube, CuttingSurface{0, 0, 0.5});
  REQUIRE(s.kept.size() == 4);
  REQUIRE(s.removed.size() == 4);
  for (const auto& p : s.kept) CHECK(p.z() == 0.0);
  for (const auto& p : s.removed) CHECK(p.z() == 1.0);

  const auto none = split(cube, CuttingSurface{0, 0, 5.0});
  CHECK(none.removed.empty());
  CHECK(none.kept == cube);

  // Points exactly on the plane stay.
  const auto on = split(cube, CuttingSurface{0, 0, 1.0});
  CHECK(on.kept == cube);

  const auto again = split(s.kept, CuttingSurface{0, 0, 0.5});
  CHECK(again.kept == s.kept);
  CHECK(again.removed.empty());
}

TEST_CASE("split is a partition matching signed-distance classification") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(-0.35, 0.35), z(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const PointCloud c = test::random_cloud(rng, 100);
    const CuttingSurface a{ang(rng), ang(rng), z(rng)};
    const auto s = split(c, a);
    CHECK(s.kept.size() + s.removed.size() == c.size());
    const Point n = oracle_normal(a.roll, a.pitch);
    PointCloud kept, removed;
    for (const auto& p : c) (n.dot(p - Point(0, 0, a.z)) > 0.0 ? removed : kept).push_back(p);
    CHECK(s.kept.size() == kept.size());
    std::vector<Point> merged(s.kept.begin(), s.kept.end());
    merged.insert(merged.end(), s.removed.begin(), s.removed.end());
    CHECK(sorted(PointCloud(merged)) == sorted(c));
  }
}

TEST_CASE("deeper cuts remove more") {
  std::mt19937_64 rng(4);
  const PointCloud c = test::random_cloud(rng, 400);
  std::size_t prev_count = 0;
  double prev_total = 0.0;
  for (double z = 1.2; z >= -1.2; z -= 0.01) {
    const CuttingSurface a{0, 0, z};
    const auto s = split(c, a);
    CHECK(s.removed.size() >= prev_count);
    // Summed distance grows exactly; the mean can dip when a new point joins
    // right at the plane (see the layered case below).
    const double total = removal_volume(s.removed, plane_from_action(a)) * static_cast<double>(s.removed.size());
    CHECK(total >= prev_total - 1e-9);
    prev_count = s.removed.size();
    prev_total = total;
  }
}

TEST_CASE("V_geom grows with depth above the point spacing") {
  // Dense jittered grid: the mean distance is monotone once the step is
  // coarser than the layer spacing.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> j(-0.5, 0.5);
  PointCloud c;
  for (int x = 0; x < 20; ++x)
    for (int y = 0; y < 20; ++y)
      for (int z = 0; z < 40; ++z) c.push_back(Point(x + j(rng), y + j(rng), z + j(rng)));
  double prev = 0.0;
  for (double z = 40.0; z >= 0.0; z -= 2.0) {
    const CuttingSurface a{0, 0, z};
    const double v = removal_volume(split(c, a).removed, plane_from_action(a));
    CHECK(v >= prev);
    prev = v;
  }

  // Two layers one unit apart: crossing the lower layer lowers the mean.
  PointCloud layers;
  for (int x = 0; x < 3; ++x) {
    layers.push_back(Point(x, 0, 0));
    layers.push_back(Point(x, 0, 1));
  }
  const auto v_at = [&](double z) {
    return removal_volume(split(layers, CuttingSurface{0, 0, z}).removed, plane_from_action({0, 0, z}));
  };
  CHECK(v_at(0.01) == doctest::Approx(0.99));
  CHECK(v_at(-0.01) == doctest::Approx(0.51));
}

TEST_CASE("removal volume") {
  const Plane p = plane_from_action({0, 0, 0});
  CHECK(removal_volume(PointCloud{}, p) == 0.0);
  CHECK(removal_volume(PointCloud(std::vector<Point>{{0, 0, 0.3}}), p) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(removal_volume(PointCloud(std::vector<Point>{{0, 0, 0.2}, {5, 1, 0.4}}), p) ==
        doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("feature extraction") {
  const auto sim = extract_features(PointCloud{}, {0.1, 0.2, 0.3}, FeatureMode::kSim);
  CHECK(sim.values == std::vector<double>{0.0, 0.1});

  const auto empty_full = extract_features(PointCloud{}, {0.1, 0.2, 0.3}, FeatureMode::kFull);
  CHECK(empty_full.values == std::vector<double>{0.0, 0.0, 0.0, 0.0, 0.1, 0.2});

  const CuttingSurface half{0, 0, 0.5};
  const auto removed = split(unit_cube(), half).removed;
  const auto full = extract_features(removed, half, FeatureMode::kFull);
  REQUIRE(full.values.size() == 6);
  const std::vector<double> expected{0.5, 1, 1, 0, 0, 0};
  for (std::size_t i = 0; i < 6; ++i) CHECK(full.values[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  CHECK(feature_dim(FeatureMode::kSim) == 2);
  CHECK(feature_dim(FeatureMode::kFull) == 6);
  CHECK(extract_features(removed, half, FeatureMode::kSim).values.size() == 2);
  CHECK(parse_feature_mode("full") == FeatureMode::kFull);
  CHECK(parse_feature_mode(to_string(FeatureMode::kSim)) == FeatureMode::kSim);
  CHECK_THROWS_AS((void)parse_feature_mode("bogus"), std::invalid_argument);
}

TEST_CASE("apply_deviation") {
  const ActionBounds b{0.35, 0.35, 0.0, 1.0};
  const CuttingSurface a{0.1, -0.2, 0.2};
  CHECK(apply_deviation(a, 0.0, b) == a);
  const auto shifted = apply_deviation(a, 0.05, b);
  CHECK(shifted.z == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(shifted.roll == a.roll);
  CHECK(shifted.pitch == a.pitch);
  CHECK(apply_deviation(a, 1e6, b).z == b.z_max);
  CHECK(apply_deviation(a, -1e6, b).z == b.z_min);
}

TEST_CASE("action bounds") {
  const ActionBounds b;
  CHECK(b.contains({0, 0, 20}));
  CHECK_FALSE(b.contains({0.5, 0, 20}));
  const auto c = b.clamp({1, -1, 100});
  CHECK(c == CuttingSurface{b.roll_max, -b.pitch_max, b.z_max});
  CHECK_THROWS_AS((ActionBounds{0.1, 0.1, 5, 1}.validate()), std::invalid_argument);
}
