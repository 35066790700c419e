#include "csam/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "csam/kd_tree.hpp"

namespace csam {

namespace {

bool finite(const Point& p) { return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z()); }

void require_non_empty(const PointCloud& c, const char* what) {
  if (c.empty()) throw std::invalid_argument(std::string(what) + ": empty point cloud");
}

}  // namespace

PointCloud::PointCloud(std::vector<Point> points) : points_(std::move(points)) {
  for (const auto& p : points_) {
    if (!finite(p)) throw std::invalid_argument("PointCloud: non-finite coordinate");
  }
}

void PointCloud::push_back(const Point& p) {
  if (!finite(p)) throw std::invalid_argument("PointCloud: non-finite coordinate");
  points_.push_back(p);
}

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& what)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

double mean_nearest_sq_distance(const PointCloud& from, const PointCloud& to) {
  require_non_empty(from, "mean_nearest_sq_distance");
  require_non_empty(to, "mean_nearest_sq_distance");
  const KdTree tree(to.points());
  const auto n = static_cast<std::int64_t>(from.size());
  std::vector<double> d2(from.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) d2[i] = tree.nearest(from[i]).sq_dist;
  double sum = 0.0;
  for (double v : d2) sum += v;
  return sum / static_cast<double>(from.size());
}

double chamfer(const PointCloud& s1, const PointCloud& s2) {
  require_non_empty(s1, "chamfer");
  require_non_empty(s2, "chamfer");
  return mean_nearest_sq_distance(s1, s2) + mean_nearest_sq_distance(s2, s1);
}

double chamfer_brute_force(const PointCloud& s1, const PointCloud& s2) {
  require_non_empty(s1, "chamfer_brute_force");
  require_non_empty(s2, "chamfer_brute_force");
  const auto one_way = [](const PointCloud& a, const PointCloud& b) {
    double sum = 0.0;
    for (const auto& p : a) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : b) best = std::min(best, (p - q).squaredNorm());
      sum += best;
    }
    return sum / static_cast<double>(a.size());
  };
  return one_way(s1, s2) + one_way(s2, s1);
}

BoundingBox bounding_box(const PointCloud& c) {
  require_non_empty(c, "bounding_box");
  Point lo = c[0];
  Point hi = c[0];
  for (const auto& p : c) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Point ext = hi - lo;
  return {ext.x(), ext.y(), ext.z()};
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open point cloud file: " + path.string());
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Point p;
    std::string extra;
    if (!(fields >> p.x() >> p.y() >> p.z())) {
      throw ParseError(path.string(), lineno, "expected three numbers \"x y z\"");
    }
    if (fields >> extra) throw ParseError(path.string(), lineno, "unexpected token '" + extra + "'");
    if (!finite(p)) throw ParseError(path.string(), lineno, "non-finite coordinate");
    cloud.push_back(p);
  }
  return cloud;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write point cloud file: " + path.string());
  out << std::setprecision(17);
  for (const auto& p : cloud) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::size_t> downsample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= size) return idx;
  // Partial Fisher-Yates: the first n slots become a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

PointCloud downsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("downsample: n must be >= 1");
  if (n >= cloud.size()) return cloud;
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i : downsample_indices(cloud.size(), n, seed)) pts.push_back(cloud[i]);
  return PointCloud(std::move(pts));
}

double mean_nearest_neighbor_spacing(const PointCloud& c) {
  if (c.size() < 2) return 0.0;
  const KdTree tree(c.points());
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto nn = tree.k_nearest(c[i], 2);
    sum += std::sqrt(nn[1].sq_dist);
  }
  return sum / static_cast<double>(c.size());
}

}  // namespace csam
