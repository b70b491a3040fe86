#include "point_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace confdyn::detail {

PointIndex::PointIndex(const CoordinateSpec& spec, const std::vector<State>& points, double cell)
    : spec_(spec), points_(points) {
  // an integer number of cells per period keeps the wrap exact
  per_unit_ = std::max(1L, static_cast<long>(std::floor(1.0 / cell)));
  cell_ = 1.0 / static_cast<double>(per_unit_);
  for (std::size_t i = 0; i < points.size(); ++i) buckets_[key(cell_of(points[i]))].push_back(i);
}

std::vector<long> PointIndex::cell_of(const State& x) const {
  std::vector<long> c(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    long v = static_cast<long>(std::floor(x[i] / cell_));
    if (spec_.is_angle(static_cast<int>(i))) v = ((v % per_unit_) + per_unit_) % per_unit_;
    c[static_cast<std::size_t>(i)] = v;
  }
  return c;
}

long long PointIndex::key(const std::vector<long>& c) const {
  long long h = 1469598103934665603LL;
  for (long v : c) h = (h ^ static_cast<long long>(v)) * 1099511628211LL;
  return h;
}

double PointIndex::dist2(const State& x, const State& y) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double d = y[i] - x[i];
    if (spec_.is_angle(static_cast<int>(i))) d -= std::floor(d + 0.5);
    s += d * d;
  }
  return s;
}

double PointIndex::nearest(const State& x) const {
  if (points_.empty()) return std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(x.size());
  const std::vector<long> c0 = cell_of(spec_.normalize(x));
  double best2 = std::numeric_limits<double>::infinity();
  std::vector<long> c(static_cast<std::size_t>(n));
  // cubes of Chebyshev radius 1, 2, 4, ... until the hit is provably nearest
  for (long radius = 1;; radius *= 2) {
    const long side = 2 * radius + 1;
    double cells = 1.0;
    for (int i = 0; i < n; ++i) cells *= static_cast<double>(side);
    if (cells > static_cast<double>(points_.size())) break;
    const long total = static_cast<long>(cells);
    for (long k = 0; k < total; ++k) {
      long idx = k;
      for (int i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        c[u] = c0[u] + idx % side - radius;
        idx /= side;
        if (spec_.is_angle(i)) c[u] = ((c[u] % per_unit_) + per_unit_) % per_unit_;
      }
      auto it = buckets_.find(key(c));
      if (it == buckets_.end()) continue;
      for (std::size_t j : it->second) best2 = std::min(best2, dist2(x, points_[j]));
    }
    // anything outside the cube is at least radius * cell away
    if (std::sqrt(best2) <= static_cast<double>(radius) * cell_) return std::sqrt(best2);
  }
  for (const auto& p : points_) best2 = std::min(best2, dist2(x, p));
  return std::sqrt(best2);
}

}  // namespace confdyn::detail
