#pragma once

#include "confdyn/geometry.hpp"

#include <unordered_map>
#include <vector>

namespace confdyn::detail {

/// Uniform hash grid for nearest-point queries in the torus metric. Cells on
/// Angle axes wrap; queries scan growing cubes of cells and fall back to a
/// full scan once the cube would hold more cells than there are points.
class PointIndex {
 public:
  PointIndex(const CoordinateSpec& spec, const std::vector<State>& points, double cell);

  double nearest(const State& x) const;

 private:
  long long key(const std::vector<long>& c) const;
  std::vector<long> cell_of(const State& x) const;
  double dist2(const State& x, const State& y) const;

  CoordinateSpec spec_;
  const std::vector<State>& points_;
  double cell_;
  long per_unit_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

}  // namespace confdyn::detail
