#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "omnisynth/geometry/types.hpp"

namespace omnisynth::geometry {

/// One candidate camera position of the reprojection grid.
struct GridPosition {
  CameraPose pose;
  int axis = 0;                       // 0 = X line, 1 = Y line
  std::vector<std::size_t> neighbors; // adjacent positions on the same line
};

/// Equally spaced candidate positions: `count_per_axis` on [x_min/2, x_max/2]
/// along X followed by `count_per_axis` on [y_min/2, y_max/2] along Y, all at
/// Z = 0. The two lines are not connected to each other.
inline std::vector<GridPosition> reprojection_grid(const DepthBounds& bounds, int count_per_axis) {
  bounds.validate();
  OMNISYNTH_REQUIRE(count_per_axis >= 2, "reprojection grid needs at least two positions per axis");
  const std::size_t n = static_cast<std::size_t>(count_per_axis);
  std::vector<GridPosition> grid;
  grid.reserve(2 * n);
  const std::array<std::pair<double, double>, 2> ranges{
      {{bounds.x_min / 2, bounds.x_max / 2}, {bounds.y_min / 2, bounds.y_max / 2}}};
  for (int axis = 0; axis < 2; ++axis) {
    const auto [lo, hi] = ranges[axis];
    const double step = (hi - lo) / static_cast<double>(n - 1);
    const std::size_t base = axis * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = k + 1 == n ? hi : lo + step * static_cast<double>(k);
      GridPosition g;
      g.pose = axis == 0 ? CameraPose(s, 0.0, 0.0) : CameraPose(0.0, s, 0.0);
      g.axis = axis;
      if (k > 0) g.neighbors.push_back(base + k - 1);
      if (k + 1 < n) g.neighbors.push_back(base + k + 1);
      grid.push_back(std::move(g));
    }
  }
  return grid;
}

/// The four likelihood evaluation positions at a quarter of the depth extent.
inline std::array<CameraPose, 4> evaluation_points(const DepthBounds& bounds) {
  bounds.validate();
  return {CameraPose(bounds.x_min / 4, bounds.y_min / 4, 0.0), CameraPose(bounds.x_min / 4, bounds.y_max / 4, 0.0),
          CameraPose(bounds.x_max / 4, bounds.y_min / 4, 0.0), CameraPose(bounds.x_max / 4, bounds.y_max / 4, 0.0)};
}

}  // namespace omnisynth::geometry
