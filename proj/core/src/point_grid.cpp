#include "point_grid.hpp"

#include <cmath>

#include "cellscope/error.hpp"

namespace cellscope::detail {

PointGrid::PointGrid(std::span<const ViaPoint> points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0.0)) throw InputError("PointGrid: cell size must be positive");
  entries_.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) entries_.push_back({coord(points[i].x), coord(points[i].y), i});
  std::sort(entries_.begin(), entries_.end());
}

std::size_t PointGrid::count_within(ViaPoint q, double radius) const {
  std::size_t n = 0;
  for_each_within(q, radius, [&n](std::size_t) { ++n; });
  return n;
}

std::int64_t PointGrid::coord(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_));
}

}  // namespace cellscope::detail
