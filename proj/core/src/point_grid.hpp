#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cellscope/geometry.hpp"

namespace cellscope::detail {

// Uniform bucket grid for fixed-radius neighbour queries. Entries are sorted
// by (column, row), so the three rows of a query column form one range.
class PointGrid {
 public:
  PointGrid(std::span<const ViaPoint> points, double cell);

  // Calls fn(index) for every stored point with distance < radius from q.
  // radius must not exceed the cell size.
  template <typename Fn>
  void for_each_within(ViaPoint q, double radius, Fn&& fn) const {
    const double r2 = radius * radius;
    const std::int64_t cx = coord(q.x);
    const std::int64_t cy = coord(q.y);
    for (std::int64_t gx = cx - 1; gx <= cx + 1; ++gx) {
      auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{gx, cy - 1, 0});
      for (; it != entries_.end() && it->gx == gx && it->gy <= cy + 1; ++it) {
        if (distance2(points_[it->index], q) < r2) fn(it->index);
      }
    }
  }

  std::size_t count_within(ViaPoint q, double radius) const;

 private:
  struct Entry {
    std::int64_t gx;
    std::int64_t gy;
    std::size_t index;
    friend auto operator<=>(const Entry&, const Entry&) = default;
  };

  std::int64_t coord(double v) const;

  std::span<const ViaPoint> points_;
  double cell_;
  std::vector<Entry> entries_;
};

}  // namespace cellscope::detail
