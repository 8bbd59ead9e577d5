#pragma once

#include <cstddef>

namespace cellscope {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for k successes out of n at the given normal
/// quantile (1.96 ~ 95%). n = 0 gives [0, 1].
Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

}  // namespace cellscope
