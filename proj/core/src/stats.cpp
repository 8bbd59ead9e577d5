#include "cellscope/stats.hpp"

#include <algorithm>
#include <cmath>

#include "cellscope/error.hpp"

namespace cellscope {

Interval wilson_interval(std::size_t k, std::size_t n, double z) {
  if (k > n) throw InputError("wilson_interval: k > n");
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace cellscope
