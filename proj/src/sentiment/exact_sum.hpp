#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace sentimill::sentiment::detail {

// Shewchuk-style exact accumulation: keeps a list of non-overlapping
// partial sums, so the sign of the result is the sign of the exact sum.
inline double exact_sum(std::span<const double> values) {
  std::vector<double> partials;
  for (double x : values) {
    std::size_t i = 0;
    for (std::size_t j = 0; j < partials.size(); ++j) {
      double y = partials[j];
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  double total = 0.0;
  for (auto it = partials.rbegin(); it != partials.rend(); ++it) total += *it;
  return total;
}

}  // namespace sentimill::sentiment::detail
