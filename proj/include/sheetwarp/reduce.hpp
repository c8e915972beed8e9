#pragma once

#include <cstddef>
#include <span>

namespace sheetwarp {

/// Pairwise (tree) summation with a fixed split order, so the result is
/// identical no matter how the inputs were produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace sheetwarp
