#pragma once
#include <algorithm>
#include <cstddef>
#include <vector>

namespace geoshape {

// Sum after sorting by value.  Summation order then depends only on the
// multiset of summands, so totals accumulated across a collection are
// bit-identical under any permutation of that collection.
inline double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

// Per-slot sorted sum over a stack of equally-sized buffers; used when a
// pixelwise accumulation over images must be permutation-invariant.
inline void sorted_sum_stack(const std::vector<const double*>& bufs, std::size_t n, double* out) {
  std::vector<double> col(bufs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < bufs.size(); ++b) col[b] = bufs[b][i];
    std::sort(col.begin(), col.end());
    double acc = 0.0;
    for (double v : col) acc += v;
    out[i] = acc;
  }
}

}  // namespace geoshape
