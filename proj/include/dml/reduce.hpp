#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dml::reduce {

// In-place pairwise tree over the rows of a row-major [n x width] buffer;
// the sum lands in row 0. The addition tree depends only on n, never on the
// thread count, so parallel reductions stay bit-identical to serial ones.
void pairwise_rows(double* data, std::size_t n, std::size_t width, bool parallel);

// pairwise sum of a scalar sequence
double pairwise_sum(std::span<const double> xs);

// mean and population variance with a fixed reduction order
struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};
MeanVar mean_var(std::span<const double> xs);

}  // namespace dml::reduce
