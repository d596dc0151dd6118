#include "dml/reduce.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dml::reduce {

void pairwise_rows(double* data, std::size_t n, std::size_t width, bool parallel) {
  if (n == 0) return;
  for (std::size_t step = 1; step < n; step *= 2) {
    const std::size_t stride = 2 * step;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel && n / stride > 1 && width >= 64)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); i += static_cast<std::ptrdiff_t>(stride)) {
      const std::size_t j = static_cast<std::size_t>(i) + step;
      if (j < n) {
        double* dst = data + static_cast<std::size_t>(i) * width;
        const double* src = data + j * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    }
  }
  (void)parallel;
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  std::vector<double> buf(xs.begin(), xs.end());
  pairwise_rows(buf.data(), buf.size(), 1, false);
  return buf[0];
}

MeanVar mean_var(std::span<const double> xs) {
  MeanVar mv;
  if (xs.empty()) return mv;
  const double n = static_cast<double>(xs.size());
  mv.mean = pairwise_sum(xs) / n;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - mv.mean;
    sq[i] = d * d;
  }
  mv.var = pairwise_sum(sq) / n;
  return mv;
}

}  // namespace dml::reduce
