#include <algorithm>
#include <cmath>

#include "doppler/simd/kernels.hpp"

namespace doppler::simd {

namespace {

InfoSums accumulate_scalar(const double* noise_var, const double* meas, const double* nbr_var,
                           const double* nbr_mean, std::size_t n) {
  InfoSums out;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 1.0 / (noise_var[k] + nbr_var[k]);
    out.precision += w;
    out.weighted += w * (meas[k] - nbr_mean[k]);
  }
  return out;
}

double inverse_sum_gather_scalar(const double* noise_var, const std::int32_t* nbr,
                                 const double* var_by_node, std::size_t n) {
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += 1.0 / (noise_var[k] + var_by_node[nbr[k]]);
  return sum;
}

void matvec_scalar(const double* a, const double* x, double* y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

double max_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = std::abs(a[k] - b[k]);
    // NaN must propagate so divergence is never mistaken for convergence.
    if (d > m || std::isnan(d)) m = d;
    if (std::isnan(m)) return m;
  }
  return m;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", accumulate_scalar, inverse_sum_gather_scalar,
                                 matvec_scalar, max_abs_diff_scalar};
  return table;
}

}  // namespace doppler::simd
