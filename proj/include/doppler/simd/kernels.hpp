#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace doppler::simd {

/// Information-form sums over a set of incoming Gaussian messages.
struct InfoSums {
  double precision = 0.0;  // sum of w
  double weighted = 0.0;   // sum of w * eta
};

/// Function table for one instruction-set level. Every variant must agree
/// with the scalar reference up to summation-order rounding.
struct KernelTable {
  std::string_view name;

  /// w_k = 1 / (noise_var[k] + nbr_var[k]), eta_k = meas[k] - nbr_mean[k].
  /// An infinite nbr_var yields w_k = 0 (uninformative neighbor).
  InfoSums (*accumulate)(const double* noise_var, const double* meas, const double* nbr_var,
                         const double* nbr_mean, std::size_t n);

  /// sum_k 1 / (noise_var[k] + var_by_node[nbr[k]]).
  double (*inverse_sum_gather)(const double* noise_var, const std::int32_t* nbr,
                               const double* var_by_node, std::size_t n);

  /// y = A x, A row-major rows x cols.
  void (*matvec)(const double* a, const double* x, double* y, std::size_t rows,
                 std::size_t cols);

  /// max_k |a[k] - b[k]|; 0 for n == 0.
  double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the build has no AVX2 variant or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table chosen at first use: AVX2 when available, scalar otherwise. The
/// environment variable DOPPLER_KERNELS=scalar forces the reference path.
const KernelTable& active();

// Span conveniences over the active table.

inline InfoSums accumulate(std::span<const double> noise_var, std::span<const double> meas,
                           std::span<const double> nbr_var, std::span<const double> nbr_mean) {
  return active().accumulate(noise_var.data(), meas.data(), nbr_var.data(), nbr_mean.data(),
                             noise_var.size());
}

inline double inverse_sum_gather(std::span<const double> noise_var,
                                 std::span<const std::int32_t> nbr,
                                 std::span<const double> var_by_node) {
  return active().inverse_sum_gather(noise_var.data(), nbr.data(), var_by_node.data(),
                                     noise_var.size());
}

inline void matvec(std::span<const double> a, std::span<const double> x, std::span<double> y) {
  active().matvec(a.data(), x.data(), y.data(), y.size(), x.size());
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return active().max_abs_diff(a.data(), b.data(), a.size());
}

}  // namespace doppler::simd
