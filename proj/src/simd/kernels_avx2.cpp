// Compiled with -mavx2; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>

#include "doppler/simd/kernels.hpp"

namespace doppler::simd {

namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

InfoSums accumulate_avx2(const double* noise_var, const double* meas, const double* nbr_var,
                         const double* nbr_mean, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d prec = _mm256_setzero_pd();
  __m256d weighted = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d denom = _mm256_add_pd(_mm256_loadu_pd(noise_var + k), _mm256_loadu_pd(nbr_var + k));
    const __m256d w = _mm256_div_pd(one, denom);
    const __m256d eta = _mm256_sub_pd(_mm256_loadu_pd(meas + k), _mm256_loadu_pd(nbr_mean + k));
    prec = _mm256_add_pd(prec, w);
    weighted = _mm256_add_pd(weighted, _mm256_mul_pd(w, eta));
  }
  InfoSums out{hsum(prec), hsum(weighted)};
  for (; k < n; ++k) {
    const double w = 1.0 / (noise_var[k] + nbr_var[k]);
    out.precision += w;
    out.weighted += w * (meas[k] - nbr_mean[k]);
  }
  return out;
}

double inverse_sum_gather_avx2(const double* noise_var, const std::int32_t* nbr,
                               const double* var_by_node, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(nbr + k));
    const __m256d var = _mm256_i32gather_pd(var_by_node, idx, 8);
    const __m256d denom = _mm256_add_pd(_mm256_loadu_pd(noise_var + k), var);
    acc = _mm256_add_pd(acc, _mm256_div_pd(one, denom));
  }
  double sum = hsum(acc);
  for (; k < n; ++k) sum += 1.0 / (noise_var[k] + var_by_node[nbr[k]]);
  return sum;
}

void matvec_avx2(const double* a, const double* x, double* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 8 <= cols; j += 8) {
      acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j)));
      acc1 = _mm256_add_pd(acc1,
                           _mm256_mul_pd(_mm256_loadu_pd(row + j + 4), _mm256_loadu_pd(x + j + 4)));
    }
    for (; j + 4 <= cols; j += 4) {
      acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j)));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

double max_abs_diff_avx2(const double* a, const double* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  __m256d nan_seen = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d d = _mm256_andnot_pd(sign, _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k)));
    nan_seen = _mm256_or_pd(nan_seen, _mm256_cmp_pd(d, d, _CMP_UNORD_Q));
    m = _mm256_max_pd(m, d);
  }
  if (_mm256_movemask_pd(nan_seen) != 0) return std::nan("");
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double out = lanes[0];
  for (int i = 1; i < 4; ++i) out = lanes[i] > out ? lanes[i] : out;
  for (; k < n; ++k) {
    const double d = std::abs(a[k] - b[k]);
    if (std::isnan(d)) return d;
    if (d > out) out = d;
  }
  return out;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", accumulate_avx2, inverse_sum_gather_avx2, matvec_avx2,
                                 max_abs_diff_avx2};
  return table;
}

}  // namespace doppler::simd
