#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string_view>
#include <vector>

#include "doppler/gaussian.hpp"
#include "doppler/rng.hpp"
#include "doppler/simd/kernels.hpp"

using namespace doppler;
namespace simd = doppler::simd;

namespace {

std::vector<double> draw(SplitMix64& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

bool close(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

constexpr std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 257};

}  // namespace

TEST_CASE("active table honours the override") {
  const char* env = std::getenv("DOPPLER_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") {
    CHECK(simd::active().name == simd::scalar_kernels().name);
  } else if (simd::avx2_kernels() != nullptr) {
    CHECK(simd::active().name == simd::avx2_kernels()->name);
  } else {
    CHECK(simd::active().name == simd::scalar_kernels().name);
  }
}

TEST_CASE("scalar reference values") {
  const auto& s = simd::scalar_kernels();
  const double nv[] = {1.0, 1.0, 2.0};
  const double r[] = {300.0, 400.0, 10.0};
  const double v[] = {0.0, 1.0, kInfinity};
  const double m[] = {100.0, 0.0, 5.0};
  const auto sums = s.accumulate(nv, r, v, m, 3);
  CHECK(sums.precision == 1.5);
  CHECK(sums.weighted == 200.0 + 200.0);

  const std::int32_t nbr[] = {2, 0, 1};
  const double by_node[] = {0.0, 1.0, 3.0};
  CHECK(s.inverse_sum_gather(nv, nbr, by_node, 3) == doctest::Approx(1.0 / 4.0 + 1.0 + 1.0 / 3.0));

  const double a[] = {1, 2, 3, 4, 5, 6};
  const double x[] = {1, 0, -1};
  double y[2];
  s.matvec(a, x, y, 2, 3);
  CHECK(y[0] == -2.0);
  CHECK(y[1] == -2.0);

  CHECK(s.max_abs_diff(r, m, 3) == 400.0);
  CHECK(s.max_abs_diff(r, m, 0) == 0.0);
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const auto* fast = simd::avx2_kernels();
  if (fast == nullptr) {
    MESSAGE("no AVX2 variant on this build or CPU");
    return;
  }
  const auto& ref = simd::scalar_kernels();
  SplitMix64 rng(11);

  SUBCASE("accumulate") {
    for (std::size_t n : kLengths) {
      for (int t = 0; t < 20; ++t) {
        const auto nv = draw(rng, n, 0.1, 5.0);
        const auto r = draw(rng, n, -1000.0, 1000.0);
        auto v = draw(rng, n, 0.0, 50.0);
        for (auto& x : v) {
          const double u = rng.uniform();
          if (u < 0.2) x = kInfinity;
          else if (u < 0.3) x = 0.0;
        }
        const auto m = draw(rng, n, -500.0, 500.0);
        const auto a = ref.accumulate(nv.data(), r.data(), v.data(), m.data(), n);
        const auto b = fast->accumulate(nv.data(), r.data(), v.data(), m.data(), n);
        CHECK(close(a.precision, b.precision));
        CHECK(close(a.weighted, b.weighted));
      }
    }
  }
  SUBCASE("inverse_sum_gather") {
    for (std::size_t n : kLengths) {
      const std::size_t nodes = n + 3;
      auto by_node = draw(rng, nodes, 0.0, 10.0);
      by_node[0] = 0.0;
      by_node[1] = kInfinity;
      std::vector<std::int32_t> nbr(n);
      for (auto& k : nbr) k = static_cast<std::int32_t>(rng() % nodes);
      const auto nv = draw(rng, n, 0.1, 5.0);
      CHECK(close(ref.inverse_sum_gather(nv.data(), nbr.data(), by_node.data(), n),
                  fast->inverse_sum_gather(nv.data(), nbr.data(), by_node.data(), n)));
    }
  }
  SUBCASE("matvec") {
    for (std::size_t rows : {1u, 3u, 8u, 33u}) {
      for (std::size_t cols : kLengths) {
        const auto a = draw(rng, rows * cols, -1.0, 1.0);
        const auto x = draw(rng, cols, -100.0, 100.0);
        std::vector<double> y1(rows), y2(rows);
        ref.matvec(a.data(), x.data(), y1.data(), rows, cols);
        fast->matvec(a.data(), x.data(), y2.data(), rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
          CHECK(std::abs(y1[i] - y2[i]) <= 1e-11 * (1.0 + static_cast<double>(cols)));
        }
      }
    }
  }
  SUBCASE("max_abs_diff is exact") {
    for (std::size_t n : kLengths) {
      auto a = draw(rng, n, -1e3, 1e3);
      const auto b = draw(rng, n, -1e3, 1e3);
      if (n > 2) a[n / 2] = kInfinity;
      CHECK(ref.max_abs_diff(a.data(), b.data(), n) == fast->max_abs_diff(a.data(), b.data(), n));
    }
  }
}
