#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace doppler {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Edge message in information form. Precision 0 is the uninformative
/// message, in which case weighted_mean is 0 too.
struct GaussianMessage {
  double precision = 0.0;
  double weighted_mean = 0.0;  // precision * eta
  std::uint64_t stamp = 0;     // iteration at which it was computed

  double mean() const { return precision > 0.0 ? weighted_mean / precision : 0.0; }
  double variance() const { return precision > 0.0 ? 1.0 / precision : kInfinity; }
  bool informative() const { return precision > 0.0; }

  static GaussianMessage from_moments(double precision, double mean, std::uint64_t stamp) {
    if (precision == 0.0) return {0.0, 0.0, stamp};
    return {precision, precision * mean, stamp};
  }

  friend bool operator==(const GaussianMessage&, const GaussianMessage&) = default;
};

/// Node-level Gaussian approximation. The estimate is the mean. Variance
/// +inf encodes "no information yet"; the anchor has variance 0.
struct Belief {
  double mean = 0.0;
  double variance = kInfinity;

  bool informative() const { return std::isfinite(variance); }
  double estimate() const { return mean; }

  friend bool operator==(const Belief&, const Belief&) = default;
};

/// Payload of a single LSBP broadcast: the sender's whole belief.
struct BroadcastBelief {
  double mean = 0.0;
  double variance = kInfinity;
  std::uint64_t stamp = 0;

  friend bool operator==(const BroadcastBelief&, const BroadcastBelief&) = default;
};

}  // namespace doppler
