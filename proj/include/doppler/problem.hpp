#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "doppler/scenario.hpp"

namespace doppler {

/// Compact, index-based view of (topology, measurements, anchor value).
///
/// Nodes get dense indices in ascending id order. Each node owns a
/// contiguous run of adjacency slots, one per neighbor in ascending id
/// order; slot s of node u describes the directed pair (neighbor -> u) and
/// carries the edge's noise variance and measurement, so per-node
/// accumulations walk contiguous memory.
class Problem {
 public:
  Problem(const scenario::Topology& topology, const scenario::MeasurementSet& measurements,
          double anchor_value);

  std::size_t size() const { return ids_.size(); }
  std::size_t slot_count() const { return neighbor_.size(); }

  NodeId id(std::size_t u) const { return ids_[u]; }
  const std::vector<NodeId>& ids() const { return ids_; }
  std::optional<std::size_t> index(NodeId n) const;
  std::size_t index_of(NodeId n) const;

  std::size_t anchor() const { return anchor_; }
  double anchor_value() const { return anchor_value_; }
  bool is_anchor(std::size_t u) const { return u == anchor_; }

  std::size_t slot_begin(std::size_t u) const { return offset_[u]; }
  std::size_t slot_end(std::size_t u) const { return offset_[u + 1]; }
  std::size_t degree(std::size_t u) const { return offset_[u + 1] - offset_[u]; }

  /// Slot of `v` inside `u`'s adjacency run, if they are adjacent.
  std::optional<std::size_t> slot(std::size_t u, std::size_t v) const;

  std::span<const std::int32_t> neighbors(std::size_t u) const {
    return {neighbor_.data() + offset_[u], degree(u)};
  }
  std::span<const double> noise_variance(std::size_t u) const {
    return {noise_variance_.data() + offset_[u], degree(u)};
  }
  std::span<const double> measurement(std::size_t u) const {
    return {measurement_.data() + offset_[u], degree(u)};
  }

  std::int32_t neighbor_at(std::size_t s) const { return neighbor_[s]; }
  double noise_variance_at(std::size_t s) const { return noise_variance_[s]; }
  double measurement_at(std::size_t s) const { return measurement_[s]; }
  double reliability_at(std::size_t s) const { return reliability_[s]; }
  /// Slot of the same edge seen from the other endpoint.
  std::size_t reverse_slot(std::size_t s) const { return reverse_[s]; }
  /// Owner (receiver) of slot s.
  std::size_t owner(std::size_t s) const { return owner_[s]; }

  const std::vector<double>& all_noise_variance() const { return noise_variance_; }
  const std::vector<std::int32_t>& all_neighbors() const { return neighbor_; }

  bool reachable(std::size_t u) const { return reachable_[u] != 0; }
  std::size_t reachable_count() const;

  double max_abs_measurement() const { return max_abs_measurement_; }

  /// Hash over ids, edges, variances and measurements.
  std::uint64_t fingerprint() const { return fingerprint_; }

  /// Copy with every noise variance multiplied by `factor`.
  Problem with_scaled_noise(double factor) const;
  /// Copy with the noise variances replaced (slot order; both directions of
  /// an edge must carry the same value). Skips positivity checks so test
  /// doubles can inject corrupted variances.
  Problem with_noise_unchecked(std::vector<double> per_slot_variance) const;

 private:
  Problem() = default;
  void finalize();

  std::vector<NodeId> ids_;
  std::vector<std::int32_t> position_;  // id -> index, -1 if absent; empty for sparse ids
  std::vector<std::size_t> offset_;
  std::vector<std::int32_t> neighbor_;
  std::vector<double> noise_variance_;
  std::vector<double> measurement_;
  std::vector<double> reliability_;
  std::vector<std::size_t> reverse_;
  std::vector<std::size_t> owner_;
  std::vector<std::uint8_t> reachable_;
  std::size_t anchor_ = 0;
  double anchor_value_ = 0.0;
  double max_abs_measurement_ = 0.0;
  std::uint64_t fingerprint_ = 0;
};

}  // namespace doppler
