#include "doppler/problem.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>

namespace doppler {

namespace {

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFFu;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Problem::Problem(const scenario::Topology& topology,
                 const scenario::MeasurementSet& measurements, double anchor_value) {
  topology.validate();
  ids_.assign(topology.nodes().begin(), topology.nodes().end());
  if (!ids_.empty() && ids_.back() <= 4 * ids_.size() + 1024) {
    position_.assign(ids_.back() + 1, -1);
    for (std::size_t u = 0; u < ids_.size(); ++u) position_[ids_[u]] = static_cast<std::int32_t>(u);
  }
  anchor_ = index_of(topology.anchor());
  anchor_value_ = anchor_value;
  offset_.assign(ids_.size() + 1, 0);
  for (std::size_t u = 0; u < ids_.size(); ++u) {
    offset_[u + 1] = offset_[u] + topology.degree(ids_[u]);
  }
  const std::size_t slots = offset_.back();
  neighbor_.resize(slots);
  noise_variance_.resize(slots);
  measurement_.resize(slots);
  reliability_.resize(slots);
  owner_.resize(slots);
  for (std::size_t u = 0; u < ids_.size(); ++u) {
    std::size_t s = offset_[u];
    for (NodeId peer : topology.neighbors(ids_[u])) {
      const auto& link = topology.link(ids_[u], peer);
      neighbor_[s] = static_cast<std::int32_t>(index_of(peer));
      noise_variance_[s] = link.noise_variance;
      reliability_[s] = link.reliability;
      measurement_[s] = measurements.at(ids_[u], peer);
      owner_[s] = u;
      ++s;
    }
  }
  finalize();
}

void Problem::finalize() {
  const std::size_t slots = neighbor_.size();
  reverse_.assign(slots, 0);
  for (std::size_t u = 0; u < ids_.size(); ++u) {
    for (std::size_t s = offset_[u]; s < offset_[u + 1]; ++s) {
      reverse_[s] = *slot(static_cast<std::size_t>(neighbor_[s]), u);
    }
  }

  reachable_.assign(ids_.size(), 0);
  std::queue<std::size_t> frontier;
  reachable_[anchor_] = 1;
  frontier.push(anchor_);
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (auto v : neighbors(u)) {
      if (!reachable_[v]) {
        reachable_[v] = 1;
        frontier.push(static_cast<std::size_t>(v));
      }
    }
  }

  max_abs_measurement_ = 0.0;
  for (double r : measurement_) max_abs_measurement_ = std::max(max_abs_measurement_, std::abs(r));

  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv_mix(h, ids_[anchor_]);
  h = fnv_mix(h, std::bit_cast<std::uint64_t>(anchor_value_));
  for (std::size_t u = 0; u < ids_.size(); ++u) {
    h = fnv_mix(h, ids_[u]);
    for (std::size_t s = offset_[u]; s < offset_[u + 1]; ++s) {
      h = fnv_mix(h, ids_[static_cast<std::size_t>(neighbor_[s])]);
      h = fnv_mix(h, std::bit_cast<std::uint64_t>(noise_variance_[s]));
      h = fnv_mix(h, std::bit_cast<std::uint64_t>(measurement_[s]));
    }
  }
  fingerprint_ = h;
}

std::optional<std::size_t> Problem::index(NodeId n) const {
  if (!position_.empty()) {
    if (n >= position_.size() || position_[n] < 0) return std::nullopt;
    return static_cast<std::size_t>(position_[n]);
  }
  auto it = std::lower_bound(ids_.begin(), ids_.end(), n);
  if (it == ids_.end() || *it != n) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::size_t Problem::index_of(NodeId n) const {
  auto idx = index(n);
  if (!idx) throw EngineError("unknown node " + std::to_string(n));
  return *idx;
}

std::optional<std::size_t> Problem::slot(std::size_t u, std::size_t v) const {
  auto first = neighbor_.begin() + static_cast<std::ptrdiff_t>(offset_[u]);
  auto last = neighbor_.begin() + static_cast<std::ptrdiff_t>(offset_[u + 1]);
  auto it = std::lower_bound(first, last, static_cast<std::int32_t>(v));
  if (it == last || *it != static_cast<std::int32_t>(v)) return std::nullopt;
  return static_cast<std::size_t>(it - neighbor_.begin());
}

std::size_t Problem::reachable_count() const {
  return static_cast<std::size_t>(std::count(reachable_.begin(), reachable_.end(), 1));
}

Problem Problem::with_scaled_noise(double factor) const {
  Problem copy = *this;
  for (double& v : copy.noise_variance_) v *= factor;
  copy.finalize();
  return copy;
}

Problem Problem::with_noise_unchecked(std::vector<double> per_slot_variance) const {
  if (per_slot_variance.size() != noise_variance_.size()) {
    throw EngineError("noise vector size does not match slot count");
  }
  Problem copy = *this;
  copy.noise_variance_ = std::move(per_slot_variance);
  copy.finalize();
  return copy;
}

}  // namespace doppler
