#pragma once

#include <cstdint>
#include <boost/container/flat_map.hpp>
#include <vector>

#include "doppler/problem.hpp"
#include "doppler/types.hpp"

namespace doppler::netsim {

enum class OutcomeKind : std::uint8_t { delivered_now, delayed, dropped };

struct Outcome {
  OutcomeKind kind = OutcomeKind::delivered_now;
  std::uint32_t delay = 0;  // iterations; only meaningful for `delayed`

  static Outcome now() { return {OutcomeKind::delivered_now, 0}; }
  static Outcome after(std::uint32_t k) {
    return k == 0 ? now() : Outcome{OutcomeKind::delayed, k};
  }
  static Outcome drop() { return {OutcomeKind::dropped, 0}; }

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Fate of every directed transmission in one iteration. Links absent from
/// the map count as dropped.
struct DeliveryReport {
  boost::container::flat_map<DirectedLink, Outcome> outcomes;

  Outcome outcome(DirectedLink link) const {
    auto it = outcomes.find(link);
    return it == outcomes.end() ? Outcome::drop() : it->second;
  }

  /// Same outcome on every directed link of `problem`.
  static DeliveryReport uniform(const Problem& problem, Outcome outcome);

  /// Throws EngineError if any entry names a pair that is not an edge.
  void validate(const Problem& problem) const;
};

/// A payload leaving `link.from` for `link.to`.
template <class Payload>
struct Outbound {
  DirectedLink link;
  Payload payload;
};

/// Transmission held back by a delayed outcome.
template <class Payload>
struct Deferred {
  Outbound<Payload> message;
  std::uint32_t delay = 0;
};

}  // namespace doppler::netsim
