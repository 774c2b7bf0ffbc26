#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "doppler/delivery.hpp"
#include "doppler/gbp.hpp"
#include "doppler/lsbp.hpp"
#include "doppler/problem.hpp"
#include "doppler/scenario.hpp"
#include "doppler/trace.hpp"

namespace doppler::netsim {

/// Independent Bernoulli loss plus a uniform delay on {0, ..., max_delay}
/// per directed transmission.
struct LinkModel {
  double pdr = 1.0;
  std::uint32_t max_delay = 3;
  std::uint64_t seed = 0;
  /// Replaces pdr * reliability on individual directed links.
  std::map<DirectedLink, double> overrides;

  /// Throws ScenarioError unless every probability is in (0, 1].
  void validate() const;
  double delivery_probability(DirectedLink link, double reliability) const;
};

/// Outcome of one transmission, a pure function of (seed, link, iteration).
Outcome draw_outcome(const LinkModel& model, DirectedLink link, std::uint64_t iteration,
                     double reliability = 1.0);

/// Outcomes for every directed link of `problem` at `iteration`.
DeliveryReport draw_delivery(const LinkModel& model, const Problem& problem,
                             std::uint64_t iteration);

/// Payloads in flight. A payload sent at iteration l with delay k is handed
/// out by due(l + k).
template <class Payload>
class Channel {
 public:
  void send(const Outbound<Payload>& message, std::uint64_t due_iteration) {
    pending_.emplace(due_iteration, message);
  }

  std::vector<Outbound<Payload>> due(std::uint64_t iteration) {
    std::vector<Outbound<Payload>> out;
    auto [lo, hi] = pending_.equal_range(iteration);
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    pending_.erase(lo, hi);
    return out;
  }

  std::size_t in_flight() const { return pending_.size(); }

 private:
  std::multimap<std::uint64_t, Outbound<Payload>> pending_;
};

enum class Algorithm { gbp, lsbp };

const char* to_string(Algorithm a);

struct Termination {
  double threshold = 1e-6;
  std::uint64_t l_max = 200;
  /// A mean beyond divergence_factor * max|r| (or non-finite) ends the run.
  double divergence_factor = 1e6;
};

struct RunSpec {
  Algorithm algorithm = Algorithm::lsbp;
  scenario::Topology topology;
  scenario::GroundTruth truth;
  scenario::MeasurementSet measurements;
  /// Seed and mode for measurements on edges created by join events.
  std::uint64_t measurement_seed = 0;
  bool noiseless = false;

  gbp::Init gbp_init;
  lsbp::Init lsbp_init;
  LinkModel link;
  Termination termination;
  std::vector<scenario::DynamicEvent> events;

  double normalization = 1.0;  // B in the MSE
  bool record_beliefs = true;
  std::string config_hash;
};

/// Drives the chosen engine until threshold convergence, l_max or
/// divergence. Threshold stops are suppressed while events are pending.
/// Throws ScenarioError when a non-anchor node cannot reach the anchor at
/// the start or an event is invalid.
RunTrace run(const RunSpec& spec);

/// Final beliefs as (id, mean) of the last iteration record.
std::map<NodeId, double> final_means(const RunTrace& trace);

}  // namespace doppler::netsim
