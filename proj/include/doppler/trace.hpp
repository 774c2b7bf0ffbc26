#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "doppler/types.hpp"

namespace doppler::netsim {

enum class TerminationReason { threshold, l_max, diverged };

const char* to_string(TerminationReason r);

/// Delivery counters of one iteration, over directed transmissions.
struct DeliveryStats {
  std::uint64_t delivered_now = 0;
  std::uint64_t delayed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t late_arrivals = 0;   // queued payloads that reached their receiver
  std::uint64_t stale_rejected = 0;  // arrivals older than the buffer contents
  std::uint64_t lost_in_flight = 0;  // queued payloads whose link disappeared

  friend bool operator==(const DeliveryStats&, const DeliveryStats&) = default;
};

struct IterationRecord {
  std::uint64_t iteration = 0;
  std::uint64_t n_nodes = 0;
  std::vector<NodeId> nodes;  // empty unless beliefs are recorded
  std::vector<double> means;
  std::vector<double> variances;  // +inf when uninformative
  std::vector<double> deltas;
  DeliveryStats delivery;
  double max_delta = 0.0;
  bool converged = false;
  double avg_mse = 0.0;          // NaN when no node is informative
  std::uint64_t informative = 0; // nodes counted in avg_mse
  double crlb_avg = 0.0;
  std::uint64_t messages = 0;
  std::uint64_t messages_cumulative = 0;
  /// Largest (iteration - stamp) over all buffer slots after this iteration.
  std::uint64_t max_stamp_lag = 0;
  std::vector<std::string> events;
  std::vector<NodeId> unreachable;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

/// Append-only record of one engine run. Iteration indices run 1, 2, ...
struct RunTrace {
  std::string algorithm;
  double pdr = 1.0;
  std::uint32_t max_delay = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  double threshold = 0.0;
  std::uint64_t l_max = 0;
  double normalization = 1.0;

  std::vector<IterationRecord> iterations;

  TerminationReason reason = TerminationReason::l_max;
  std::string divergence;  // offending node and value when diverged

  void append(IterationRecord record);
  const IterationRecord& last() const;
  std::uint64_t iteration_count() const { return iterations.size(); }

  friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

/// Line-delimited JSON: one header line, one line per iteration, one
/// summary line. Non-finite numbers are written as null.
void write_jsonl(std::ostream& out, const RunTrace& trace);
RunTrace read_jsonl(std::istream& in);

}  // namespace doppler::netsim
