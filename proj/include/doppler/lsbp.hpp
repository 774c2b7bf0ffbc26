#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "doppler/convergence.hpp"
#include "doppler/delivery.hpp"
#include "doppler/fixed_point.hpp"
#include "doppler/gaussian.hpp"
#include "doppler/problem.hpp"

namespace doppler::lsbp {

struct BeliefInit {
  double variance = 100.0;  // > 0, or +inf for uninformative
  double mean = 0.0;
};

/// Initial belief of every non-anchor node. The anchor is always pinned at
/// (anchor_value, 0).
struct Init {
  BeliefInit uniform;
  std::map<NodeId, BeliefInit> per_node;

  static Init uninformative() { return {{kInfinity, 0.0}, {}}; }
  BeliefInit for_node(NodeId n) const;
};

/// Belief of one node from the neighbor beliefs it holds.
///
/// Per neighbor j: C = sigma^2 + P_j, eta = r - mu_j. Precision is the sum
/// of 1/C, the mean is the precision-weighted average of eta. Inputs are
/// slot-aligned with `problem.neighbors(node)`.
Belief incorporate(const Problem& problem, std::size_t node, std::span<const double> neighbor_var,
                   std::span<const double> neighbor_mean);

/// Linear-scaling BP: every node broadcasts its own belief once per
/// iteration and receivers form the edge messages locally.
///
/// Iteration l: emit() hands out each node's current belief (computed at
/// l-1) as one broadcast stamped l, copied onto every outgoing link; the caller
/// delivers copies through absorb(); finish_iteration() recomputes every
/// non-anchor belief from the stored neighbor beliefs.
class Engine {
 public:
  using Payload = BroadcastBelief;

  Engine(Problem problem, Init init);

  const Problem& problem() const { return problem_; }
  std::uint64_t iteration() const { return iteration_; }
  const std::vector<Belief>& beliefs() const { return beliefs_; }
  const Belief& belief(NodeId n) const { return beliefs_[problem_.index_of(n)]; }

  /// Neighbor belief held by `receiver` for `sender`.
  BroadcastBelief stored(NodeId receiver, NodeId sender) const;
  std::uint64_t stored_stamp_at(std::size_t slot) const { return stamp_[slot]; }

  /// Feasibility class of the initial precision vector.
  Feasibility initial_feasibility() const { return feasibility_; }

  /// One broadcast per node, indexed like problem().ids(); stamp = the
  /// iteration in which it is sent.
  std::vector<BroadcastBelief> broadcasts() const;
  /// Broadcast copies, one per directed link.
  std::vector<netsim::Outbound<Payload>> emit() const;
  bool absorb(DirectedLink link, const Payload& payload);
  void finish_iteration();

  std::vector<netsim::Deferred<Payload>> step(const netsim::DeliveryReport& report);

  /// Payloads transmitted per iteration: one per node.
  std::size_t messages_per_iteration() const { return problem_.size(); }

  void rebind(Problem next);

 private:
  BroadcastBelief initial_broadcast(NodeId n) const;
  Belief initial_belief(NodeId n) const;

  Problem problem_;
  Init init_;
  std::vector<Belief> beliefs_;
  std::vector<std::uint64_t> belief_stamp_;
  std::vector<double> stored_mean_;  // per slot: last belief of the neighbor
  std::vector<double> stored_var_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t iteration_ = 0;
  Feasibility feasibility_ = Feasibility::increasing;
};

/// Broadcast payloads per iteration on `problem`: N.
std::size_t message_count_per_iteration(const Problem& problem);

using doppler::has_converged;

}  // namespace doppler::lsbp
