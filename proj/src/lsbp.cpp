#include "doppler/lsbp.hpp"

#include <cmath>
#include <string>

#include "doppler/simd/kernels.hpp"

namespace doppler::lsbp {

BeliefInit Init::for_node(NodeId n) const {
  auto it = per_node.find(n);
  return it == per_node.end() ? uniform : it->second;
}

Belief incorporate(const Problem& problem, std::size_t node, std::span<const double> neighbor_var,
                   std::span<const double> neighbor_mean) {
  const simd::InfoSums sums = simd::accumulate(problem.noise_variance(node),
                                               problem.measurement(node), neighbor_var,
                                               neighbor_mean);
  if (!(sums.precision > 0.0)) return {};
  return {sums.weighted / sums.precision, 1.0 / sums.precision};
}

std::size_t message_count_per_iteration(const Problem& problem) { return problem.size(); }

Belief Engine::initial_belief(NodeId n) const {
  const std::size_t u = problem_.index_of(n);
  if (problem_.is_anchor(u)) return {problem_.anchor_value(), 0.0};
  const BeliefInit b = init_.for_node(n);
  if (std::isinf(b.variance)) return {};
  return {b.mean, b.variance};
}

BroadcastBelief Engine::initial_broadcast(NodeId n) const {
  const Belief b = initial_belief(n);
  return {b.mean, b.variance, 0};
}

Engine::Engine(Problem problem, Init init) : problem_(std::move(problem)), init_(std::move(init)) {
  std::vector<double> p0;
  for (std::size_t u = 0; u < problem_.size(); ++u) {
    if (problem_.is_anchor(u)) continue;
    const BeliefInit b = init_.for_node(problem_.id(u));
    if (!(b.variance > 0.0) || !std::isfinite(b.mean)) {
      throw EngineError("initial belief of node " + std::to_string(problem_.id(u)) +
                        " needs variance > 0 and a finite mean");
    }
    p0.push_back(std::isinf(b.variance) ? 0.0 : 1.0 / b.variance);
  }
  feasibility_ = check_feasible_init(problem_, p0);

  beliefs_.resize(problem_.size());
  belief_stamp_.assign(problem_.size(), 0);
  for (std::size_t u = 0; u < problem_.size(); ++u) beliefs_[u] = initial_belief(problem_.id(u));

  stored_mean_.resize(problem_.slot_count());
  stored_var_.resize(problem_.slot_count());
  stamp_.assign(problem_.slot_count(), 0);
  for (std::size_t s = 0; s < problem_.slot_count(); ++s) {
    const auto v = static_cast<std::size_t>(problem_.neighbor_at(s));
    stored_mean_[s] = beliefs_[v].mean;
    stored_var_[s] = beliefs_[v].variance;
  }
}

BroadcastBelief Engine::stored(NodeId receiver, NodeId sender) const {
  const auto s = problem_.slot(problem_.index_of(receiver), problem_.index_of(sender));
  if (!s) {
    throw EngineError("no edge between " + std::to_string(sender) + " and " +
                      std::to_string(receiver));
  }
  return {stored_mean_[*s], stored_var_[*s], stamp_[*s]};
}

std::vector<BroadcastBelief> Engine::broadcasts() const {
  std::vector<BroadcastBelief> out(problem_.size());
  for (std::size_t u = 0; u < problem_.size(); ++u) {
    out[u] = {beliefs_[u].mean, beliefs_[u].variance, iteration_ + 1};
  }
  return out;
}

std::vector<netsim::Outbound<BroadcastBelief>> Engine::emit() const {
  const auto own = broadcasts();
  std::vector<netsim::Outbound<BroadcastBelief>> out;
  out.reserve(problem_.slot_count());
  for (std::size_t u = 0; u < problem_.size(); ++u) {
    for (auto v : problem_.neighbors(u)) {
      out.push_back({{problem_.id(u), problem_.id(static_cast<std::size_t>(v))}, own[u]});
    }
  }
  return out;
}

bool Engine::absorb(DirectedLink link, const BroadcastBelief& payload) {
  const auto to = problem_.index(link.to);
  const auto from = problem_.index(link.from);
  const auto s = (to && from) ? problem_.slot(*to, *from) : std::nullopt;
  if (!s) {
    throw EngineError("broadcast on unknown link " + std::to_string(link.from) + "->" +
                      std::to_string(link.to));
  }
  if (payload.stamp <= stamp_[*s]) return false;
  stored_mean_[*s] = payload.mean;
  stored_var_[*s] = payload.variance;
  stamp_[*s] = payload.stamp;
  return true;
}

void Engine::finish_iteration() {
  ++iteration_;
  for (std::size_t u = 0; u < problem_.size(); ++u) {
    if (problem_.is_anchor(u)) continue;
    const std::size_t b = problem_.slot_begin(u);
    const std::size_t d = problem_.degree(u);
    beliefs_[u] = incorporate(problem_, u, std::span<const double>(stored_var_).subspan(b, d),
                              std::span<const double>(stored_mean_).subspan(b, d));
    belief_stamp_[u] = iteration_;
  }
}

std::vector<netsim::Deferred<BroadcastBelief>> Engine::step(const netsim::DeliveryReport& report) {
  report.validate(problem_);
  std::vector<netsim::Deferred<BroadcastBelief>> deferred;
  for (auto& msg : emit()) {
    const auto outcome = report.outcome(msg.link);
    switch (outcome.kind) {
      case netsim::OutcomeKind::delivered_now:
        absorb(msg.link, msg.payload);
        break;
      case netsim::OutcomeKind::delayed:
        deferred.push_back({msg, outcome.delay});
        break;
      case netsim::OutcomeKind::dropped:
        break;
    }
  }
  finish_iteration();
  return deferred;
}

void Engine::rebind(Problem next) {
  std::vector<Belief> beliefs(next.size());
  std::vector<std::uint64_t> belief_stamp(next.size(), 0);
  std::vector<double> mean(next.slot_count());
  std::vector<double> var(next.slot_count());
  std::vector<std::uint64_t> stamp(next.slot_count(), 0);

  const Problem old = std::move(problem_);
  problem_ = std::move(next);
  for (std::size_t u = 0; u < problem_.size(); ++u) {
    const auto old_u = old.index(problem_.id(u));
    if (old_u) {
      beliefs[u] = beliefs_[*old_u];
      belief_stamp[u] = belief_stamp_[*old_u];
    } else {
      beliefs[u] = initial_belief(problem_.id(u));
    }
  }
  for (std::size_t s = 0; s < problem_.slot_count(); ++s) {
    const NodeId to = problem_.id(problem_.owner(s));
    const NodeId from = problem_.id(static_cast<std::size_t>(problem_.neighbor_at(s)));
    const auto old_to = old.index(to);
    const auto old_from = old.index(from);
    const auto old_slot = (old_to && old_from) ? old.slot(*old_to, *old_from) : std::nullopt;
    if (old_slot) {
      mean[s] = stored_mean_[*old_slot];
      var[s] = stored_var_[*old_slot];
      stamp[s] = stamp_[*old_slot];
    } else {
      const BroadcastBelief b = initial_broadcast(from);
      mean[s] = b.mean;
      var[s] = b.variance;
    }
  }
  beliefs_ = std::move(beliefs);
  belief_stamp_ = std::move(belief_stamp);
  stored_mean_ = std::move(mean);
  stored_var_ = std::move(var);
  stamp_ = std::move(stamp);
}

}  // namespace doppler::lsbp
