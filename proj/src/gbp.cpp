#include "doppler/gbp.hpp"

#include <cmath>
#include <string>

namespace doppler {

std::vector<double> belief_deltas(const Problem& problem, const std::vector<Belief>& current,
                                  const std::vector<Belief>& previous) {
  std::vector<double> out(problem.size(), 0.0);
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (problem.is_anchor(u) || !problem.reachable(u)) continue;
    if (!current[u].informative() || !previous[u].informative()) {
      out[u] = kInfinity;
    } else {
      out[u] = std::abs(current[u].mean - previous[u].mean);
    }
  }
  return out;
}

bool has_converged(const Problem& problem, const std::vector<Belief>& current,
                   const std::vector<Belief>& previous, double threshold) {
  if (current.size() != problem.size() || previous.size() != problem.size()) {
    throw EngineError("belief vectors do not match the node set");
  }
  for (double d : belief_deltas(problem, current, previous)) {
    if (!(d < threshold)) return false;
  }
  return true;
}

}  // namespace doppler

namespace doppler::gbp {

MessageInit Init::for_link(DirectedLink link) const {
  auto it = per_link.find(link);
  return it == per_link.end() ? uniform : it->second;
}

Belief combine_belief(const std::vector<GaussianMessage>& incoming) {
  double precision = 0.0;
  double weighted = 0.0;
  for (const auto& m : incoming) {
    precision += m.precision;
    weighted += m.weighted_mean;
  }
  if (!(precision > 0.0)) return {};
  return {weighted / precision, 1.0 / precision};
}

std::size_t message_count_per_iteration(const Problem& problem) { return problem.slot_count(); }

namespace {

GaussianMessage initial_message(const Init& init, DirectedLink link) {
  const MessageInit m = init.for_link(link);
  if (!(m.precision >= 0.0) || !std::isfinite(m.precision)) {
    throw EngineError("initial message precision must be finite and >= 0 on link " +
                      std::to_string(link.from) + "->" + std::to_string(link.to));
  }
  return GaussianMessage::from_moments(m.precision, m.mean, 0);
}

}  // namespace

template <MeanConvention C>
BasicEngine<C>::BasicEngine(Problem problem, Init init)
    : problem_(std::move(problem)), init_(std::move(init)) {
  inbox_.resize(problem_.slot_count());
  for (std::size_t s = 0; s < problem_.slot_count(); ++s) {
    const NodeId to = problem_.id(problem_.owner(s));
    const NodeId from = problem_.id(static_cast<std::size_t>(problem_.neighbor_at(s)));
    inbox_[s] = initial_message(init_, {from, to});
  }
  refresh_beliefs();
}

template <MeanConvention C>
const GaussianMessage& BasicEngine<C>::inbox(NodeId receiver, NodeId sender) const {
  const auto s = problem_.slot(problem_.index_of(receiver), problem_.index_of(sender));
  if (!s) {
    throw EngineError("no edge between " + std::to_string(sender) + " and " +
                      std::to_string(receiver));
  }
  return inbox_[*s];
}

template <MeanConvention C>
GaussianMessage BasicEngine<C>::message_from_slot(std::size_t sender, std::size_t out_slot,
                                                  std::uint64_t stamp) const {
  const double noise = problem_.noise_variance_at(out_slot);
  const double r = problem_.measurement_at(out_slot);
  if (problem_.is_anchor(sender)) return anchor_message(noise, r, problem_.anchor_value(), stamp);
  double q = 0.0;
  double w = 0.0;
  for (std::size_t t = problem_.slot_begin(sender); t < problem_.slot_end(sender); ++t) {
    if (t == out_slot) continue;
    q += inbox_[t].precision;
    w += inbox_[t].weighted_mean;
  }
  return combine_message<C>(noise, r, q, w, stamp);
}

template <MeanConvention C>
GaussianMessage BasicEngine<C>::compute_message(NodeId sender, NodeId receiver) const {
  const std::size_t j = problem_.index_of(sender);
  const auto s = problem_.slot(j, problem_.index_of(receiver));
  if (!s) {
    throw EngineError("no edge between " + std::to_string(sender) + " and " +
                      std::to_string(receiver));
  }
  return message_from_slot(j, *s, iteration_ + 1);
}

template <MeanConvention C>
Belief BasicEngine<C>::compute_belief(NodeId n) const {
  const std::size_t u = problem_.index_of(n);
  if (problem_.is_anchor(u)) return {problem_.anchor_value(), 0.0};
  double precision = 0.0;
  double weighted = 0.0;
  for (std::size_t s = problem_.slot_begin(u); s < problem_.slot_end(u); ++s) {
    precision += inbox_[s].precision;
    weighted += inbox_[s].weighted_mean;
  }
  if (!(precision > 0.0)) return {};
  return {weighted / precision, 1.0 / precision};
}

template <MeanConvention C>
void BasicEngine<C>::refresh_beliefs() {
  beliefs_.resize(problem_.size());
  for (std::size_t u = 0; u < problem_.size(); ++u) beliefs_[u] = compute_belief(problem_.id(u));
}

template <MeanConvention C>
std::vector<netsim::Outbound<GaussianMessage>> BasicEngine<C>::emit() const {
  std::vector<netsim::Outbound<GaussianMessage>> out;
  out.reserve(problem_.slot_count());
  const std::uint64_t stamp = iteration_ + 1;
  for (std::size_t u = 0; u < problem_.size(); ++u) {
    for (std::size_t s = problem_.slot_begin(u); s < problem_.slot_end(u); ++s) {
      const NodeId to = problem_.id(static_cast<std::size_t>(problem_.neighbor_at(s)));
      out.push_back({{problem_.id(u), to}, message_from_slot(u, s, stamp)});
    }
  }
  return out;
}

template <MeanConvention C>
bool BasicEngine<C>::absorb(DirectedLink link, const GaussianMessage& payload) {
  const auto to = problem_.index(link.to);
  const auto from = problem_.index(link.from);
  const auto s = (to && from) ? problem_.slot(*to, *from) : std::nullopt;
  if (!s) {
    throw EngineError("message on unknown link " + std::to_string(link.from) + "->" +
                      std::to_string(link.to));
  }
  if (payload.stamp <= inbox_[*s].stamp) return false;
  inbox_[*s] = payload;
  return true;
}

template <MeanConvention C>
void BasicEngine<C>::finish_iteration() {
  ++iteration_;
  refresh_beliefs();
}

template <MeanConvention C>
std::vector<netsim::Deferred<GaussianMessage>> BasicEngine<C>::step(
    const netsim::DeliveryReport& report) {
  report.validate(problem_);
  std::vector<netsim::Deferred<GaussianMessage>> deferred;
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

template <MeanConvention C>
void BasicEngine<C>::rebind(Problem next) {
  std::vector<GaussianMessage> inbox(next.slot_count());
  for (std::size_t s = 0; s < next.slot_count(); ++s) {
    const NodeId to = next.id(next.owner(s));
    const NodeId from = next.id(static_cast<std::size_t>(next.neighbor_at(s)));
    const auto old_to = problem_.index(to);
    const auto old_from = problem_.index(from);
    const auto old_slot = (old_to && old_from) ? problem_.slot(*old_to, *old_from) : std::nullopt;
    inbox[s] = old_slot ? inbox_[*old_slot] : initial_message(init_, {from, to});
  }
  problem_ = std::move(next);
  inbox_ = std::move(inbox);
  refresh_beliefs();
}

template class BasicEngine<MeanConvention::measurement_minus_prior>;
template class BasicEngine<MeanConvention::literal_plus>;

}  // namespace doppler::gbp
