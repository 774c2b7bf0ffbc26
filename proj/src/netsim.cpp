#include "doppler/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "doppler/analysis.hpp"
#include "doppler/oracle.hpp"
#include "doppler/rng.hpp"

namespace doppler::netsim {

namespace {

// One outcome per directed link. Walking slot s as the link owner(s) ->
// neighbor_at(s) visits links in (from, to) order, so the sequence is
// adopted without sorting. The receiving slot is reverse_slot(s).
template <class Draw>
DeliveryReport per_slot(const Problem& problem, Draw draw) {
  using Sequence = decltype(DeliveryReport::outcomes)::sequence_type;
  Sequence entries;
  entries.reserve(problem.slot_count());
  for (std::size_t s = 0; s < problem.slot_count(); ++s) {
    const DirectedLink link{problem.id(problem.owner(s)),
                            problem.id(static_cast<std::size_t>(problem.neighbor_at(s)))};
    entries.emplace_back(link, draw(link, problem.reverse_slot(s)));
  }
  DeliveryReport report;
  report.outcomes.adopt_sequence(boost::container::ordered_unique_range, std::move(entries));
  return report;
}

}  // namespace

DeliveryReport DeliveryReport::uniform(const Problem& problem, Outcome outcome) {
  return per_slot(problem, [&](DirectedLink, std::size_t) { return outcome; });
}

void DeliveryReport::validate(const Problem& problem) const {
  for (const auto& [link, outcome] : outcomes) {
    const auto to = problem.index(link.to);
    const auto from = problem.index(link.from);
    if (!to || !from || !problem.slot(*to, *from)) {
      throw EngineError("delivery report names " + std::to_string(link.from) + "->" +
                        std::to_string(link.to) + ", which is not an edge");
    }
  }
}

void LinkModel::validate() const {
  if (!(pdr > 0.0 && pdr <= 1.0)) {
    throw ScenarioError("pdr must be in (0, 1], got " + std::to_string(pdr));
  }
  for (const auto& [link, p] : overrides) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw ScenarioError("pdr override on " + std::to_string(link.from) + "->" +
                          std::to_string(link.to) + " must be in (0, 1]");
    }
  }
}

double LinkModel::delivery_probability(DirectedLink link, double reliability) const {
  auto it = overrides.find(link);
  return it == overrides.end() ? pdr * reliability : it->second;
}

Outcome draw_outcome(const LinkModel& model, DirectedLink link, std::uint64_t iteration,
                     double reliability) {
  const double p = model.delivery_probability(link, reliability);
  if (p >= 1.0 && model.max_delay == 0) return Outcome::now();
  SplitMix64 rng(derive_seed(model.seed, {static_cast<std::uint64_t>(Stream::link), link.from,
                                          link.to, iteration}));
  if (rng.uniform() >= p) return Outcome::drop();
  if (model.max_delay == 0) return Outcome::now();
  const auto span = static_cast<double>(model.max_delay) + 1.0;
  const auto k = static_cast<std::uint32_t>(std::min(std::floor(rng.uniform() * span),
                                                     static_cast<double>(model.max_delay)));
  return Outcome::after(k);
}

DeliveryReport draw_delivery(const LinkModel& model, const Problem& problem,
                             std::uint64_t iteration) {
  return per_slot(problem, [&](DirectedLink link, std::size_t s) {
    return draw_outcome(model, link, iteration, problem.reliability_at(s));
  });
}

const char* to_string(Algorithm a) { return a == Algorithm::gbp ? "gbp" : "lsbp"; }

std::map<NodeId, double> final_means(const RunTrace& trace) {
  std::map<NodeId, double> out;
  if (trace.iterations.empty()) return out;
  const auto& rec = trace.iterations.back();
  for (std::size_t k = 0; k < rec.nodes.size(); ++k) out[rec.nodes[k]] = rec.means[k];
  return out;
}

namespace {

std::uint64_t slot_stamp(const gbp::Engine& e, std::size_t s) { return e.inbox()[s].stamp; }
std::uint64_t slot_stamp(const lsbp::Engine& e, std::size_t s) { return e.stored_stamp_at(s); }

gbp::Engine make_engine(const Problem& p, const RunSpec& spec, gbp::Engine*) {
  return gbp::Engine(p, spec.gbp_init);
}
lsbp::Engine make_engine(const Problem& p, const RunSpec& spec, lsbp::Engine*) {
  return lsbp::Engine(p, spec.lsbp_init);
}

double crlb_average(const scenario::Topology& topo, const scenario::MeasurementSet& meas,
                    double anchor_value) {
  try {
    return oracle::solve(topo, meas, anchor_value).crlb_average;
  } catch (const SingularSystemError&) {
    return analysis::kNaN;
  }
}

std::string describe(const scenario::DynamicEvent& ev) {
  std::ostringstream os;
  if (const auto* leave = std::get_if<scenario::Leave>(&ev.change)) {
    os << "leave " << leave->node;
  } else {
    const auto& join = std::get<scenario::Join>(ev.change);
    os << "join " << join.node << " links=" << join.links.size();
  }
  return os.str();
}

/// Measurements of the edges of `topo`: existing values are kept, new edges
/// get a draw keyed by the event that created them.
scenario::MeasurementSet refresh_measurements(const scenario::Topology& topo,
                                              const scenario::GroundTruth& truth,
                                              const scenario::MeasurementSet& previous,
                                              const RunSpec& spec,
                                              const scenario::DynamicEvent& ev) {
  scenario::MeasurementSet next;
  next.seed = previous.seed;
  next.noise_description = previous.noise_description;
  const NodeId subject = std::holds_alternative<scenario::Leave>(ev.change)
                             ? std::get<scenario::Leave>(ev.change).node
                             : std::get<scenario::Join>(ev.change).node;
  const auto event_seed = derive_seed(
      spec.measurement_seed,
      {static_cast<std::uint64_t>(Stream::measurement), ev.at_iteration, subject});
  for (const auto& [edge, params] : topo.edges()) {
    auto it = previous.values.find(edge);
    if (it != previous.values.end()) {
      next.values.emplace(edge, it->second);
      continue;
    }
    const double exact = truth.offsets.at(edge.lo) + truth.offsets.at(edge.hi);
    next.values.emplace(edge, scenario::sample_edge(edge, exact, params.noise_variance,
                                                    event_seed, spec.noiseless));
  }
  return next;
}

std::vector<Belief> remap(const Problem& from, const Problem& to, const std::vector<Belief>& b) {
  std::vector<Belief> out(to.size());
  for (std::size_t u = 0; u < to.size(); ++u) {
    const auto old = from.index(to.id(u));
    if (old) out[u] = b[*old];
  }
  return out;
}

std::string divergence_check(const Problem& problem, const std::vector<Belief>& beliefs,
                             double factor) {
  const double scale = problem.max_abs_measurement();
  const double bound = scale > 0.0 ? factor * scale : factor;
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (problem.is_anchor(u)) continue;
    const Belief& b = beliefs[u];
    const bool bad = std::isnan(b.variance) || std::isnan(b.mean) ||
                     (b.informative() && (!std::isfinite(b.mean) || std::abs(b.mean) > bound));
    if (bad) {
      std::ostringstream os;
      os << "node " << problem.id(u) << " mean " << analysis::format_double(b.mean)
         << " exceeds bound " << analysis::format_double(bound);
      return os.str();
    }
  }
  return {};
}

template <class E>
RunTrace drive(const RunSpec& spec) {
  using Payload = typename E::Payload;
  spec.link.validate();
  scenario::validate_event_order(spec.events);
  spec.topology.validate();
  if (!spec.topology.anchor_connected()) {
    std::ostringstream os;
    os << "nodes without a path to the anchor:";
    for (NodeId n : spec.topology.unreachable_from_anchor()) os << ' ' << n;
    throw ScenarioError(os.str());
  }

  RunTrace trace;
  trace.algorithm = to_string(spec.algorithm);
  trace.pdr = spec.link.pdr;
  trace.max_delay = spec.link.max_delay;
  trace.seed = spec.link.seed;
  trace.config_hash = spec.config_hash;
  trace.threshold = spec.termination.threshold;
  trace.l_max = spec.termination.l_max;
  trace.normalization = spec.normalization;

  scenario::Topology topo = spec.topology;
  scenario::GroundTruth truth = spec.truth;
  scenario::MeasurementSet meas = spec.measurements;
  E engine = make_engine(Problem(topo, meas, truth.anchor_value), spec, static_cast<E*>(nullptr));
  double crlb = crlb_average(topo, meas, truth.anchor_value);
  std::vector<Belief> previous = engine.beliefs();
  Channel<Payload> channel;
  std::size_t next_event = 0;
  std::uint64_t cumulative = 0;

  for (std::uint64_t l = 1; l <= spec.termination.l_max; ++l) {
    IterationRecord rec;
    rec.iteration = l;

    bool changed = false;
    while (next_event < spec.events.size() && spec.events[next_event].at_iteration == l) {
      const auto& ev = spec.events[next_event++];
      auto [t, g] = scenario::apply_event(topo, truth, ev);
      meas = refresh_measurements(t, g, meas, spec, ev);
      topo = std::move(t);
      truth = std::move(g);
      rec.events.push_back(describe(ev));
      changed = true;
    }
    if (changed) {
      Problem next(topo, meas, truth.anchor_value);
      previous = remap(engine.problem(), next, previous);
      engine.rebind(std::move(next));
      crlb = crlb_average(topo, meas, truth.anchor_value);
    }
    const Problem& problem = engine.problem();

    const DeliveryReport report = draw_delivery(spec.link, problem, l);
    for (const auto& msg : engine.emit()) {
      const Outcome o = report.outcome(msg.link);
      switch (o.kind) {
        case OutcomeKind::delivered_now:
          ++rec.delivery.delivered_now;
          if (!engine.absorb(msg.link, msg.payload)) ++rec.delivery.stale_rejected;
          break;
        case OutcomeKind::delayed:
          ++rec.delivery.delayed;
          channel.send(msg, l + o.delay);
          break;
        case OutcomeKind::dropped:
          ++rec.delivery.dropped;
          break;
      }
    }
    for (const auto& msg : channel.due(l)) {
      const auto to = problem.index(msg.link.to);
      const auto from = problem.index(msg.link.from);
      if (!to || !from || !problem.slot(*to, *from)) {
        ++rec.delivery.lost_in_flight;
        continue;
      }
      ++rec.delivery.late_arrivals;
      if (!engine.absorb(msg.link, msg.payload)) ++rec.delivery.stale_rejected;
    }
    engine.finish_iteration();

    const auto& beliefs = engine.beliefs();
    rec.deltas = belief_deltas(problem, beliefs, previous);
    rec.max_delta = rec.deltas.empty() ? 0.0 : *std::max_element(rec.deltas.begin(), rec.deltas.end());
    rec.converged = has_converged(problem, beliefs, previous, spec.termination.threshold);
    rec.n_nodes = problem.size();
    if (spec.record_beliefs) {
      rec.nodes = problem.ids();
      for (const auto& b : beliefs) {
        rec.means.push_back(b.mean);
        rec.variances.push_back(b.variance);
      }
    } else {
      rec.deltas.clear();
    }
    const auto mse = analysis::belief_mse(problem, beliefs, truth, spec.normalization);
    rec.avg_mse = mse.value;
    rec.informative = mse.informative;
    rec.crlb_avg = crlb;
    rec.messages = engine.messages_per_iteration();
    cumulative += rec.messages;
    rec.messages_cumulative = cumulative;
    for (std::size_t s = 0; s < problem.slot_count(); ++s) {
      const std::uint64_t stamp = slot_stamp(engine, s);
      rec.max_stamp_lag = std::max(rec.max_stamp_lag, l > stamp ? l - stamp : 0);
    }
    for (std::size_t u = 0; u < problem.size(); ++u) {
      if (!problem.reachable(u)) rec.unreachable.push_back(problem.id(u));
    }

    const std::string divergence =
        divergence_check(problem, beliefs, spec.termination.divergence_factor);
    const bool events_pending = next_event < spec.events.size();
    trace.append(std::move(rec));
    previous = beliefs;

    if (!divergence.empty()) {
      trace.reason = TerminationReason::diverged;
      trace.divergence = divergence;
      return trace;
    }
    if (trace.last().converged && !events_pending) {
      trace.reason = TerminationReason::threshold;
      return trace;
    }
  }
  trace.reason = TerminationReason::l_max;
  return trace;
}

}  // namespace

RunTrace run(const RunSpec& spec) {
  switch (spec.algorithm) {
    case Algorithm::gbp:
      return drive<gbp::Engine>(spec);
    case Algorithm::lsbp:
      return drive<lsbp::Engine>(spec);
  }
  throw EngineError("unknown algorithm");
}

}  // namespace doppler::netsim
