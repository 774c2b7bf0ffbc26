#include "doppler/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>

#include "doppler/rng.hpp"

namespace doppler::scenario {

namespace {

std::string node_str(NodeId n) { return std::to_string(n); }

void check_params(const LinkParams& p, Edge e) {
  if (!(p.noise_variance > 0.0) || !std::isfinite(p.noise_variance)) {
    throw ScenarioError("edge {" + node_str(e.lo) + "," + node_str(e.hi) +
                        "}: noise variance must be positive and finite");
  }
  if (!(p.reliability > 0.0 && p.reliability <= 1.0)) {
    throw ScenarioError("edge {" + node_str(e.lo) + "," + node_str(e.hi) +
                        "}: reliability must lie in (0,1]");
  }
}

}  // namespace

// ------------------------------------------------------------------ Topology

Topology::Topology(NodeId anchor) : anchor_(anchor) {
  if (anchor == 0) throw ScenarioError("node ids start at 1");
  nodes_.insert(anchor);
  adjacency_[anchor];
}

void Topology::add_node(NodeId n) {
  if (n == 0) throw ScenarioError("node ids start at 1");
  if (!nodes_.insert(n).second) throw ScenarioError("duplicate node " + node_str(n));
  adjacency_[n];
}

void Topology::remove_node(NodeId n) {
  if (n == anchor_) throw ScenarioError("the anchor cannot be removed");
  if (!has_node(n)) throw ScenarioError("unknown node " + node_str(n));
  for (NodeId m : adjacency_.at(n)) {
    edges_.erase(Edge(n, m));
    adjacency_.at(m).erase(n);
  }
  adjacency_.erase(n);
  nodes_.erase(n);
}

void Topology::add_edge(NodeId a, NodeId b, LinkParams params) {
  if (a == b) throw ScenarioError("self-loop on node " + node_str(a));
  if (!has_node(a) || !has_node(b)) {
    throw ScenarioError("edge {" + node_str(a) + "," + node_str(b) + "} joins a missing node");
  }
  const Edge e(a, b);
  check_params(params, e);
  if (!edges_.emplace(e, params).second) {
    throw ScenarioError("duplicate edge {" + node_str(e.lo) + "," + node_str(e.hi) + "}");
  }
  adjacency_[a].insert(b);
  adjacency_[b].insert(a);
}

void Topology::remove_edge(NodeId a, NodeId b) {
  if (edges_.erase(Edge(a, b)) == 0) {
    throw ScenarioError("unknown edge {" + node_str(a) + "," + node_str(b) + "}");
  }
  adjacency_.at(a).erase(b);
  adjacency_.at(b).erase(a);
}

const LinkParams& Topology::link(NodeId a, NodeId b) const {
  auto it = edges_.find(Edge(a, b));
  if (it == edges_.end()) {
    throw ScenarioError("unknown edge {" + node_str(a) + "," + node_str(b) + "}");
  }
  return it->second;
}

std::vector<NodeId> Topology::neighbors(NodeId n) const {
  auto it = adjacency_.find(n);
  if (it == adjacency_.end()) throw ScenarioError("unknown node " + node_str(n));
  return {it->second.begin(), it->second.end()};
}

std::size_t Topology::degree(NodeId n) const {
  auto it = adjacency_.find(n);
  return it == adjacency_.end() ? 0 : it->second.size();
}

std::set<NodeId> Topology::anchor_reachable() const {
  std::set<NodeId> seen{anchor_};
  std::queue<NodeId> frontier;
  frontier.push(anchor_);
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : adjacency_.at(u)) {
      if (seen.insert(v).second) frontier.push(v);
    }
  }
  return seen;
}

std::vector<NodeId> Topology::unreachable_from_anchor() const {
  const auto reach = anchor_reachable();
  std::vector<NodeId> out;
  for (NodeId n : nodes_) {
    if (!reach.count(n)) out.push_back(n);
  }
  return out;
}

void Topology::validate() const {
  if (!has_node(anchor_)) throw ScenarioError("anchor " + node_str(anchor_) + " is not a node");
  for (const auto& [e, p] : edges_) {
    if (e.lo == e.hi) throw ScenarioError("self-loop on node " + node_str(e.lo));
    if (!has_node(e.lo) || !has_node(e.hi)) {
      throw ScenarioError("edge {" + node_str(e.lo) + "," + node_str(e.hi) +
                          "} joins a missing node");
    }
    check_params(p, e);
  }
}

// --------------------------------------------------------------------- trace

KinematicTrace parse_trace(std::istream& in) {
  KinematicTrace out;
  std::set<NodeId> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long long id = 0;
    Kinematics k;
    if (!(fields >> id)) continue;  // blank or comment-only
    if (!(fields >> k.x >> k.y >> k.vx >> k.vy)) {
      throw ScenarioError("trace line " + std::to_string(line_no) +
                          ": expected `id x_m y_m vx_mps vy_mps`");
    }
    std::string extra;
    if (fields >> extra) {
      throw ScenarioError("trace line " + std::to_string(line_no) + ": trailing field '" +
                          extra + "'");
    }
    if (id < 1 || id > static_cast<long long>(UINT32_MAX)) {
      throw ScenarioError("trace line " + std::to_string(line_no) + ": id must be >= 1");
    }
    k.id = static_cast<NodeId>(id);
    if (!seen.insert(k.id).second) {
      throw ScenarioError("trace line " + std::to_string(line_no) + ": duplicate id " +
                          std::to_string(id));
    }
    out.push_back(k);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

KinematicTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open trace file '" + path + "'");
  return parse_trace(in);
}

void write_trace(std::ostream& out, const KinematicTrace& trace) {
  out << "# id x_m y_m vx_mps vy_mps\n" << std::setprecision(17);
  for (const auto& k : trace) {
    out << k.id << ' ' << k.x << ' ' << k.y << ' ' << k.vx << ' ' << k.vy << '\n';
  }
}

double MeasurementSet::at(NodeId a, NodeId b) const {
  auto it = values.find(Edge(a, b));
  if (it == values.end()) {
    throw ScenarioError("no measurement for edge {" + node_str(Edge(a, b).lo) + "," +
                        node_str(Edge(a, b).hi) + "}");
  }
  return it->second;
}

void validate_event_order(const std::vector<DynamicEvent>& events) {
  std::uint64_t last = 1;
  for (const auto& ev : events) {
    if (ev.at_iteration < 1) throw ScenarioError("event iteration must be >= 1");
    if (ev.at_iteration < last) throw ScenarioError("events must be sorted by iteration");
    last = ev.at_iteration;
  }
}

// ---------------------------------------------------------------- generators

double draw_noise_variance(std::uint64_t seed, Edge e, NoiseRange noise) {
  if (!(noise.lo > 0.0) || noise.hi < noise.lo) {
    throw ScenarioError("noise variance range must satisfy 0 < lo <= hi");
  }
  SplitMix64 rng(derive_seed(seed, {e.lo, e.hi}));
  return noise.lo + (noise.hi - noise.lo) * rng.uniform();
}

Topology generate_geometric(const KinematicTrace& trace, const GeometricParams& params,
                            std::uint64_t seed) {
  if (trace.size() < 2) throw ScenarioError("geometric topology needs n >= 2");
  if (!(params.comm_range > 0.0)) throw ScenarioError("communication range must be > 0");
  for (const auto& k : trace) {
    if (k.x < 0.0 || k.y < 0.0 || k.x > params.width || k.y > params.height) {
      throw ScenarioError("node " + node_str(k.id) + " lies outside the area");
    }
  }
  KinematicTrace sorted = trace;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  Topology topo(sorted.front().id);
  for (std::size_t i = 1; i < sorted.size(); ++i) topo.add_node(sorted[i].id);
  const double r2 = params.comm_range * params.comm_range;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      const double dx = sorted[i].x - sorted[j].x;
      const double dy = sorted[i].y - sorted[j].y;
      if (dx * dx + dy * dy <= r2) {
        const Edge e(sorted[i].id, sorted[j].id);
        topo.add_edge(e.lo, e.hi,
                      {draw_noise_variance(seed, e, params.noise), params.reliability});
      }
    }
  }
  return topo;
}

KinematicTrace random_kinematics(std::size_t n, double width, double height, double speed_lo,
                                 double speed_hi, std::uint64_t seed) {
  if (speed_hi < speed_lo) throw ScenarioError("speed range must satisfy lo <= hi");
  SplitMix64 rng(seed);
  KinematicTrace out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Kinematics k;
    k.id = static_cast<NodeId>(i + 1);
    k.x = width * rng.uniform();
    k.y = height * rng.uniform();
    const double heading = 2.0 * std::numbers::pi * rng.uniform();
    const double speed = speed_lo + (speed_hi - speed_lo) * rng.uniform();
    k.vx = speed * std::cos(heading);
    k.vy = speed * std::sin(heading);
    out.push_back(k);
  }
  return out;
}

KinematicTrace highway_kinematics(std::size_t n, double spacing, double speed_lo,
                                  double speed_hi, std::uint64_t seed) {
  if (speed_hi < speed_lo) throw ScenarioError("speed range must satisfy lo <= hi");
  SplitMix64 rng(seed);
  KinematicTrace out;
  for (std::size_t i = 0; i < n; ++i) {
    Kinematics k;
    k.id = static_cast<NodeId>(i + 1);
    k.x = spacing * static_cast<double>(i);
    const double speed = speed_lo + (speed_hi - speed_lo) * rng.uniform();
    k.vx = rng.uniform() < 0.5 ? speed : -speed;
    out.push_back(k);
  }
  return out;
}

Topology tree_from_parents(const std::vector<NodeId>& parents, std::uint64_t seed,
                           NoiseRange noise) {
  Topology topo(1);
  for (std::size_t k = 0; k < parents.size(); ++k) topo.add_node(static_cast<NodeId>(k + 2));
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const NodeId child = static_cast<NodeId>(k + 2);
    if (parents[k] < 1 || parents[k] >= child) {
      throw ScenarioError("parent of node " + node_str(child) + " must precede it");
    }
    const Edge e(parents[k], child);
    topo.add_edge(e.lo, e.hi, {draw_noise_variance(seed, e, noise), 1.0});
  }
  return topo;
}

Topology generate_tree(std::size_t n, std::uint64_t seed, NoiseRange noise) {
  if (n < 2) throw ScenarioError("tree needs n >= 2");
  SplitMix64 rng(derive_seed(seed, Stream::topology));
  std::vector<NodeId> parents;
  for (std::size_t child = 2; child <= n; ++child) {
    std::uniform_int_distribution<NodeId> pick(1, static_cast<NodeId>(child - 1));
    parents.push_back(pick(rng));
  }
  return tree_from_parents(parents, derive_seed(seed, Stream::noise_variance), noise);
}

Topology generate_connected(std::size_t n, double extra_edge_probability, std::uint64_t seed,
                            NoiseRange noise) {
  Topology topo = generate_tree(n, seed, noise);
  SplitMix64 rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::topology), 2}));
  const auto noise_seed = derive_seed(seed, Stream::noise_variance);
  for (NodeId a = 1; a <= n; ++a) {
    for (NodeId b = a + 1; b <= n; ++b) {
      const bool extra = rng.uniform() < extra_edge_probability;
      if (extra && !topo.has_edge(a, b)) {
        topo.add_edge(a, b, {draw_noise_variance(noise_seed, Edge(a, b), noise), 1.0});
      }
    }
  }
  return topo;
}

Topology generate_complete(std::size_t n, std::uint64_t seed, NoiseRange noise) {
  if (n < 2) throw ScenarioError("complete graph needs n >= 2");
  Topology topo(1);
  for (NodeId k = 2; k <= n; ++k) topo.add_node(k);
  for (NodeId a = 1; a <= n; ++a) {
    for (NodeId b = a + 1; b <= n; ++b) {
      topo.add_edge(a, b, {draw_noise_variance(seed, Edge(a, b), noise), 1.0});
    }
  }
  return topo;
}

// --------------------------------------------------------------------- truth

std::map<NodeId, double> projected_speeds(const KinematicTrace& trace) {
  std::map<NodeId, double> out;
  for (const auto& k : trace) out[k.id] = k.vx;
  return out;
}

GroundTruth synthesize_truth(const Topology& topology, const TruthMode& mode,
                             double anchor_value, std::uint64_t seed) {
  GroundTruth truth;
  if (const auto* u = std::get_if<UniformTruth>(&mode)) {
    if (!(u->lo <= u->hi)) throw ScenarioError("truth range is empty");
    for (NodeId n : topology.nodes()) {
      SplitMix64 rng(derive_seed(seed, {n}));
      truth.offsets[n] = u->lo + (u->hi - u->lo) * rng.uniform();
    }
    truth.anchor_value = anchor_value;
    truth.offsets[topology.anchor()] = anchor_value;
    return truth;
  }
  const auto& k = std::get<KinematicTruth>(mode);
  if (!(k.carrier_hz > 0.0) || !(k.wave_speed > 0.0)) {
    throw ScenarioError("kinematic truth needs positive carrier frequency and wave speed");
  }
  for (NodeId n : topology.nodes()) {
    auto it = k.projected_speed.find(n);
    if (it == k.projected_speed.end()) {
      throw ScenarioError("kinematic truth: no speed for node " + node_str(n));
    }
    truth.offsets[n] = it->second * k.carrier_hz / k.wave_speed;
  }
  truth.anchor_value = truth.offsets.at(topology.anchor());
  return truth;
}

// -------------------------------------------------------------- measurements

double sample_edge(Edge e, double noiseless_value, double noise_variance, std::uint64_t seed,
                   bool noiseless) {
  if (noiseless) return noiseless_value;
  SplitMix64 rng(derive_seed(seed, {e.lo, e.hi}));
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_variance));
  return noiseless_value + gauss(rng);
}

MeasurementSet sample_measurements(const Topology& topology, const GroundTruth& truth,
                                   std::uint64_t seed, MeasurementOptions options) {
  MeasurementSet out;
  out.seed = seed;
  out.noise_description = options.noiseless ? "noiseless" : "gaussian per-edge variance";
  for (const auto& [e, params] : topology.edges()) {
    double exact = 0.0;
    if (options.pairwise_override) {
      auto it = options.pairwise_override->find(e);
      if (it == options.pairwise_override->end()) {
        throw ScenarioError("pairwise override misses edge {" + node_str(e.lo) + "," +
                            node_str(e.hi) + "}");
      }
      exact = it->second;
    } else {
      auto a = truth.offsets.find(e.lo);
      auto b = truth.offsets.find(e.hi);
      if (a == truth.offsets.end() || b == truth.offsets.end()) {
        throw ScenarioError("truth has no entry for an endpoint of edge {" + node_str(e.lo) +
                            "," + node_str(e.hi) + "}");
      }
      exact = a->second + b->second;
    }
    out.values[e] = sample_edge(e, exact, params.noise_variance, seed, options.noiseless);
  }
  return out;
}

std::map<Edge, double> radial_pairwise_shift(const Topology& topology,
                                             const KinematicTrace& trace, double carrier_hz,
                                             double wave_speed) {
  std::map<NodeId, Kinematics> by_id;
  for (const auto& k : trace) by_id[k.id] = k;
  std::map<Edge, double> out;
  for (const auto& [e, params] : topology.edges()) {
    const auto& a = by_id.at(e.lo);
    const auto& b = by_id.at(e.hi);
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double dist = std::hypot(dx, dy);
    // Closing speed: positive when the vehicles approach each other.
    const double closing =
        dist > 0.0 ? -((b.vx - a.vx) * dx + (b.vy - a.vy) * dy) / dist : 0.0;
    out[e] = closing * carrier_hz / wave_speed;
  }
  return out;
}

// -------------------------------------------------------------------- events

std::pair<Topology, GroundTruth> apply_event(const Topology& topology, const GroundTruth& truth,
                                             const DynamicEvent& event) {
  Topology topo = topology;
  GroundTruth gt = truth;
  if (const auto* leave = std::get_if<Leave>(&event.change)) {
    if (leave->node == topo.anchor()) throw ScenarioError("the anchor cannot leave");
    topo.remove_node(leave->node);
    gt.offsets.erase(leave->node);
    return {std::move(topo), std::move(gt)};
  }
  const auto& join = std::get<Join>(event.change);
  if (topo.has_node(join.node)) {
    throw ScenarioError("join of node " + node_str(join.node) + ": id already present");
  }
  topo.add_node(join.node);
  for (const auto& [peer, params] : join.links) topo.add_edge(join.node, peer, params);
  gt.offsets[join.node] = join.offset;
  return {std::move(topo), std::move(gt)};
}

DynamicEvent inverse_event(const Topology& topology, const GroundTruth& truth,
                           const DynamicEvent& event) {
  DynamicEvent inv;
  inv.at_iteration = event.at_iteration;
  if (const auto* leave = std::get_if<Leave>(&event.change)) {
    Join join;
    join.node = leave->node;
    for (NodeId peer : topology.neighbors(leave->node)) {
      join.links.emplace_back(peer, topology.link(leave->node, peer));
    }
    join.offset = truth.offsets.at(leave->node);
    inv.change = join;
  } else {
    inv.change = Leave{std::get<Join>(event.change).node};
  }
  return inv;
}

}  // namespace doppler::scenario
