#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "doppler/types.hpp"

namespace doppler::scenario {

/// Per-edge parameters: measurement noise variance (Hz^2) and the
/// probability that a transmission over the edge succeeds.
struct LinkParams {
  double noise_variance = 1.0;
  double reliability = 1.0;
  friend bool operator==(const LinkParams&, const LinkParams&) = default;
};

/// Anchored undirected graph of vehicles.
///
/// Mutators enforce the structural invariants (no self loops, no duplicate
/// edges, endpoints exist, positive variance, reliability in (0,1]) and
/// throw ScenarioError otherwise. Connectivity is not required here; the
/// engines check anchor reachability when a run starts.
class Topology {
 public:
  Topology() = default;
  explicit Topology(NodeId anchor);

  void add_node(NodeId n);
  /// Removes `n` and every incident edge. The anchor cannot be removed.
  void remove_node(NodeId n);
  void add_edge(NodeId a, NodeId b, LinkParams params);
  void remove_edge(NodeId a, NodeId b);

  bool has_node(NodeId n) const { return nodes_.count(n) != 0; }
  bool has_edge(NodeId a, NodeId b) const { return edges_.count(Edge(a, b)) != 0; }
  const LinkParams& link(NodeId a, NodeId b) const;

  NodeId anchor() const { return anchor_; }
  const std::set<NodeId>& nodes() const { return nodes_; }
  const std::map<Edge, LinkParams>& edges() const { return edges_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  /// Neighbors of `n` in ascending id order.
  std::vector<NodeId> neighbors(NodeId n) const;
  std::size_t degree(NodeId n) const;

  /// Nodes with a path to the anchor (anchor included).
  std::set<NodeId> anchor_reachable() const;
  /// Non-anchor nodes without a path to the anchor, ascending.
  std::vector<NodeId> unreachable_from_anchor() const;
  bool anchor_connected() const { return unreachable_from_anchor().empty(); }

  /// Re-checks every invariant; throws ScenarioError on the first violation.
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  NodeId anchor_ = 1;
  std::set<NodeId> nodes_;
  std::map<Edge, LinkParams> edges_;
  std::map<NodeId, std::set<NodeId>> adjacency_;
};

/// One line of a kinematic trace: planar position (m) and velocity (m/s).
struct Kinematics {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  friend bool operator==(const Kinematics&, const Kinematics&) = default;
};

using KinematicTrace = std::vector<Kinematics>;

/// Parses `id x_m y_m vx_mps vy_mps` lines; `#` starts a comment. Ids must
/// be unique and >= 1. Output is sorted by id.
KinematicTrace parse_trace(std::istream& in);
KinematicTrace load_trace(const std::string& path);
void write_trace(std::ostream& out, const KinematicTrace& trace);

struct GroundTruth {
  std::map<NodeId, double> offsets;
  double anchor_value = 0.0;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct MeasurementSet {
  std::map<Edge, double> values;
  std::uint64_t seed = 0;
  std::string noise_description;

  double at(NodeId a, NodeId b) const;
  friend bool operator==(const MeasurementSet&, const MeasurementSet&) = default;
};

struct Leave {
  NodeId node = 0;
};

struct Join {
  NodeId node = 0;
  std::vector<std::pair<NodeId, LinkParams>> links;
  double offset = 0.0;
};

struct DynamicEvent {
  std::uint64_t at_iteration = 1;
  std::variant<Leave, Join> change;
};

/// Throws ScenarioError unless events are sorted by iteration and every
/// at_iteration is >= 1.
void validate_event_order(const std::vector<DynamicEvent>& events);

// ---------------------------------------------------------------- generators

struct NoiseRange {
  double lo = 0.5;
  double hi = 2.0;
};

struct GeometricParams {
  double width = 3000.0;
  double height = 4000.0;
  double comm_range = 800.0;
  NoiseRange noise;
  double reliability = 1.0;
};

/// Disk graph over the positions in `trace`: edge {i,j} iff the Euclidean
/// distance is <= comm_range. The smallest id is the anchor. Noise
/// variances are drawn per edge from `seed`.
Topology generate_geometric(const KinematicTrace& trace, const GeometricParams& params,
                            std::uint64_t seed);

/// Uniform positions in the area, headings uniform, speeds uniform in
/// [speed_lo, speed_hi]. Ids are 1..n.
KinematicTrace random_kinematics(std::size_t n, double width, double height, double speed_lo,
                                 double speed_hi, std::uint64_t seed);

/// Vehicles 1..n along the x axis with the given spacing, each driving in
/// +x or -x at a speed in [speed_lo, speed_hi].
KinematicTrace highway_kinematics(std::size_t n, double spacing, double speed_lo,
                                  double speed_hi, std::uint64_t seed);

/// Random recursive tree rooted at the anchor (node 1).
Topology generate_tree(std::size_t n, std::uint64_t seed, NoiseRange noise = {});

/// Tree given by a parent table: `parents[k]` is the parent of node k+2.
Topology tree_from_parents(const std::vector<NodeId>& parents, std::uint64_t seed,
                           NoiseRange noise = {});

/// Random spanning tree plus each remaining pair with probability
/// `extra_edge_probability`. Always anchor-connected.
Topology generate_connected(std::size_t n, double extra_edge_probability, std::uint64_t seed,
                            NoiseRange noise = {});

/// Complete graph on 1..n.
Topology generate_complete(std::size_t n, std::uint64_t seed, NoiseRange noise = {});

/// Draws a fresh noise variance for edge {a,b} from the generator stream.
double draw_noise_variance(std::uint64_t seed, Edge e, NoiseRange noise);

// --------------------------------------------------------------------- truth

struct UniformTruth {
  double lo = -500.0;
  double hi = 500.0;
};

/// f_i = v_i * f0 / c with v_i the node's velocity projected on the x axis.
struct KinematicTruth {
  double carrier_hz = 5.9e9;
  double wave_speed = 3.0e8;
  std::map<NodeId, double> projected_speed;
};

using TruthMode = std::variant<UniformTruth, KinematicTruth>;

/// Uniform mode forces offsets[anchor] = anchor_value. Kinematic mode takes
/// the anchor's own kinematic offset as the anchor value.
GroundTruth synthesize_truth(const Topology& topology, const TruthMode& mode,
                             double anchor_value, std::uint64_t seed);

/// x-axis projected speeds of every entry in the trace.
std::map<NodeId, double> projected_speeds(const KinematicTrace& trace);

// -------------------------------------------------------------- measurements

struct MeasurementOptions {
  /// Produce exact sums; used by oracle tests.
  bool noiseless = false;
  /// When set, replaces f_i + f_j as the noiseless value of an edge. Used by
  /// the kinematic mismatch mode.
  const std::map<Edge, double>* pairwise_override = nullptr;
};

/// r_{i,j} = f_i + f_j + n_{i,j}, n ~ N(0, sigma^2_{i,j}) from a per-edge
/// stream derived from `seed`.
MeasurementSet sample_measurements(const Topology& topology, const GroundTruth& truth,
                                   std::uint64_t seed, MeasurementOptions options = {});

/// Draws the measurement of a single edge with the same per-edge stream
/// layout as sample_measurements.
double sample_edge(Edge e, double noiseless_value, double noise_variance, std::uint64_t seed,
                   bool noiseless);

/// Per-edge Doppler shift from the radial closing speed of the two vehicles,
/// v_{i,j} f0 / c. Not decomposable as f_i + f_j in general.
std::map<Edge, double> radial_pairwise_shift(const Topology& topology,
                                             const KinematicTrace& trace, double carrier_hz,
                                             double wave_speed);

// -------------------------------------------------------------------- events

/// Leave removes the node and its edges and drops its truth entry; join adds
/// the node, its links and its truth entry.
std::pair<Topology, GroundTruth> apply_event(const Topology& topology, const GroundTruth& truth,
                                             const DynamicEvent& event);

/// Builds the event that undoes `event` on `topology` (leave <-> join with
/// the node's current links and offset).
DynamicEvent inverse_event(const Topology& topology, const GroundTruth& truth,
                           const DynamicEvent& event);

}  // namespace doppler::scenario
