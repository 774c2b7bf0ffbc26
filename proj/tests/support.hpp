#pragma once

#include <vector>

#include "doppler/problem.hpp"
#include "doppler/scenario.hpp"

namespace fixtures {

using namespace doppler;

inline scenario::Topology graph(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                                double variance = 1.0) {
  scenario::Topology t(1);
  for (NodeId i = 2; i <= n; ++i) t.add_node(i);
  for (auto [a, b] : edges) t.add_edge(a, b, {variance, 1.0});
  return t;
}

inline scenario::GroundTruth truth(const std::vector<double>& offsets) {
  scenario::GroundTruth g;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    g.offsets[static_cast<NodeId>(i + 1)] = offsets[i];
  }
  g.anchor_value = offsets.front();
  return g;
}

inline scenario::MeasurementSet exact(const scenario::Topology& t, const scenario::GroundTruth& g) {
  scenario::MeasurementOptions o;
  o.noiseless = true;
  return scenario::sample_measurements(t, g, 0, o);
}

struct Instance {
  scenario::Topology topology;
  scenario::GroundTruth truth;
  scenario::MeasurementSet measurements;

  Problem problem() const { return Problem(topology, measurements, truth.anchor_value); }
};

/// f = (100, 200, 300), sigma^2 = 1, noiseless: r = (300, 400, 500).
inline Instance triangle() {
  Instance x;
  x.topology = graph(3, {{1, 2}, {1, 3}, {2, 3}});
  x.truth = truth({100, 200, 300});
  x.measurements = exact(x.topology, x.truth);
  return x;
}

/// 1 - 2 - 3 with f = (1, 2, 3), noiseless.
inline Instance path3() {
  Instance x;
  x.topology = graph(3, {{1, 2}, {2, 3}});
  x.truth = truth({1, 2, 3});
  x.measurements = exact(x.topology, x.truth);
  return x;
}

/// Nine vehicles, eight edges, rooted at the anchor: 1 -> {2, 3}, 2 -> {4, 5},
/// 3 -> {6}, 5 -> {7, 8}, 6 -> {9}.
inline const std::vector<NodeId>& tree9_parents() {
  static const std::vector<NodeId> p = {1, 1, 2, 2, 3, 5, 5, 6};
  return p;
}

inline Instance tree9(std::uint64_t seed) {
  Instance x;
  x.topology = scenario::tree_from_parents(tree9_parents(), seed);
  x.truth = scenario::synthesize_truth(x.topology, scenario::UniformTruth{}, 0.0, seed + 1);
  x.measurements = scenario::sample_measurements(x.topology, x.truth, seed + 2);
  return x;
}

inline Instance random_connected(std::size_t n, double p, std::uint64_t seed) {
  Instance x;
  x.topology = scenario::generate_connected(n, p, seed);
  x.truth = scenario::synthesize_truth(x.topology, scenario::UniformTruth{}, 0.0, seed + 1);
  x.measurements = scenario::sample_measurements(x.topology, x.truth, seed + 2);
  return x;
}

}  // namespace fixtures
