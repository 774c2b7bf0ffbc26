#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace doppler {

/// Vehicle identifier. Ids start at 1; the anchor is conventionally node 1.
using NodeId = std::uint32_t;

/// Undirected edge stored with `lo < hi`.
struct Edge {
  NodeId lo = 0;
  NodeId hi = 0;

  Edge() = default;
  Edge(NodeId a, NodeId b) : lo(a < b ? a : b), hi(a < b ? b : a) {}

  bool joins(NodeId n) const { return lo == n || hi == n; }
  NodeId other(NodeId n) const { return n == lo ? hi : lo; }

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Ordered (sender, receiver) pair.
struct DirectedLink {
  NodeId from = 0;
  NodeId to = 0;
  friend auto operator<=>(const DirectedLink&, const DirectedLink&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid topology, truth, measurement or event input.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// Normal matrix of the centralized estimator is singular.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Invalid engine or simulator input.
class EngineError : public Error {
 public:
  using Error::Error;
};

}  // namespace doppler
