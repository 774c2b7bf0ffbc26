#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "doppler/problem.hpp"

namespace doppler::lsbp {

/// Belief precisions [P_i]^-1 of the non-anchor nodes, ascending id. Entry
/// k belongs to `nodes[k]`.
struct PrecisionVector {
  std::vector<NodeId> nodes;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Non-anchor node ids of `problem`, ascending.
std::vector<NodeId> non_anchor_nodes(const Problem& problem);

/// Same precision on every non-anchor node.
PrecisionVector uniform_precision(const Problem& problem, double precision);

/// The variance evolution map: F(p)_i = sum_j 1 / (sigma^2_ij + P_j), where
/// P_j = 1/p_j for non-anchor j (+inf when p_j = 0) and P = 0 for the
/// anchor. `p` is indexed like non_anchor_nodes(problem).
std::vector<double> variance_map(const Problem& problem, std::span<const double> p);

enum class Feasibility { increasing, decreasing, infeasible };

const char* to_string(Feasibility f);

/// Classifies p0 by one evaluation of F: F(p0) >= p0 elementwise is
/// increasing, F(p0) <= p0 decreasing, neither infeasible.
Feasibility check_feasible_init(const Problem& problem, std::span<const double> p0);

struct FixedPointResult {
  std::vector<double> precision;
  std::size_t iterations = 0;
  /// p^(0), p^(1), ... when history was requested.
  std::vector<std::vector<double>> history;
};

/// Iterates p <- F(p) until max_i |p_i^(l) - p_i^(l-1)| < tol. Throws
/// EngineError if max_iter is reached first.
FixedPointResult variance_fixed_point(const Problem& problem, std::span<const double> p0,
                                      double tol, std::size_t max_iter,
                                      bool keep_history = false);

/// Linear mean iteration at the variance fixed point: mu <- offset - K mu.
///
/// Row i of `entries` (row-major) holds K_{j,i} for the non-anchor
/// neighbors j of node i: the share of j's message precision in i's belief
/// precision. `xi` is the precision-weighted measurement average and
/// `offset` is xi with the anchor's contribution folded in.
struct KMatrix {
  std::vector<NodeId> nodes;
  std::size_t n = 0;
  std::vector<double> entries;
  std::vector<double> xi;
  std::vector<double> offset;

  double at(std::size_t row, std::size_t col) const { return entries[row * n + col]; }
  double row_sum(std::size_t row) const;
};

/// Throws EngineError for a non-anchor node without neighbors.
KMatrix build_k_matrix(const Problem& problem, std::span<const double> p_star);

/// Synchronous mean iteration from `init` until the largest change is below
/// `tol`. Returns the final means; `iterations` receives the count.
std::vector<double> iterate_means(const KMatrix& k, std::span<const double> init, double tol,
                                  std::size_t max_iter, std::size_t* iterations = nullptr);

/// Solution of (I + K) mu = offset by dense LU.
std::vector<double> solve_mean_fixed_point(const KMatrix& k);

}  // namespace doppler::lsbp
