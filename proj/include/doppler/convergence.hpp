#pragma once

#include <vector>

#include "doppler/gaussian.hpp"
#include "doppler/problem.hpp"

namespace doppler {

/// Per-node |mean - previous mean| over reachable non-anchor nodes. A node
/// that is uninformative now or was uninformative before gets +inf; the
/// anchor and unreachable nodes get 0.
std::vector<double> belief_deltas(const Problem& problem, const std::vector<Belief>& current,
                                  const std::vector<Belief>& previous);

/// True iff every reachable non-anchor node is informative and the largest
/// delta is below `threshold`.
bool has_converged(const Problem& problem, const std::vector<Belief>& current,
                   const std::vector<Belief>& previous, double threshold);

}  // namespace doppler
