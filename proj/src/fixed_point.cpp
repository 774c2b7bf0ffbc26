#include "doppler/fixed_point.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "doppler/gaussian.hpp"
#include "doppler/simd/kernels.hpp"

namespace doppler::lsbp {

namespace {

// Dense variance per node: 0 for the anchor, 1/p otherwise.
std::vector<double> variances_from_precision(const Problem& problem, std::span<const double> p) {
  if (p.size() + 1 != problem.size()) {
    throw EngineError("precision vector has " + std::to_string(p.size()) + " entries, expected " +
                      std::to_string(problem.size() - 1));
  }
  std::vector<double> var(problem.size(), 0.0);
  std::size_t k = 0;
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (problem.is_anchor(u)) continue;
    var[u] = p[k] > 0.0 ? 1.0 / p[k] : kInfinity;
    ++k;
  }
  return var;
}

}  // namespace

const char* to_string(Feasibility f) {
  switch (f) {
    case Feasibility::increasing:
      return "increasing";
    case Feasibility::decreasing:
      return "decreasing";
    case Feasibility::infeasible:
      return "infeasible";
  }
  return "?";
}

std::vector<NodeId> non_anchor_nodes(const Problem& problem) {
  std::vector<NodeId> out;
  out.reserve(problem.size());
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (!problem.is_anchor(u)) out.push_back(problem.id(u));
  }
  return out;
}

PrecisionVector uniform_precision(const Problem& problem, double precision) {
  PrecisionVector out;
  out.nodes = non_anchor_nodes(problem);
  out.values.assign(out.nodes.size(), precision);
  return out;
}

std::vector<double> variance_map(const Problem& problem, std::span<const double> p) {
  const std::vector<double> var = variances_from_precision(problem, p);
  std::vector<double> out;
  out.reserve(p.size());
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (problem.is_anchor(u)) continue;
    out.push_back(simd::inverse_sum_gather(problem.noise_variance(u), problem.neighbors(u), var));
  }
  return out;
}

Feasibility check_feasible_init(const Problem& problem, std::span<const double> p0) {
  for (double v : p0) {
    if (!(v >= 0.0)) throw EngineError("precision entries must be >= 0");
  }
  const auto next = variance_map(problem, p0);
  bool up = true;
  bool down = true;
  for (std::size_t k = 0; k < p0.size(); ++k) {
    if (next[k] < p0[k]) up = false;
    if (next[k] > p0[k]) down = false;
  }
  if (up) return Feasibility::increasing;
  if (down) return Feasibility::decreasing;
  return Feasibility::infeasible;
}

FixedPointResult variance_fixed_point(const Problem& problem, std::span<const double> p0,
                                      double tol, std::size_t max_iter, bool keep_history) {
  FixedPointResult out;
  out.precision.assign(p0.begin(), p0.end());
  if (keep_history) out.history.push_back(out.precision);
  for (std::size_t l = 1; l <= max_iter; ++l) {
    std::vector<double> next = variance_map(problem, out.precision);
    const double change = simd::max_abs_diff(next, out.precision);
    out.precision = std::move(next);
    out.iterations = l;
    if (keep_history) out.history.push_back(out.precision);
    if (change < tol) return out;
  }
  throw EngineError("variance recursion did not reach tolerance " + std::to_string(tol) +
                    " within " + std::to_string(max_iter) + " iterations");
}

double KMatrix::row_sum(std::size_t row) const {
  double s = 0.0;
  for (std::size_t c = 0; c < n; ++c) s += at(row, c);
  return s;
}

KMatrix build_k_matrix(const Problem& problem, std::span<const double> p_star) {
  const std::vector<double> var = variances_from_precision(problem, p_star);
  KMatrix k;
  k.nodes = non_anchor_nodes(problem);
  k.n = k.nodes.size();
  k.entries.assign(k.n * k.n, 0.0);
  k.xi.assign(k.n, 0.0);
  k.offset.assign(k.n, 0.0);
  auto column = [&](std::size_t u) { return u < problem.anchor() ? u : u - 1; };
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (problem.is_anchor(u)) continue;
    const std::size_t row = column(u);
    if (problem.degree(u) == 0) {
      throw EngineError("node " + std::to_string(problem.id(u)) + " has no neighbors");
    }
    double total = 0.0;
    double weighted_r = 0.0;
    double anchor_weight = 0.0;
    for (std::size_t s = problem.slot_begin(u); s < problem.slot_end(u); ++s) {
      const auto v = static_cast<std::size_t>(problem.neighbor_at(s));
      const double w = 1.0 / (problem.noise_variance_at(s) + var[v]);
      total += w;
      weighted_r += w * problem.measurement_at(s);
      if (problem.is_anchor(v)) {
        anchor_weight += w;
      } else {
        k.entries[row * k.n + column(v)] = w;
      }
    }
    if (!(total > 0.0)) {
      throw EngineError("node " + std::to_string(problem.id(u)) + " has zero belief precision");
    }
    for (std::size_t c = 0; c < k.n; ++c) k.entries[row * k.n + c] /= total;
    k.xi[row] = weighted_r / total;
    k.offset[row] = k.xi[row] - (anchor_weight / total) * problem.anchor_value();
  }
  return k;
}

std::vector<double> iterate_means(const KMatrix& k, std::span<const double> init, double tol,
                                  std::size_t max_iter, std::size_t* iterations) {
  std::vector<double> mu(init.begin(), init.end());
  std::vector<double> km(k.n);
  std::vector<double> next(k.n);
  for (std::size_t l = 1; l <= max_iter; ++l) {
    simd::matvec(k.entries, mu, km);
    for (std::size_t i = 0; i < k.n; ++i) next[i] = k.offset[i] - km[i];
    const double change = simd::max_abs_diff(next, mu);
    mu.swap(next);
    if (iterations) *iterations = l;
    if (change < tol) return mu;
  }
  throw EngineError("mean iteration did not reach tolerance within " + std::to_string(max_iter) +
                    " iterations");
}

std::vector<double> solve_mean_fixed_point(const KMatrix& k) {
  const auto n = static_cast<Eigen::Index>(k.n);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      system(r, c) += k.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(k.offset.data(), n);
  const Eigen::VectorXd mu = system.partialPivLu().solve(rhs);
  return {mu.data(), mu.data() + mu.size()};
}

}  // namespace doppler::lsbp
