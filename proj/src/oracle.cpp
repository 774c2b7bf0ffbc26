#include "doppler/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace doppler::oracle {

namespace {

constexpr double kSingularTolerance = 1e-12;

std::string join_ids(const std::vector<NodeId>& ids) {
  std::string out;
  for (NodeId n : ids) {
    if (!out.empty()) out += ",";
    out += std::to_string(n);
  }
  return out;
}

}  // namespace

LinearSystem build_system(const scenario::Topology& topology,
                          const scenario::MeasurementSet& measurements) {
  topology.validate();
  LinearSystem sys;
  sys.anchor = topology.anchor();
  const auto reach = topology.anchor_reachable();
  for (NodeId n : topology.nodes()) {
    if (n == sys.anchor) continue;
    if (reach.count(n)) {
      sys.columns.push_back(n);
    } else {
      sys.excluded.push_back(n);
    }
  }
  // std::map over Edge iterates in ascending (lo, hi) order.
  for (const auto& [e, params] : topology.edges()) {
    if (reach.count(e.lo) && reach.count(e.hi)) sys.row_order.push_back(e);
  }
  const auto rows = static_cast<Eigen::Index>(sys.row_order.size());
  const auto cols = static_cast<Eigen::Index>(sys.columns.size());
  sys.a1 = Eigen::VectorXd::Zero(rows);
  sys.A = Eigen::MatrixXd::Zero(rows, cols);
  sys.noise_variance.resize(rows);
  sys.r.resize(rows);
  auto column_of = [&](NodeId n) {
    auto it = std::lower_bound(sys.columns.begin(), sys.columns.end(), n);
    return static_cast<Eigen::Index>(it - sys.columns.begin());
  };
  for (Eigen::Index row = 0; row < rows; ++row) {
    const Edge e = sys.row_order[static_cast<std::size_t>(row)];
    for (NodeId end : {e.lo, e.hi}) {
      if (end == sys.anchor) {
        sys.a1(row) = 1.0;
      } else {
        sys.A(row, column_of(end)) = 1.0;
      }
    }
    sys.noise_variance(row) = topology.link(e.lo, e.hi).noise_variance;
    sys.r(row) = measurements.at(e.lo, e.hi);
  }
  return sys;
}

MlSolver::MlSolver(const LinearSystem& system) : a1_(system.a1) {
  const Eigen::VectorXd inv_noise = system.noise_variance.cwiseInverse();
  weighted_design_t_ = system.A.transpose() * inv_noise.asDiagonal();
  const Eigen::MatrixXd normal = weighted_design_t_ * system.A;
  if (normal.rows() == 0) return;
  ldlt_.compute(normal);
  const auto d = ldlt_.vectorD();
  const double scale = d.cwiseAbs().maxCoeff();
  if (ldlt_.info() != Eigen::Success || !(scale > 0.0) ||
      d.minCoeff() <= kSingularTolerance * scale) {
    throw SingularSystemError("normal matrix is singular: anchor-disconnected component among "
                              "nodes {" + join_ids(system.columns) + "}");
  }
  const Eigen::MatrixXd inv = ldlt_.solve(Eigen::MatrixXd::Identity(normal.rows(), normal.cols()));
  crlb_ = inv.diagonal();
}

Eigen::VectorXd MlSolver::solve(const Eigen::VectorXd& r, double anchor_value) const {
  if (weighted_design_t_.rows() == 0) return {};
  return ldlt_.solve(weighted_design_t_ * (r - anchor_value * a1_));
}

std::map<NodeId, double> ml_estimate(const LinearSystem& system, double anchor_value) {
  const MlSolver solver(system);
  const Eigen::VectorXd est = solver.solve(system.r, anchor_value);
  std::map<NodeId, double> out;
  for (std::size_t k = 0; k < system.columns.size(); ++k) {
    out[system.columns[k]] = est(static_cast<Eigen::Index>(k));
  }
  return out;
}

std::map<NodeId, double> crlb(const LinearSystem& system) {
  const MlSolver solver(system);
  std::map<NodeId, double> out;
  for (std::size_t k = 0; k < system.columns.size(); ++k) {
    out[system.columns[k]] = solver.crlb()(static_cast<Eigen::Index>(k));
  }
  return out;
}

OracleResult solve(const scenario::Topology& topology,
                   const scenario::MeasurementSet& measurements, double anchor_value) {
  const LinearSystem sys = build_system(topology, measurements);
  const MlSolver solver(sys);
  const Eigen::VectorXd est = solver.solve(sys.r, anchor_value);
  OracleResult out;
  out.excluded = sys.excluded;
  double total = 0.0;
  for (std::size_t k = 0; k < sys.columns.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    out.estimates[sys.columns[k]] = est(idx);
    out.crlb[sys.columns[k]] = solver.crlb()(idx);
    total += solver.crlb()(idx);
  }
  out.crlb_average = sys.columns.empty() ? 0.0 : total / static_cast<double>(sys.columns.size());
  return out;
}

}  // namespace doppler::oracle
