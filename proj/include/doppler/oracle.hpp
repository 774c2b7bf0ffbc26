#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "doppler/scenario.hpp"

namespace doppler::oracle {

/// Stacked pairwise-sum model r = a1 f1 + A f + n, n ~ N(0, R).
///
/// Rows follow ascending (i, j) edge order; columns of A follow ascending
/// non-anchor node id. Nodes without a path to the anchor are left out and
/// listed in `excluded`, together with the edges among them.
struct LinearSystem {
  NodeId anchor = 1;
  std::vector<Edge> row_order;
  std::vector<NodeId> columns;
  Eigen::VectorXd a1;
  Eigen::MatrixXd A;
  Eigen::VectorXd noise_variance;  // diagonal of R
  Eigen::VectorXd r;
  std::vector<NodeId> excluded;
};

LinearSystem build_system(const scenario::Topology& topology,
                          const scenario::MeasurementSet& measurements);

/// Factorizes A^T R^-1 A once; reusable across measurement vectors that
/// share the same design and noise covariance.
class MlSolver {
 public:
  /// Throws SingularSystemError when the normal matrix is singular to a
  /// relative pivot tolerance of 1e-12.
  explicit MlSolver(const LinearSystem& system);

  /// (A^T R^-1 A)^-1 A^T R^-1 (r - f1 a1), in column order.
  Eigen::VectorXd solve(const Eigen::VectorXd& r, double anchor_value) const;
  /// diag((A^T R^-1 A)^-1), in column order.
  const Eigen::VectorXd& crlb() const { return crlb_; }

 private:
  Eigen::MatrixXd weighted_design_t_;  // A^T R^-1
  Eigen::VectorXd a1_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  Eigen::VectorXd crlb_;
};

std::map<NodeId, double> ml_estimate(const LinearSystem& system, double anchor_value);
std::map<NodeId, double> crlb(const LinearSystem& system);

/// Everything the simulator records from the centralized reference.
struct OracleResult {
  std::map<NodeId, double> estimates;
  std::map<NodeId, double> crlb;
  std::vector<NodeId> excluded;
  double crlb_average = 0.0;
};

OracleResult solve(const scenario::Topology& topology,
                   const scenario::MeasurementSet& measurements, double anchor_value);

}  // namespace doppler::oracle
