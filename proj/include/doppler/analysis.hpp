#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "doppler/fixed_point.hpp"
#include "doppler/gaussian.hpp"
#include "doppler/netsim.hpp"
#include "doppler/oracle.hpp"
#include "doppler/problem.hpp"
#include "doppler/scenario.hpp"
#include "doppler/trace.hpp"

namespace doppler::analysis {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// --------------------------------------------------------------------- MSE

/// (1/N') sum ((estimate - truth) / B)^2 over the given non-anchor
/// estimates. Throws Error when B <= 0 or nothing is left to average.
double average_mse(const std::map<NodeId, double>& estimates, const scenario::GroundTruth& truth,
                   double normalization = 1.0);

struct MseReport {
  double value = kNaN;
  std::size_t informative = 0;
  std::size_t excluded = 0;  // uninformative or cut off from the anchor
};

/// MSE of the informative, anchor-reachable non-anchor beliefs. Never throws
/// for an empty set; `value` stays NaN instead.
MseReport belief_mse(const Problem& problem, const std::vector<Belief>& beliefs,
                     const scenario::GroundTruth& truth, double normalization = 1.0);

/// Throwing form of belief_mse.
double average_mse(const Problem& problem, const std::vector<Belief>& beliefs,
                   const scenario::GroundTruth& truth, double normalization = 1.0);

// ---------------------------------------------------------- spectral radius

struct SpectralRadius {
  double value = 0.0;
  double lower = 0.0;  // Collatz-Wielandt bounds of the last power step
  double upper = 0.0;
  std::size_t iterations = 0;
  bool power_converged = false;
  double dense = kNaN;  // eigen-solver value, computed for n <= 50
};

/// Largest |eigenvalue| of a nonnegative square matrix (row-major n x n).
/// Power iteration on (A + I); falls back to the dense eigen-solver when the
/// bounds do not close to `tol` within `max_iter` steps.
SpectralRadius spectral_radius(std::span<const double> a, std::size_t n, double tol = 1e-10,
                               std::size_t max_iter = 200000);
SpectralRadius spectral_radius(const lsbp::KMatrix& k, double tol = 1e-10,
                               std::size_t max_iter = 200000);

double dense_spectral_radius(std::span<const double> a, std::size_t n);

// -------------------------------------------------------------- property 2

using VarianceMap = std::function<std::vector<double>(const Problem&, std::span<const double>)>;

struct Counterexample {
  std::string property;  // "P2-1", "P2-2" or "P2-3"
  std::size_t trial = 0;
  double alpha = kNaN;
  NodeId node = 0;
  std::vector<double> p;
  std::vector<double> q;  // second vector of the monotonicity pair
  double lhs = 0.0;
  double rhs = 0.0;
};

struct Property2Report {
  std::size_t trials = 0;
  std::size_t checks = 0;
  std::size_t violations = 0;
  std::vector<Counterexample> counterexamples;  // first few, verbatim

  bool passed() const { return violations == 0; }
};

/// Randomized elementwise checks of the variance map on `problem`:
///  P2-1  0 < F(p) and F(p) <= B, with B_i = sum_j 1/sigma^2_ij the value
///        at zero neighbor variance; strict below B for nodes that have a
///        non-anchor neighbor;
///  P2-2  alpha F(p) > F(alpha p) for every alpha (> 1);
///  P2-3  p >= q implies F(p) >= F(q).
Property2Report verify_property2(const Problem& problem, std::size_t trials, std::uint64_t seed,
                                 const std::vector<double>& alphas = {1.5, 2.0, 10.0},
                                 const VarianceMap& map = lsbp::variance_map);

// ----------------------------------------------------------- mean iteration

struct MeanIterationResult {
  std::vector<double> means;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Mean iteration mu_i <- offset_i - sum_j K_ij mu_j where node i reads the
/// last value of mu_j that reached it over a lossy, delayed link. Stops once
/// the synchronous residual of the true state is below `tol`.
MeanIterationResult iterate_means_async(const lsbp::KMatrix& k, std::span<const double> init,
                                        const netsim::LinkModel& link, double tol,
                                        std::size_t max_iter);

// ------------------------------------------------------ engine comparison

struct EngineComparison {
  std::vector<double> mse_gbp;
  std::vector<double> mse_lsbp;
  std::uint64_t iterations_gbp = 0;
  std::uint64_t iterations_lsbp = 0;
  bool converged_gbp = false;
  bool converged_lsbp = false;
  std::uint64_t messages_gbp = 0;
  std::uint64_t messages_lsbp = 0;
  double crlb_avg = kNaN;
  double final_gap_gbp = kNaN;   // final MSE - CRLB average
  double final_gap_lsbp = kNaN;
  double max_mean_difference = kNaN;  // between the two engines' final means
  double max_ml_difference_gbp = kNaN;
  double max_ml_difference_lsbp = kNaN;
};

/// Throws Error when the traces do not describe the same scenario.
EngineComparison compare_engines(const netsim::RunTrace& gbp, const netsim::RunTrace& lsbp,
                                 const oracle::OracleResult& oracle);

// --------------------------------------------------------------------- CSV

inline constexpr const char* kCsvColumns =
    "iteration,algorithm,pdr,seed,avg_mse,crlb_avg,max_delta,msgs_cumulative,n_nodes";

/// `# config_hash=<hash>` followed by the column line.
void write_csv_header(std::ostream& out, const std::string& config_hash);
void write_csv_rows(std::ostream& out, const netsim::RunTrace& trace);

/// Shortest round-trip text of a double; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

}  // namespace doppler::analysis
