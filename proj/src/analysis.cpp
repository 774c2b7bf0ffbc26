#include "doppler/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <utility>

#include <Eigen/Dense>

#include "doppler/rng.hpp"
#include "doppler/simd/kernels.hpp"

namespace doppler::analysis {

namespace {

// Every MSE in the project funnels through here so that oracle and engine
// numbers are computed identically.
double mse_core(const std::vector<std::pair<double, double>>& estimate_truth, double b) {
  double sum = 0.0;
  for (const auto& [est, tru] : estimate_truth) {
    const double e = (est - tru) / b;
    sum += e * e;
  }
  return sum / static_cast<double>(estimate_truth.size());
}

void check_normalization(double b) {
  if (!(b > 0.0) || !std::isfinite(b)) throw Error("MSE normalization must be positive");
}

}  // namespace

double average_mse(const std::map<NodeId, double>& estimates, const scenario::GroundTruth& truth,
                   double normalization) {
  check_normalization(normalization);
  std::vector<std::pair<double, double>> pairs;
  for (const auto& [id, est] : estimates) {
    auto it = truth.offsets.find(id);
    if (it == truth.offsets.end()) throw Error("no true offset for node " + std::to_string(id));
    pairs.emplace_back(est, it->second);
  }
  if (pairs.empty()) throw Error("no estimates to average");
  return mse_core(pairs, normalization);
}

MseReport belief_mse(const Problem& problem, const std::vector<Belief>& beliefs,
                     const scenario::GroundTruth& truth, double normalization) {
  check_normalization(normalization);
  MseReport report;
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t u = 0; u < problem.size(); ++u) {
    if (problem.is_anchor(u)) continue;
    const auto it = truth.offsets.find(problem.id(u));
    if (!problem.reachable(u) || !beliefs[u].informative() || it == truth.offsets.end()) {
      ++report.excluded;
      continue;
    }
    pairs.emplace_back(beliefs[u].mean, it->second);
  }
  report.informative = pairs.size();
  if (!pairs.empty()) report.value = mse_core(pairs, normalization);
  return report;
}

double average_mse(const Problem& problem, const std::vector<Belief>& beliefs,
                   const scenario::GroundTruth& truth, double normalization) {
  const MseReport r = belief_mse(problem, beliefs, truth, normalization);
  if (r.informative == 0) throw Error("no informative non-anchor node");
  return r.value;
}

double dense_spectral_radius(std::span<const double> a, std::size_t n) {
  if (n == 0) return 0.0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a[r * n + c];
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SpectralRadius spectral_radius(std::span<const double> a, std::size_t n, double tol,
                               std::size_t max_iter) {
  if (a.size() != n * n) throw Error("spectral_radius needs a square matrix");
  SpectralRadius out;
  if (n == 0) {
    out.power_converged = true;
    return out;
  }
  for (double v : a) {
    if (!(v >= 0.0)) throw Error("spectral_radius expects a nonnegative matrix");
  }
  // For nonnegative A the Perron root of A + I is rho(A) + 1, and the shift
  // makes the iteration primitive on irreducible blocks.
  std::vector<double> x(n, 1.0);
  std::vector<double> y(n);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    simd::matvec(a, x, y);
    double lo = kInfinity;
    double hi = 0.0;
    double top = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += x[i];
      const double ratio = y[i] / x[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      top = std::max(top, y[i]);
    }
    out.lower = lo - 1.0;
    out.upper = hi - 1.0;
    out.iterations = it;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / top;
    if (hi - lo < tol) {
      out.power_converged = true;
      break;
    }
  }
  out.value = std::max(0.0, 0.5 * (out.lower + out.upper));
  if (n <= 50 || !out.power_converged) out.dense = dense_spectral_radius(a, n);
  if (!out.power_converged) out.value = out.dense;
  return out;
}

SpectralRadius spectral_radius(const lsbp::KMatrix& k, double tol, std::size_t max_iter) {
  return spectral_radius(k.entries, k.n, tol, max_iter);
}

Property2Report verify_property2(const Problem& problem, std::size_t trials, std::uint64_t seed,
                                 const std::vector<double>& alphas, const VarianceMap& map) {
  if (trials == 0) throw Error("variance map check needs at least one trial");
  for (double a : alphas) {
    if (!(a > 1.0)) throw Error("scalability factors must exceed 1");
  }
  const std::size_t n = problem.size() - 1;
  Property2Report report;
  report.trials = trials;

  std::vector<bool> strict(n, false);
  {
    std::size_t k = 0;
    for (std::size_t u = 0; u < problem.size(); ++u) {
      if (problem.is_anchor(u)) continue;
      for (auto v : problem.neighbors(u)) {
        if (!problem.is_anchor(static_cast<std::size_t>(v))) strict[k] = true;
      }
      ++k;
    }
  }
  const std::vector<NodeId> ids = lsbp::non_anchor_nodes(problem);
  const std::vector<double> bound = map(problem, std::vector<double>(n, kInfinity));

  auto record = [&](const char* prop, std::size_t trial, double alpha, std::size_t i,
                    const std::vector<double>& p, const std::vector<double>& q, double lhs,
                    double rhs) {
    ++report.violations;
    if (report.counterexamples.size() < 16) {
      report.counterexamples.push_back({prop, trial, alpha, ids[i], p, q, lhs, rhs});
    }
  };

  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::trial), t}));
    std::vector<double> p(n);
    std::vector<double> q(n);
    for (auto& v : p) v = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    for (std::size_t i = 0; i < n; ++i) q[i] = p[i] * rng.uniform();

    const auto fp = map(problem, p);
    for (std::size_t i = 0; i < n; ++i) {
      ++report.checks;
      const bool below = strict[i] ? fp[i] < bound[i] : fp[i] <= bound[i];
      if (!(fp[i] > 0.0) || !below) record("P2-1", t, kNaN, i, p, {}, fp[i], bound[i]);
    }
    for (double alpha : alphas) {
      std::vector<double> scaled(n);
      for (std::size_t i = 0; i < n; ++i) scaled[i] = alpha * p[i];
      const auto fs = map(problem, scaled);
      for (std::size_t i = 0; i < n; ++i) {
        ++report.checks;
        if (!(alpha * fp[i] > fs[i])) record("P2-2", t, alpha, i, p, {}, alpha * fp[i], fs[i]);
      }
    }
    const auto fq = map(problem, q);
    for (std::size_t i = 0; i < n; ++i) {
      ++report.checks;
      if (!(fp[i] >= fq[i])) record("P2-3", t, kNaN, i, p, q, fp[i], fq[i]);
    }
  }
  return report;
}

MeanIterationResult iterate_means_async(const lsbp::KMatrix& k, std::span<const double> init,
                                        const netsim::LinkModel& link, double tol,
                                        std::size_t max_iter) {
  link.validate();
  const std::size_t n = k.n;
  if (init.size() != n) throw Error("initial mean vector has the wrong length");

  struct Pending {
    std::size_t from, to;
    double value;
    std::uint64_t stamp;
  };
  // seen[i * n + j]: last value of mu_j held by node i.
  std::vector<double> seen(n * n, 0.0);
  std::vector<std::uint64_t> stamp(n * n, 0);
  std::vector<double> mu(init.begin(), init.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) seen[i * n + j] = mu[j];
  }
  std::multimap<std::uint64_t, Pending> queue;
  std::vector<double> km(n);

  auto deliver = [&](const Pending& m) {
    const std::size_t slot = m.to * n + m.from;
    if (m.stamp > stamp[slot]) {
      seen[slot] = m.value;
      stamp[slot] = m.stamp;
    }
  };

  MeanIterationResult out;
  for (std::size_t l = 1; l <= max_iter; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (k.at(i, j) == 0.0) continue;  // i does not listen to j
        const Pending m{j, i, mu[j], l};
        const auto o = netsim::draw_outcome(link, {k.nodes[j], k.nodes[i]}, l);
        if (o.kind == netsim::OutcomeKind::delivered_now) {
          deliver(m);
        } else if (o.kind == netsim::OutcomeKind::delayed) {
          queue.emplace(l + o.delay, m);
        }
      }
    }
    auto [lo, hi] = queue.equal_range(l);
    for (auto it = lo; it != hi; ++it) deliver(it->second);
    queue.erase(lo, hi);

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += k.at(i, j) * seen[i * n + j];
      km[i] = k.offset[i] - acc;
    }
    mu = km;
    out.iterations = l;

    simd::matvec(k.entries, mu, km);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      residual = std::max(residual, std::abs(mu[i] - (k.offset[i] - km[i])));
    }
    if (residual < tol) {
      out.converged = true;
      break;
    }
  }
  out.means = std::move(mu);
  return out;
}

EngineComparison compare_engines(const netsim::RunTrace& gbp, const netsim::RunTrace& lsbp,
                                 const oracle::OracleResult& oracle) {
  if (gbp.iterations.empty() || lsbp.iterations.empty()) throw Error("empty trace");
  const auto& g0 = gbp.iterations.front();
  const auto& s0 = lsbp.iterations.front();
  if (g0.n_nodes != s0.n_nodes || g0.nodes != s0.nodes || gbp.seed != lsbp.seed ||
      gbp.pdr != lsbp.pdr) {
    throw Error("traces do not describe the same scenario");
  }
  EngineComparison c;
  for (const auto& r : gbp.iterations) c.mse_gbp.push_back(r.avg_mse);
  for (const auto& r : lsbp.iterations) c.mse_lsbp.push_back(r.avg_mse);
  c.iterations_gbp = gbp.iteration_count();
  c.iterations_lsbp = lsbp.iteration_count();
  c.converged_gbp = gbp.reason == netsim::TerminationReason::threshold;
  c.converged_lsbp = lsbp.reason == netsim::TerminationReason::threshold;
  c.messages_gbp = gbp.last().messages_cumulative;
  c.messages_lsbp = lsbp.last().messages_cumulative;
  c.crlb_avg = oracle.crlb_average;
  c.final_gap_gbp = gbp.last().avg_mse - c.crlb_avg;
  c.final_gap_lsbp = lsbp.last().avg_mse - c.crlb_avg;

  const auto mg = netsim::final_means(gbp);
  const auto ms = netsim::final_means(lsbp);
  if (!mg.empty() && !ms.empty()) {
    c.max_mean_difference = 0.0;
    c.max_ml_difference_gbp = 0.0;
    c.max_ml_difference_lsbp = 0.0;
    for (const auto& [id, est] : oracle.estimates) {
      auto a = mg.find(id);
      auto b = ms.find(id);
      if (a == mg.end() || b == ms.end()) continue;
      c.max_mean_difference = std::max(c.max_mean_difference, std::abs(a->second - b->second));
      c.max_ml_difference_gbp = std::max(c.max_ml_difference_gbp, std::abs(a->second - est));
      c.max_ml_difference_lsbp = std::max(c.max_ml_difference_lsbp, std::abs(b->second - est));
    }
  }
  return c;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv_header(std::ostream& out, const std::string& config_hash) {
  out << "# config_hash=" << config_hash << '\n' << kCsvColumns << '\n';
}

void write_csv_rows(std::ostream& out, const netsim::RunTrace& trace) {
  for (const auto& r : trace.iterations) {
    out << r.iteration << ',' << trace.algorithm << ',' << format_double(trace.pdr) << ','
        << trace.seed << ',' << format_double(r.avg_mse) << ',' << format_double(r.crlb_avg)
        << ',' << format_double(r.max_delta) << ',' << r.messages_cumulative << ',' << r.n_nodes
        << '\n';
  }
}

}  // namespace doppler::analysis
