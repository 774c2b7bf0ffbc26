#include <algorithm>
#include <cmath>

#include "doppler/analysis.hpp"
#include "doppler/cli/commands.hpp"
#include "doppler/fixed_point.hpp"
#include "doppler/oracle.hpp"
#include "doppler/rng.hpp"

namespace doppler::cli {

using json = nlohmann::ordered_json;

json SuiteReport::to_json() const {
  json out = {{"suite", suite}, {"passed", passed}, {"checks", checks}, {"details", details}};
  out["failures"] = failures;
  return out;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"property2", "theorem1", "theorem2",
                                                 "tree-exactness", "def1"};
  return names;
}

namespace {

struct RandomInstance {
  scenario::Topology topology;
  scenario::GroundTruth truth;
  scenario::MeasurementSet measurements;
};

/// Anchor-connected graph with 3..max_n nodes and a random density.
RandomInstance random_instance(std::uint64_t seed, std::size_t max_n) {
  SplitMix64 rng(derive_seed(seed, Stream::topology));
  const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_n - 2));
  const double p = 0.3 * rng.uniform();
  RandomInstance out;
  out.topology = scenario::generate_connected(n, p, seed);
  out.truth = scenario::synthesize_truth(out.topology, scenario::UniformTruth{}, 0.0,
                                         derive_seed(seed, Stream::truth));
  out.measurements = scenario::sample_measurements(out.topology, out.truth,
                                                   derive_seed(seed, Stream::measurement));
  return out;
}

std::uint64_t instance_seed(std::uint64_t seed, std::size_t g) {
  return derive_seed(seed, {static_cast<std::uint64_t>(Stream::trial), g});
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

json vec(const std::vector<double>& v) { return json(v); }

}  // namespace

SuiteReport verify_property2_suite(std::uint64_t seed, std::size_t graphs, std::size_t vectors) {
  SuiteReport r;
  r.suite = "property2";
  std::size_t violations = 0;
  for (std::size_t g = 0; g < graphs; ++g) {
    const auto inst = random_instance(instance_seed(seed, g), 30);
    const Problem problem(inst.topology, inst.measurements, inst.truth.anchor_value);
    const auto rep = analysis::verify_property2(problem, vectors, instance_seed(seed, g));
    r.checks += rep.checks;
    violations += rep.violations;
    for (const auto& c : rep.counterexamples) {
      if (r.failures.size() >= 20) break;
      r.failures.push_back({{"graph", g},
                            {"property", c.property},
                            {"trial", c.trial},
                            {"alpha", c.alpha},
                            {"node", c.node},
                            {"p", vec(c.p)},
                            {"q", vec(c.q)},
                            {"lhs", c.lhs},
                            {"rhs", c.rhs}});
    }
  }

  // The checker must be able to fail: negate every noise variance.
  const auto inst = random_instance(instance_seed(seed, 0), 30);
  const Problem problem(inst.topology, inst.measurements, inst.truth.anchor_value);
  std::vector<double> negated = problem.all_noise_variance();
  for (auto& v : negated) v = -v;
  const Problem mutant = problem.with_noise_unchecked(std::move(negated));
  const auto mutated = analysis::verify_property2(mutant, vectors, seed);
  r.details = {{"graphs", graphs},
               {"vectors_per_graph", vectors},
               {"alphas", {1.5, 2.0, 10.0}},
               {"violations", violations},
               {"mutation_violations", mutated.violations}};
  if (!mutated.counterexamples.empty()) {
    const auto& c = mutated.counterexamples.front();
    r.details["mutation_example"] = {
        {"property", c.property}, {"node", c.node}, {"lhs", c.lhs}, {"rhs", c.rhs}};
  }
  r.passed = violations == 0 && mutated.violations > 0;
  if (mutated.violations == 0) {
    r.failures.push_back({{"mutation", "negated noise variance produced no counterexample"}});
  }
  return r;
}

SuiteReport verify_theorem1(std::uint64_t seed, std::size_t graphs) {
  SuiteReport r;
  r.suite = "theorem1";
  const std::vector<double> init_variances = {100.0, 10.0, 1.0, 0.1, 0.01};
  double worst_spread = 0.0;
  std::size_t feasible_runs = 0;
  std::size_t infeasible_runs = 0;
  for (std::size_t g = 0; g < graphs; ++g) {
    const auto inst = random_instance(instance_seed(seed, g), 50);
    const Problem problem(inst.topology, inst.measurements, inst.truth.anchor_value);
    const std::size_t n = problem.size() - 1;
    const auto bound = lsbp::variance_map(problem, std::vector<double>(n, kInfinity));

    std::vector<std::vector<double>> starts;
    starts.emplace_back(n, 0.0);  // uninformative
    for (double v : init_variances) starts.emplace_back(n, 1.0 / v);

    std::vector<std::vector<double>> limits;
    for (std::size_t s = 0; s < starts.size(); ++s) {
      const auto kind = lsbp::check_feasible_init(problem, starts[s]);
      lsbp::FixedPointResult fp;
      try {
        fp = lsbp::variance_fixed_point(problem, starts[s], 1e-14, 100000, true);
      } catch (const EngineError& e) {
        r.failures.push_back({{"graph", g}, {"start", s}, {"error", e.what()}});
        continue;
      }
      limits.push_back(fp.precision);
      if (kind == lsbp::Feasibility::infeasible) {
        ++infeasible_runs;
        continue;
      }
      ++feasible_runs;
      const bool up = kind == lsbp::Feasibility::increasing;
      for (std::size_t l = 1; l < fp.history.size(); ++l) {
        for (std::size_t i = 0; i < n; ++i) {
          ++r.checks;
          const double prev = fp.history[l - 1][i];
          const double cur = fp.history[l][i];
          const double slack = 1e-13 * std::max(1.0, std::abs(prev));
          const bool ok = up ? cur >= prev - slack : cur <= prev + slack;
          if (!ok && r.failures.size() < 20) {
            r.failures.push_back({{"graph", g}, {"start", s}, {"iteration", l}, {"node_index", i},
                                  {"previous", prev}, {"current", cur},
                                  {"expected", up ? "nondecreasing" : "nonincreasing"}});
          }
          if (!ok) r.passed = false;
        }
      }
      if (s == 0) {
        for (const auto& p : fp.history) {
          for (std::size_t i = 0; i < n; ++i) {
            ++r.checks;
            if (p[i] > bound[i] * (1.0 + 1e-12)) {
              r.passed = false;
              if (r.failures.size() < 20) {
                r.failures.push_back({{"graph", g}, {"node_index", i}, {"value", p[i]},
                                      {"bound", bound[i]}});
              }
            }
          }
        }
      }
    }
    if (limits.size() != starts.size()) {
      r.passed = false;
      continue;
    }
    for (std::size_t s = 1; s < limits.size(); ++s) {
      ++r.checks;
      const double d = max_diff(limits[0], limits[s]);
      worst_spread = std::max(worst_spread, d);
      if (!(d <= 1e-8)) {
        r.passed = false;
        if (r.failures.size() < 20) {
          r.failures.push_back({{"graph", g}, {"start", s}, {"max_difference", d}});
        }
      }
    }
  }
  r.details = {{"graphs", graphs},
               {"starts", "uninformative, variance 100, 10, 1, 0.1, 0.01"},
               {"feasible_runs", feasible_runs},
               {"infeasible_runs", infeasible_runs},
               {"max_fixed_point_spread", worst_spread}};
  return r;
}

SuiteReport verify_theorem2(std::uint64_t seed, std::size_t graphs) {
  SuiteReport r;
  r.suite = "theorem2";
  double worst_radius = 0.0;
  double worst_gap = 0.0;
  double worst_dense_mismatch = 0.0;
  for (std::size_t g = 0; g < graphs; ++g) {
    const std::uint64_t gs = instance_seed(seed, g);
    const auto inst = random_instance(gs, 50);
    const Problem problem(inst.topology, inst.measurements, inst.truth.anchor_value);
    const std::size_t n = problem.size() - 1;
    const auto fp = lsbp::variance_fixed_point(problem, std::vector<double>(n, 0.0), 1e-14, 100000);
    const auto k = lsbp::build_k_matrix(problem, fp.precision);
    const auto rho = analysis::spectral_radius(k);
    worst_radius = std::max(worst_radius, rho.value);
    if (!std::isnan(rho.dense)) {
      worst_dense_mismatch = std::max(worst_dense_mismatch, std::abs(rho.value - rho.dense));
    }
    ++r.checks;
    if (!(rho.value < 1.0)) {
      r.passed = false;
      r.failures.push_back({{"graph", g}, {"spectral_radius", rho.value}});
    }
    bool strict_row = false;
    for (std::size_t i = 0; i < n; ++i) {
      ++r.checks;
      const double s = k.row_sum(i);
      if (s > 1.0 + 1e-12) {
        r.passed = false;
        r.failures.push_back({{"graph", g}, {"row", i}, {"row_sum", s}});
      }
      strict_row = strict_row || s < 1.0 - 1e-12;
    }
    ++r.checks;
    if (!strict_row) {
      r.passed = false;
      r.failures.push_back({{"graph", g}, {"error", "no row sum below 1"}});
    }

    const auto direct = lsbp::solve_mean_fixed_point(k);
    SplitMix64 rng(derive_seed(gs, Stream::init));
    for (int start = 0; start < 5; ++start) {
      std::vector<double> init(n);
      for (auto& v : init) v = -1000.0 + 2000.0 * rng.uniform();
      netsim::LinkModel link{0.7, 2, derive_seed(gs, {static_cast<std::uint64_t>(start)}), {}};
      std::vector<double> sync;
      analysis::MeanIterationResult async;
      try {
        sync = lsbp::iterate_means(k, init, 1e-11, 1000000);
        async = analysis::iterate_means_async(k, init, link, 1e-11, 1000000);
      } catch (const EngineError& e) {
        r.passed = false;
        r.failures.push_back({{"graph", g}, {"start", start}, {"error", e.what()}});
        continue;
      }
      r.checks += 2;
      const double gs_gap = max_diff(sync, direct);
      const double ga_gap = async.converged ? max_diff(async.means, direct) : kInfinity;
      worst_gap = std::max({worst_gap, gs_gap, ga_gap});
      if (!(gs_gap <= 1e-8) || !(ga_gap <= 1e-8)) {
        r.passed = false;
        if (r.failures.size() < 20) {
          r.failures.push_back({{"graph", g}, {"start", start}, {"sync_gap", gs_gap},
                                {"async_gap", ga_gap}});
        }
      }
    }
  }
  r.details = {{"graphs", graphs},
               {"max_spectral_radius", worst_radius},
               {"max_power_vs_dense", worst_dense_mismatch},
               {"max_gap_to_direct_solve", worst_gap}};
  return r;
}

SuiteReport verify_tree_exactness(std::uint64_t seed, std::size_t trees) {
  SuiteReport r;
  r.suite = "tree-exactness";
  double worst = 0.0;
  for (std::size_t t = 0; t < trees; ++t) {
    const std::uint64_t ts = instance_seed(seed, t);
    SplitMix64 rng(derive_seed(ts, Stream::topology));
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 19.0);
    const auto topo = scenario::generate_tree(n, ts);
    const auto truth = scenario::synthesize_truth(topo, scenario::UniformTruth{}, 0.0,
                                                  derive_seed(ts, Stream::truth));
    const auto meas =
        scenario::sample_measurements(topo, truth, derive_seed(ts, Stream::measurement));
    const auto ml = oracle::solve(topo, meas, truth.anchor_value);
    for (auto alg : {netsim::Algorithm::gbp, netsim::Algorithm::lsbp}) {
      netsim::RunSpec spec;
      spec.algorithm = alg;
      spec.topology = topo;
      spec.truth = truth;
      spec.measurements = meas;
      spec.link = {1.0, 0, ts, {}};
      spec.termination = {1e-11, 20000, 1e6};
      const auto trace = netsim::run(spec);
      const auto means = netsim::final_means(trace);
      double gap = 0.0;
      for (const auto& [id, est] : ml.estimates) gap = std::max(gap, std::abs(means.at(id) - est));
      worst = std::max(worst, gap);
      r.checks += 2;
      const bool converged = trace.reason == netsim::TerminationReason::threshold;
      if (!converged || !(gap <= 1e-9)) {
        r.passed = false;
        r.failures.push_back({{"tree", t}, {"n", n}, {"algorithm", netsim::to_string(alg)},
                              {"reason", netsim::to_string(trace.reason)}, {"max_gap", gap}});
      }
    }
  }
  r.details = {{"trees", trees}, {"max_gap_to_ml", worst}};
  return r;
}

SuiteReport verify_def1(std::uint64_t seed, std::size_t runs, const netsim::LinkModel& link) {
  link.validate();
  SuiteReport r;
  r.suite = "def1";
  const std::uint64_t l_max = 1500;
  std::uint64_t worst_lag = 0;
  double worst_gap = 0.0;
  std::uint64_t allowed = 0;
  for (std::size_t k = 0; k < runs; ++k) {
    const std::uint64_t ks = instance_seed(seed, k);
    const auto inst = random_instance(ks, 20);
    // A slot is stale beyond d_max + L only if L consecutive sends were all
    // dropped; L is chosen so that happens with probability <= 1e-6 per run.
    const double links = 2.0 * static_cast<double>(inst.topology.edge_count());
    double lowest = link.pdr;
    for (const auto& [l, p] : link.overrides) lowest = std::min(lowest, p);
    for (const auto& [e, params] : inst.topology.edges()) {
      lowest = std::min(lowest, link.pdr * params.reliability);
    }
    const std::uint64_t run_len =
        lowest >= 1.0 ? 0
                      : static_cast<std::uint64_t>(std::ceil(
                            std::log(1e-6 / (links * static_cast<double>(l_max))) /
                            std::log(1.0 - lowest)));
    const std::uint64_t bound = link.max_delay + run_len + 1;
    allowed = std::max(allowed, bound);

    for (auto alg : {netsim::Algorithm::gbp, netsim::Algorithm::lsbp}) {
      netsim::RunSpec spec;
      spec.algorithm = alg;
      spec.topology = inst.topology;
      spec.truth = inst.truth;
      spec.measurements = inst.measurements;
      spec.link = link;
      spec.link.seed = ks;
      spec.termination = {0.0, l_max, 1e6};
      spec.record_beliefs = true;
      const auto lossy = netsim::run(spec);

      auto sync_spec = spec;
      sync_spec.link = {1.0, 0, ks, {}};
      const auto sync = netsim::run(sync_spec);

      std::uint64_t lag = 0;
      // Skip the warm-up: before the first delivery, lag grows with l.
      for (const auto& rec : lossy.iterations) {
        if (rec.iteration > bound) lag = std::max(lag, rec.max_stamp_lag);
      }
      worst_lag = std::max(worst_lag, lag);
      const auto a = netsim::final_means(lossy);
      const auto b = netsim::final_means(sync);
      double gap = 0.0;
      for (const auto& [id, v] : b) gap = std::max(gap, std::abs(a.at(id) - v));
      worst_gap = std::max(worst_gap, gap);
      r.checks += 2;
      if (lag > bound || !(gap <= 1e-6)) {
        r.passed = false;
        r.failures.push_back({{"run", k}, {"algorithm", netsim::to_string(alg)},
                              {"max_stamp_lag", lag}, {"lag_bound", bound},
                              {"gap_to_synchronous", gap}});
      }
    }
  }
  r.details = {{"runs", runs},
               {"pdr", link.pdr},
               {"max_delay", link.max_delay},
               {"iterations", l_max},
               {"max_stamp_lag", worst_lag},
               {"lag_bound", allowed},
               {"max_gap_to_synchronous", worst_gap}};
  return r;
}

SuiteReport cmd_verify(const std::string& suite, const VerifyOptions& o) {
  if (suite == "property2") return verify_property2_suite(o.seed, o.trials.value_or(100), 100);
  if (suite == "theorem1") return verify_theorem1(o.seed, o.trials.value_or(50));
  if (suite == "theorem2") return verify_theorem2(o.seed, o.trials.value_or(100));
  if (suite == "tree-exactness") return verify_tree_exactness(o.seed, o.trials.value_or(20));
  if (suite == "def1") return verify_def1(o.seed, o.trials.value_or(10), o.link);
  throw Error("unknown suite '" + suite +
              "' (known: property2, theorem1, theorem2, tree-exactness, def1)");
}

}  // namespace doppler::cli
