#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <ostream>
#include <sstream>

#include "doppler/analysis.hpp"
#include "doppler/cli/commands.hpp"
#include "doppler/fixed_point.hpp"
#include "doppler/oracle.hpp"
#include "doppler/rng.hpp"

namespace doppler::cli {

using json = nlohmann::ordered_json;

scenario::Topology connected_geometric(std::size_t n, std::uint64_t seed,
                                       scenario::NoiseRange noise) {
  const double stretch = std::sqrt(static_cast<double>(n) / 100.0);
  scenario::GeometricParams params;
  params.width = 3000.0 * stretch;
  params.height = 4000.0 * stretch;
  params.noise = noise;
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    const auto kin = scenario::random_kinematics(
        n, params.width, params.height, 20.0, 35.0,
        derive_seed(seed, {static_cast<std::uint64_t>(Stream::kinematics), attempt}));
    auto topo = scenario::generate_geometric(kin, params,
                                             derive_seed(seed, Stream::noise_variance));
    if (topo.anchor_connected()) return topo;
  }
  throw ScenarioError("no anchor-connected geometric layout found for n=" + std::to_string(n));
}

namespace {

struct Output {
  std::string name;
  std::string content;
};

std::string preset_hash(const json& descriptor) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(descriptor.dump())));
  return buf;
}

std::size_t scaled(double base, double scale, std::size_t floor) {
  return std::max<std::size_t>(floor, static_cast<std::size_t>(std::llround(base * scale)));
}

netsim::RunSpec base_spec(netsim::Algorithm alg, const scenario::Topology& topo,
                          const scenario::GroundTruth& truth, std::uint64_t meas_seed) {
  netsim::RunSpec spec;
  spec.algorithm = alg;
  spec.topology = topo;
  spec.truth = truth;
  spec.measurement_seed = meas_seed;
  spec.measurements = scenario::sample_measurements(topo, truth, meas_seed);
  spec.link = {1.0, 0, 0, {}};
  spec.record_beliefs = false;
  return spec;
}

scenario::GroundTruth uniform_truth(const scenario::Topology& topo, std::uint64_t seed) {
  return scenario::synthesize_truth(topo, scenario::UniformTruth{}, 0.0,
                                    derive_seed(seed, Stream::truth));
}

std::string label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<Output> fig6(const PresetOptions& o, std::ostream& log) {
  const std::size_t n = scaled(50, o.scale, 5);
  const std::size_t iterations = 40;
  const std::vector<double> inits = {100.0, 10.0, 1.0, 0.1, 0.01};
  const json desc = {{"preset", "fig6"}, {"seed", o.seed}, {"scale", o.scale}, {"n", n},
                     {"iterations", iterations}, {"inits", inits}};
  const std::string hash = preset_hash(desc);

  const auto topo = connected_geometric(n, o.seed);
  const auto truth = uniform_truth(topo, o.seed);
  const auto meas = scenario::sample_measurements(topo, truth, derive_seed(o.seed, Stream::measurement));
  const Problem problem(topo, meas, truth.anchor_value);

  std::vector<Output> out;
  std::vector<double> finals;
  for (double p0 : inits) {
    std::ostringstream csv;
    csv << "# config_hash=" << hash << '\n'
        << "iteration,init_variance,mean_variance,min_variance,max_variance\n";
    std::vector<double> p(n - 1, 1.0 / p0);
    for (std::size_t l = 0; l <= iterations; ++l) {
      if (l > 0) p = lsbp::variance_map(problem, p);
      double sum = 0.0;
      double lo = kInfinity;
      double hi = 0.0;
      for (double v : p) {
        const double var = 1.0 / v;
        sum += var;
        lo = std::min(lo, var);
        hi = std::max(hi, var);
      }
      csv << l << ',' << analysis::format_double(p0) << ','
          << analysis::format_double(sum / static_cast<double>(p.size())) << ','
          << analysis::format_double(lo) << ',' << analysis::format_double(hi) << '\n';
    }
    finals.push_back(1.0 / *std::max_element(p.begin(), p.end()));
    out.push_back({"fig6_init_" + label(p0) + ".csv", csv.str()});
  }
  const auto [mn, mx] = std::minmax_element(finals.begin(), finals.end());
  log << "fig6 n=" << n << " final spread of min variance " << analysis::format_double(*mx - *mn)
      << '\n';
  return out;
}

std::vector<Output> fig7(const PresetOptions& o, std::ostream& log) {
  const std::size_t n = scaled(100, o.scale, 5);
  const std::size_t trials = scaled(10, o.scale, 1);
  const std::uint64_t l_max = 40;
  const json desc = {{"preset", "fig7"}, {"seed", o.seed}, {"scale", o.scale}, {"n", n},
                     {"trials", trials}, {"l_max", l_max}, {"pdr", {0.6, 0.8}}};
  const std::string hash = preset_hash(desc);
  const auto topo = connected_geometric(n, o.seed);
  const auto truth = uniform_truth(topo, o.seed);

  std::vector<Output> out;
  for (auto alg : {netsim::Algorithm::gbp, netsim::Algorithm::lsbp}) {
    for (double pdr : {0.6, 0.8}) {
      std::ostringstream csv;
      analysis::write_csv_header(csv, hash);
      double final_mse = 0.0;
      for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(o.seed, {static_cast<std::uint64_t>(Stream::trial), t});
        auto spec = base_spec(alg, topo, truth, derive_seed(trial_seed, Stream::measurement));
        spec.link = {pdr, 0, trial_seed, {}};
        spec.termination = {0.0, l_max, 1e6};
        spec.config_hash = hash;
        const auto trace = netsim::run(spec);
        analysis::write_csv_rows(csv, trace);
        final_mse += trace.last().avg_mse / static_cast<double>(trials);
      }
      const std::string pct = std::to_string(static_cast<int>(std::lround(pdr * 100)));
      out.push_back({"fig7_" + std::string(netsim::to_string(alg)) + "_pdr" + pct + ".csv",
                     csv.str()});
      log << "fig7 " << netsim::to_string(alg) << " pdr=" << pdr
          << " mean final mse=" << analysis::format_double(final_mse) << '\n';
    }
  }
  return out;
}

std::vector<Output> fig9(const PresetOptions& o, std::ostream& log) {
  const std::size_t trials = scaled(10, o.scale, 1);
  const std::uint64_t l_max = 30;
  const std::vector<NodeId> leaving = {4, 5, 8, 10};
  const json desc = {{"preset", "fig9"}, {"seed", o.seed}, {"scale", o.scale},
                     {"trials", trials}, {"l_max", l_max}, {"leave_at", 5},
                     {"rejoin", {{10, {4, 5}}, {11, {8, 10}}}}};
  const std::string hash = preset_hash(desc);
  const auto topo = scenario::generate_connected(10, 0.3, derive_seed(o.seed, Stream::topology));
  const auto truth = uniform_truth(topo, o.seed);

  // Leaves at 5; rejoins restore every original edge, linking only to nodes
  // already back at that point.
  std::vector<scenario::DynamicEvent> events;
  for (NodeId n : leaving) events.push_back({5, scenario::Leave{n}});
  std::set<NodeId> absent(leaving.begin(), leaving.end());
  for (auto [at, node] : std::vector<std::pair<std::uint64_t, NodeId>>{{10, 4}, {10, 5}, {11, 8}, {11, 10}}) {
    scenario::Join join;
    join.node = node;
    join.offset = truth.offsets.at(node);
    for (NodeId other : topo.neighbors(node)) {
      if (!absent.count(other)) join.links.emplace_back(other, topo.link(node, other));
    }
    absent.erase(node);
    events.push_back({at, join});
  }

  std::vector<Output> out;
  for (auto alg : {netsim::Algorithm::gbp, netsim::Algorithm::lsbp}) {
    std::ostringstream csv;
    analysis::write_csv_header(csv, hash);
    for (std::size_t t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = derive_seed(o.seed, {static_cast<std::uint64_t>(Stream::trial), t});
      auto spec = base_spec(alg, topo, truth, derive_seed(trial_seed, Stream::measurement));
      spec.termination = {0.0, l_max, 1e6};
      spec.events = events;
      spec.config_hash = hash;
      analysis::write_csv_rows(csv, netsim::run(spec));
    }
    out.push_back({"fig9_" + std::string(netsim::to_string(alg)) + ".csv", csv.str()});
  }
  log << "fig9 trials=" << trials << " node count 10 -> 6 -> 8 -> 10\n";
  return out;
}

std::vector<Output> fig10(const PresetOptions& o, std::ostream& log) {
  std::vector<std::size_t> sizes;
  for (std::size_t n = 70; n <= 120; n += 10) {
    sizes.push_back(scaled(static_cast<double>(n), o.scale, 3));
  }
  const json desc = {{"preset", "fig10"}, {"seed", o.seed}, {"scale", o.scale}, {"sizes", sizes},
                     {"threshold", 1e-3}, {"l_max", 2000}};
  const std::string hash = preset_hash(desc);
  std::vector<Output> out;
  for (auto alg : {netsim::Algorithm::gbp, netsim::Algorithm::lsbp}) {
    std::ostringstream csv;
    csv << "# config_hash=" << hash << '\n'
        << "n_nodes,messages_per_iteration,iterations,messages_total,reason\n";
    for (std::size_t n : sizes) {
      const auto topo = scenario::generate_complete(
          n, derive_seed(o.seed, {static_cast<std::uint64_t>(Stream::noise_variance), n}));
      const auto truth = uniform_truth(topo, o.seed);
      auto spec = base_spec(alg, topo, truth, derive_seed(o.seed, Stream::measurement));
      spec.termination = {1e-3, 2000, 1e6};
      spec.config_hash = hash;
      const auto trace = netsim::run(spec);
      csv << n << ',' << trace.last().messages << ',' << trace.iteration_count() << ','
          << trace.last().messages_cumulative << ',' << netsim::to_string(trace.reason) << '\n';
      log << "fig10 " << netsim::to_string(alg) << " n=" << n
          << " per_iteration=" << trace.last().messages << '\n';
    }
    out.push_back({"fig10_" + std::string(netsim::to_string(alg)) + ".csv", csv.str()});
  }
  return out;
}

std::vector<Output> fig11(const PresetOptions& o, std::ostream& log) {
  const std::size_t n = 10;
  const std::size_t trials = scaled(50, o.scale, 2);
  const json desc = {{"preset", "fig11"}, {"seed", o.seed}, {"scale", o.scale}, {"n", n},
                     {"trials", trials}, {"spacing", 500}, {"comm_range", 800},
                     {"threshold", 1e-9}, {"l_max", 2000}};
  const std::string hash = preset_hash(desc);

  scenario::GeometricParams params;
  params.width = 500.0 * n;
  params.height = 1.0;
  const auto kin = scenario::highway_kinematics(n, 500.0, 20.0, 35.0, derive_seed(o.seed, Stream::kinematics));
  const auto line = scenario::generate_geometric(kin, params, derive_seed(o.seed, Stream::noise_variance));
  const auto dense = scenario::generate_complete(n, derive_seed(o.seed, Stream::noise_variance));

  std::vector<Output> out;
  std::ostringstream summary;
  summary << "# config_hash=" << hash << '\n'
          << "topology,edges,trials,mean_final_mse,mean_crlb,converged_runs\n";
  for (const auto& [name, topo] : {std::pair<std::string, const scenario::Topology*>{"line", &line},
                                   {"dense", &dense}}) {
    std::ostringstream csv;
    analysis::write_csv_header(csv, hash);
    double mse = 0.0;
    double crlb = 0.0;
    std::size_t converged = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = derive_seed(o.seed, {static_cast<std::uint64_t>(Stream::trial), t});
      const auto truth = uniform_truth(*topo, trial_seed);
      auto spec = base_spec(netsim::Algorithm::lsbp, *topo, truth,
                            derive_seed(trial_seed, Stream::measurement));
      spec.termination = {1e-9, 2000, 1e6};
      spec.config_hash = hash;
      const auto trace = netsim::run(spec);
      analysis::write_csv_rows(csv, trace);
      mse += trace.last().avg_mse / static_cast<double>(trials);
      crlb += trace.last().crlb_avg / static_cast<double>(trials);
      converged += trace.reason == netsim::TerminationReason::threshold;
    }
    summary << name << ',' << topo->edge_count() << ',' << trials << ','
            << analysis::format_double(mse) << ',' << analysis::format_double(crlb) << ','
            << converged << '\n';
    out.push_back({"fig11_" + name + ".csv", csv.str()});
    log << "fig11 " << name << " mean final mse=" << analysis::format_double(mse)
        << " converged " << converged << "/" << trials << '\n';
  }
  out.push_back({"fig11_summary.csv", summary.str()});
  return out;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig6", "fig7", "fig9", "fig10", "fig11"};
  return names;
}

std::vector<std::string> cmd_preset(const std::string& name, const PresetOptions& options,
                                    std::ostream& log) {
  if (!(options.scale > 0.0) || options.scale > 10.0) throw Error("scale must be in (0, 10]");
  std::vector<Output> outputs;
  if (name == "fig6") {
    outputs = fig6(options, log);
  } else if (name == "fig7") {
    outputs = fig7(options, log);
  } else if (name == "fig9") {
    outputs = fig9(options, log);
  } else if (name == "fig10") {
    outputs = fig10(options, log);
  } else if (name == "fig11") {
    outputs = fig11(options, log);
  } else {
    throw Error("unknown preset '" + name + "' (known: fig6, fig7, fig9, fig10, fig11)");
  }
  std::vector<std::string> written;
  for (const auto& f : outputs) {
    const auto path = (std::filesystem::path(options.out_dir) / f.name).string();
    write_file_atomic(path, f.content);
    written.push_back(path);
  }
  return written;
}

}  // namespace doppler::cli
