#include <filesystem>
#include <ostream>
#include <sstream>

#include "doppler/analysis.hpp"
#include "doppler/cli/commands.hpp"
#include "doppler/oracle.hpp"

namespace doppler::cli {

using json = nlohmann::ordered_json;

namespace {

std::string in_dir(const ExperimentConfig& c, const std::string& file) {
  return (std::filesystem::path(c.out_dir) / file).string();
}

std::string resolved_text(const ExperimentConfig& c, const std::string& hash) {
  json r = resolved(c);
  r["config_hash"] = hash;
  return r.dump(2) + "\n";
}

int run_ml(const ExperimentConfig& c, const BuiltScenario& b, const std::string& hash,
           std::ostream& log) {
  const auto result = oracle::solve(b.topology, b.measurements, b.truth.anchor_value);
  std::map<NodeId, double> est = result.estimates;
  est.erase(b.topology.anchor());
  const double mse = analysis::average_mse(est, b.truth, c.normalization);

  std::ostringstream csv;
  analysis::write_csv_header(csv, hash);
  csv << 0 << ",ml," << analysis::format_double(c.pdr) << ',' << c.seed << ','
      << analysis::format_double(mse) << ',' << analysis::format_double(result.crlb_average)
      << ",0,0," << b.topology.node_count() << '\n';
  write_file_atomic(in_dir(c, c.metrics_file), csv.str());

  json out = {{"config_hash", hash}, {"excluded", result.excluded}};
  json nodes = json::array();
  for (const auto& [id, v] : result.estimates) {
    nodes.push_back({{"node", id}, {"estimate", v}, {"crlb", result.crlb.at(id)}});
  }
  out["estimates"] = nodes;
  write_file_atomic(in_dir(c, "ml_estimates.json"), out.dump(2) + "\n");
  write_file_atomic(in_dir(c, c.resolved_file), resolved_text(c, hash));
  log << "ml avg_mse=" << analysis::format_double(mse)
      << " crlb_avg=" << analysis::format_double(result.crlb_average) << '\n';
  return kConverged;
}

}  // namespace

int cmd_run(const ExperimentConfig& c, std::ostream& log) {
  const BuiltScenario b = build_scenario(c);
  const std::string hash = config_hash(c);
  if (c.algorithm == "ml") return run_ml(c, b, hash, log);

  const netsim::RunSpec spec = make_run_spec(c, b);
  const netsim::RunTrace trace = netsim::run(spec);

  std::ostringstream jsonl;
  netsim::write_jsonl(jsonl, trace);
  std::ostringstream csv;
  analysis::write_csv_header(csv, hash);
  analysis::write_csv_rows(csv, trace);
  write_file_atomic(in_dir(c, c.trace_file), jsonl.str());
  write_file_atomic(in_dir(c, c.metrics_file), csv.str());
  write_file_atomic(in_dir(c, c.resolved_file), resolved_text(c, hash));

  const auto& last = trace.last();
  log << c.algorithm << " reason=" << netsim::to_string(trace.reason)
      << " iterations=" << trace.iteration_count()
      << " avg_mse=" << analysis::format_double(last.avg_mse)
      << " crlb_avg=" << analysis::format_double(last.crlb_avg)
      << " messages=" << last.messages_cumulative << '\n';
  if (!trace.divergence.empty()) log << "divergence: " << trace.divergence << '\n';

  switch (trace.reason) {
    case netsim::TerminationReason::threshold:
      return kConverged;
    case netsim::TerminationReason::l_max:
      return kIterationCap;
    case netsim::TerminationReason::diverged:
      return kDiverged;
  }
  return kIterationCap;
}

void cmd_gen(const ExperimentConfig& c, std::ostream& log) {
  const BuiltScenario b = build_scenario(c);
  const std::string hash = config_hash(c);
  json nodes = json::array();
  for (NodeId n : b.topology.nodes()) {
    nodes.push_back({{"id", n}, {"offset", b.truth.offsets.at(n)}});
  }
  json edges = json::array();
  for (const auto& [e, p] : b.topology.edges()) {
    edges.push_back({{"a", e.lo},
                     {"b", e.hi},
                     {"noise_variance", p.noise_variance},
                     {"reliability", p.reliability},
                     {"measurement", b.measurements.values.at(e)}});
  }
  json doc = {{"config_hash", hash},
              {"anchor", b.topology.anchor()},
              {"anchor_value", b.truth.anchor_value},
              {"nodes", nodes},
              {"edges", edges},
              {"unreachable", b.topology.unreachable_from_anchor()}};
  write_file_atomic(in_dir(c, "scenario.json"), doc.dump(2) + "\n");
  if (b.kinematics) {
    std::ostringstream t;
    t << "# config_hash=" << hash << '\n';
    scenario::write_trace(t, *b.kinematics);
    write_file_atomic(in_dir(c, "trace.txt"), t.str());
  }
  log << "nodes=" << b.topology.node_count() << " edges=" << b.topology.edge_count()
      << " anchor_connected=" << (b.topology.anchor_connected() ? "yes" : "no") << '\n';
}

}  // namespace doppler::cli
