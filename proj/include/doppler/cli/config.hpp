#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doppler/netsim.hpp"
#include "doppler/scenario.hpp"

namespace doppler::cli {

/// Raised for any schema violation; `diagnostics` holds one
/// "source:line: field: message" entry per problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct ExplicitEdge {
  NodeId a = 0;
  NodeId b = 0;
  double noise_variance = 1.0;
  double reliability = 1.0;
};

struct ScenarioConfig {
  std::string generator = "geometric";  // geometric|highway|tree|connected|complete|explicit|trace
  std::uint64_t n = 30;
  double width = 3000.0;
  double height = 4000.0;
  double comm_range = 800.0;
  double speed_min = 20.0;
  double speed_max = 35.0;
  double spacing = 500.0;
  double extra_edge_probability = 0.1;
  std::string trace_file;
  std::vector<NodeId> nodes;
  std::vector<ExplicitEdge> edges;
  double noise_min = 0.5;
  double noise_max = 2.0;
  double reliability = 1.0;
  double anchor_value = 0.0;
  std::string truth = "uniform";  // uniform|kinematic|explicit
  double truth_min = -500.0;
  double truth_max = 500.0;
  double carrier_hz = 5.9e9;
  double wave_speed = 3.0e8;
  std::map<NodeId, double> offsets;
  std::string pairwise = "additive";  // additive|radial
  bool noiseless = false;
};

struct LinkOverride {
  NodeId from = 0;
  NodeId to = 0;
  double pdr = 1.0;
};

struct EventConfig {
  std::uint64_t at = 1;
  std::string kind = "leave";  // leave|join
  NodeId node = 0;
  std::vector<std::pair<NodeId, scenario::LinkParams>> links;
  std::optional<double> offset;
};

struct NodeInitConfig {
  NodeId node = 0;
  double variance = 100.0;
  double mean = 0.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string algorithm = "lsbp";  // gbp|lsbp|ml
  double normalization = 1.0;
  ScenarioConfig scenario;

  double pdr = 1.0;
  std::uint32_t max_delay = 3;
  std::optional<std::uint64_t> link_seed;  // defaults to `seed`
  std::vector<LinkOverride> link_overrides;

  double threshold = 1e-6;
  std::uint64_t l_max = 200;
  double divergence_factor = 1e6;

  double gbp_precision = 1.0;
  double gbp_mean = 0.0;
  double lsbp_variance = 100.0;  // "uninformative" in JSON maps to +inf
  double lsbp_mean = 0.0;
  std::vector<NodeInitConfig> lsbp_per_node;

  std::vector<EventConfig> events;

  std::string out_dir = "out";
  std::string trace_file = "trace.jsonl";
  std::string metrics_file = "metrics.csv";
  std::string resolved_file = "resolved_config.json";
  bool record_beliefs = true;
};

/// Parses and validates a JSON document. Unknown keys and keys that do not
/// apply to the chosen generator or truth mode are rejected.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Re-checks value ranges; used after command-line overrides.
void validate(const ExperimentConfig& config);

/// Every field with its effective value, in schema order.
nlohmann::ordered_json resolved(const ExperimentConfig& config);

/// 16 hex digits of FNV-1a over the resolved config without the output
/// section.
std::string config_hash(const ExperimentConfig& config);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<double> pdr;
  std::optional<double> threshold;
  std::optional<std::uint64_t> l_max;
  std::optional<std::string> out_dir;
};

void apply(ExperimentConfig& config, const Overrides& overrides);

struct BuiltScenario {
  scenario::Topology topology;
  scenario::GroundTruth truth;
  scenario::MeasurementSet measurements;
  std::optional<scenario::KinematicTrace> kinematics;
};

BuiltScenario build_scenario(const ExperimentConfig& config);

netsim::RunSpec make_run_spec(const ExperimentConfig& config, const BuiltScenario& scenario);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& content);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace doppler::cli
