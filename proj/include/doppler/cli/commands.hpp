#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doppler/cli/config.hpp"
#include "doppler/netsim.hpp"

namespace doppler::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kConverged = 0,
  kConfigError = 1,
  kIterationCap = 2,
  kDiverged = 3,
  kVerifyFailed = 4,
};

/// Runs the configured experiment and writes trace, metrics and resolved
/// config under config.out_dir. Returns 0, 2 or 3 by termination reason.
int cmd_run(const ExperimentConfig& config, std::ostream& log);

/// Writes scenario.json (topology, truth, measurements) and, for
/// kinematic generators, trace.txt.
void cmd_gen(const ExperimentConfig& config, std::ostream& log);

struct PresetOptions {
  std::uint64_t seed = 1;
  double scale = 1.0;
  std::string out_dir = "out";
};

const std::vector<std::string>& preset_names();

/// Disk graph with 800 m range whose area is scaled so that the node density
/// matches 100 vehicles on 3000 x 4000 m. Kinematics are redrawn until every
/// node reaches the anchor (at most 1000 attempts).
scenario::Topology connected_geometric(std::size_t n, std::uint64_t seed,
                                       scenario::NoiseRange noise = {});

/// Returns the files written. Throws Error for an unknown preset.
std::vector<std::string> cmd_preset(const std::string& name, const PresetOptions& options,
                                    std::ostream& log);

struct SuiteReport {
  std::string suite;
  bool passed = true;
  std::size_t checks = 0;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::vector<nlohmann::ordered_json> failures;

  nlohmann::ordered_json to_json() const;
};

const std::vector<std::string>& suite_names();

struct VerifyOptions {
  std::uint64_t seed = 1;
  std::optional<std::size_t> trials;
  netsim::LinkModel link{0.6, 3, 1, {}};
};

/// Throws Error for an unknown suite.
SuiteReport cmd_verify(const std::string& suite, const VerifyOptions& options);

// Individual suites, also used by the acceptance tests.
SuiteReport verify_property2_suite(std::uint64_t seed, std::size_t graphs, std::size_t vectors);
SuiteReport verify_theorem1(std::uint64_t seed, std::size_t graphs);
SuiteReport verify_theorem2(std::uint64_t seed, std::size_t graphs);
SuiteReport verify_tree_exactness(std::uint64_t seed, std::size_t trees);
SuiteReport verify_def1(std::uint64_t seed, std::size_t runs, const netsim::LinkModel& link);

}  // namespace doppler::cli
