#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doppler/cli/commands.hpp"
#include "doppler/cli/config.hpp"

using namespace doppler;
using namespace doppler::cli;

namespace {

std::vector<std::string> diagnostics_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.diagnostics();
  }
  return {};
}

bool mentions(const std::vector<std::string>& d, const std::string& needle) {
  return std::any_of(d.begin(), d.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

const char* kTriangle = R"({
  "algorithm": "lsbp",
  "scenario": {
    "generator": "explicit",
    "nodes": [1, 2, 3],
    "edges": [{"a": 1, "b": 2}, {"a": 1, "b": 3}, {"a": 2, "b": 3}],
    "truth": {"mode": "explicit", "offsets": {"1": 100, "2": 200, "3": 300}},
    "noiseless": true
  },
  "link": {"pdr": 1.0, "max_delay": 0},
  "termination": {"threshold": 1e-9, "l_max": 200}
})";

}  // namespace

TEST_CASE("an empty object takes every default") {
  const auto c = parse_config("{}");
  CHECK(c.algorithm == "lsbp");
  CHECK(c.scenario.generator == "geometric");
  CHECK(c.pdr == 1.0);
  CHECK(c.l_max == 200);
  CHECK(c.threshold == 1e-6);
}

TEST_CASE("diagnostics carry source, line and path") {
  const auto d = diagnostics_of("{\n  \"seed\": 1,\n  \"bogus\": 2\n}");
  REQUIRE(d.size() == 1);
  CHECK(d[0] == "cfg.json:3: bogus: unknown key");

  const auto nested = diagnostics_of("{\n\"link\": {\n  \"pdr\": \"high\"\n}}");
  REQUIRE(nested.size() == 1);
  CHECK(nested[0] == "cfg.json:3: link.pdr: expected a number");
}

TEST_CASE("every problem is reported at once") {
  const auto d = diagnostics_of(R"({"seed": -1, "algorithm": "magic", "link": {"pdr": 0}})");
  CHECK(d.size() >= 3);
  CHECK(mentions(d, "seed"));
  CHECK(mentions(d, "algorithm"));
  CHECK(mentions(d, "link.pdr"));
}

TEST_CASE("malformed JSON reports a line") {
  const auto d = diagnostics_of("{\n  \"seed\": 1,\n  oops\n}");
  REQUIRE(d.size() == 1);
  CHECK(d[0].rfind("cfg.json:3:", 0) == 0);
}

TEST_CASE("range checks") {
  CHECK(mentions(diagnostics_of(R"({"link": {"pdr": 0}})"), "link.pdr"));
  CHECK(mentions(diagnostics_of(R"({"link": {"pdr": 1.5}})"), "link.pdr"));
  CHECK(mentions(diagnostics_of(R"({"termination": {"threshold": -1}})"), "threshold"));
  CHECK(mentions(diagnostics_of(R"({"scenario": {"generator": "tree", "n": 1}})"), "scenario.n"));
  CHECK(mentions(diagnostics_of(R"({"normalization": 0})"), "normalization"));
  CHECK(mentions(diagnostics_of(R"({"init": {"lsbp": {"variance": 0}}})"), "init.lsbp.variance"));
}

TEST_CASE("keys outside the chosen generator or truth mode are rejected") {
  CHECK(mentions(diagnostics_of(R"({"scenario": {"generator": "tree", "width": 10}})"),
                 "scenario.width"));
  CHECK(mentions(diagnostics_of(R"({"scenario": {"generator": "complete", "spacing": 10}})"),
                 "scenario.spacing"));
  CHECK(mentions(
      diagnostics_of(R"({"scenario": {"truth": {"mode": "uniform", "carrier_hz": 5e9}}})"),
      "only for mode 'kinematic'"));
  CHECK(mentions(diagnostics_of(R"({"events": [{"at": 2, "kind": "leave", "node": 3,
                                               "offset": 1}]})"),
                 "only for join events"));
  CHECK(mentions(diagnostics_of(R"({"scenario": {"generator": "tree", "pairwise": "radial"}})"),
                 "pairwise"));
}

TEST_CASE("uninformative LSBP variance") {
  const auto c = parse_config(R"({"init": {"lsbp": {"variance": "uninformative"}}})");
  CHECK(std::isinf(c.lsbp_variance));
  CHECK(resolved(c)["init"]["lsbp"]["variance"] == "uninformative");
}

TEST_CASE("resolved config round-trips and the hash ignores output paths") {
  const auto c = parse_config(kTriangle);
  const auto again = parse_config(resolved(c).dump(2));
  CHECK(resolved(again) == resolved(c));
  CHECK(config_hash(again) == config_hash(c));
  CHECK(config_hash(c).size() == 16);

  auto moved = c;
  moved.out_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  auto reseeded = c;
  reseeded.seed = 2;
  CHECK(config_hash(reseeded) != config_hash(c));
}

TEST_CASE("overrides are validated") {
  auto c = parse_config(kTriangle);
  apply(c, {std::uint64_t{7}, std::string("gbp"), 0.5, 1e-3, std::uint64_t{10}, std::string("o")});
  CHECK(c.seed == 7);
  CHECK(c.algorithm == "gbp");
  CHECK(c.pdr == 0.5);
  CHECK(c.l_max == 10);
  CHECK(c.out_dir == "o");
  Overrides bad;
  bad.pdr = 0.0;
  CHECK_THROWS_AS(apply(c, bad), ConfigError);
}

TEST_CASE("explicit scenario builds the triangle") {
  const auto c = parse_config(kTriangle);
  const auto b = build_scenario(c);
  CHECK(b.topology.node_count() == 3);
  CHECK(b.truth.anchor_value == 100.0);
  CHECK(b.measurements.values.at({2, 3}) == 500.0);
  const auto spec = make_run_spec(c, b);
  CHECK(spec.algorithm == netsim::Algorithm::lsbp);
  CHECK(spec.link.max_delay == 0);
  CHECK(spec.config_hash == config_hash(c));
}

TEST_CASE("generated scenarios are reproducible from the seed") {
  for (const char* gen : {"geometric", "highway", "tree", "connected", "complete"}) {
    const std::string text = std::string(R"({"seed": 5, "scenario": {"generator": ")") + gen +
                             R"(", "n": 12}})";
    const auto c = parse_config(text);
    const auto a = build_scenario(c);
    const auto b = build_scenario(c);
    CHECK(a.topology.node_count() == 12);
    CHECK(a.measurements.values == b.measurements.values);
    CHECK(a.truth.offsets == b.truth.offsets);
  }
}

TEST_CASE("run writes trace, metrics and resolved config") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "doppler_cli_test_run";
  fs::remove_all(dir);
  auto c = parse_config(kTriangle);
  c.out_dir = dir.string();
  std::ostringstream log;
  CHECK(cmd_run(c, log) == kConverged);
  CHECK(fs::exists(dir / "trace.jsonl"));
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "resolved_config.json"));
  std::ifstream in(dir / "trace.jsonl");
  const auto t = netsim::read_jsonl(in);
  const auto m = netsim::final_means(t);
  CHECK(std::abs(m.at(2) - 200.0) < 1e-8);
  CHECK(std::abs(m.at(3) - 300.0) < 1e-8);

  c.threshold = 0.0;
  c.l_max = 3;
  CHECK(cmd_run(c, log) == kIterationCap);
  fs::remove_all(dir);
}

TEST_CASE("unknown preset and suite names throw") {
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_preset("fig99", {}, log), Error);
  CHECK_THROWS_AS(cmd_verify("nope", {}), Error);
  CHECK(std::find(suite_names().begin(), suite_names().end(), "def1") != suite_names().end());
}

TEST_CASE("small verify suites pass") {
  CHECK(verify_property2_suite(3, 5, 10).passed);
  CHECK(verify_theorem1(3, 5).passed);
  CHECK(verify_tree_exactness(3, 3).passed);
}
