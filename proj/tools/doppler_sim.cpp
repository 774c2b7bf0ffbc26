#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "doppler/cli/commands.hpp"

namespace cli = doppler::cli;

namespace {

struct Flags {
  std::string config;
  std::string preset;
  std::string suite;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> algorithm;
  std::optional<double> pdr;
  std::optional<double> th;
  std::optional<std::uint64_t> l_max;
  std::optional<std::size_t> max_delay;
  double scale = 1.0;
  std::optional<std::size_t> trials;
};

void add_overrides(CLI::App* app, Flags& f) {
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--algorithm", f.algorithm, "gbp, lsbp or ml");
  app->add_option("--pdr", f.pdr, "packet delivery ratio in (0, 1]");
  app->add_option("--th", f.th, "convergence threshold");
  app->add_option("--l-max", f.l_max, "iteration cap");
}

cli::ExperimentConfig load(const Flags& f) {
  cli::ExperimentConfig c = cli::load_config(f.config);
  cli::apply(c, {f.seed, f.algorithm, f.pdr, f.th, f.l_max, f.out});
  return c;
}

int verify(const Flags& f) {
  cli::VerifyOptions o;
  if (!f.config.empty()) {
    const auto c = load(f);
    o.seed = c.seed;
    o.link.pdr = c.pdr;
    o.link.max_delay = c.max_delay;
  } else {
    if (f.seed) o.seed = *f.seed;
    if (f.pdr) o.link.pdr = *f.pdr;
  }
  if (f.max_delay) o.link.max_delay = *f.max_delay;
  o.link.seed = o.seed;
  o.trials = f.trials;
  try {
    o.link.validate();
  } catch (const doppler::Error& e) {
    throw cli::ConfigError({std::string("link: ") + e.what()});
  }
  const auto report = cli::cmd_verify(f.suite, o);
  std::cout << report.to_json().dump(2) << '\n';
  return report.passed ? cli::kConverged : cli::kVerifyFailed;
}

int presets(const Flags& f) {
  cli::PresetOptions o;
  if (f.seed) o.seed = *f.seed;
  if (f.out) o.out_dir = *f.out;
  o.scale = f.scale;
  const auto files = cli::cmd_preset(f.preset, o, std::cerr);
  for (const auto& path : files) std::cout << path << '\n';
  return cli::kConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Doppler offset estimation with Gaussian belief propagation"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("--config", f.config, "config file")->required();
  add_overrides(run, f);

  auto* gen = app.add_subcommand("gen", "write the scenario described by a config");
  gen->add_option("--config", f.config, "config file")->required();
  add_overrides(gen, f);

  auto* preset = app.add_subcommand("preset", "run a canned experiment");
  auto* name = preset->add_option("name", f.preset, "fig6, fig7, fig9, fig10 or fig11");
  preset->add_option("--preset", f.preset, "same as the positional name")->excludes(name);
  preset->add_option("--seed", f.seed, "master seed");
  preset->add_option("--out", f.out, "output directory");
  preset->add_option("--scale", f.scale, "size multiplier in (0, 10]");

  auto* ver = app.add_subcommand("verify", "check a convergence property on random instances");
  ver->add_option("suite", f.suite, "property2, theorem1, theorem2, tree-exactness or def1")
      ->required();
  ver->add_option("--config", f.config, "take seed and link model from a config");
  ver->add_option("--seed", f.seed, "master seed");
  ver->add_option("--trials", f.trials, "graphs, trees or runs");
  ver->add_option("--pdr", f.pdr, "link delivery ratio for def1");
  ver->add_option("--max-delay", f.max_delay, "link delay bound for def1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (run->parsed()) return cli::cmd_run(load(f), std::cerr);
    if (gen->parsed()) {
      cli::cmd_gen(load(f), std::cerr);
      return cli::kConverged;
    }
    if (preset->parsed()) {
      if (f.preset.empty()) throw cli::ConfigError({"preset: a name is required"});
      return presets(f);
    }
    return verify(f);
  } catch (const cli::ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << "error: " << d << '\n';
    return cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  }
}
