#include <iostream>

#include <CLI11.hpp>

#include "feasreg/commands.hpp"

namespace {

feasreg::ScenarioConfig load(const std::string& config_path, const std::string& out,
                             long seed_override, bool seed_set, int jobs, bool jobs_set) {
  feasreg::ScenarioConfig cfg = config_path.empty()
                                    ? feasreg::ScenarioConfig::from_string("")
                                    : feasreg::ScenarioConfig::from_file(config_path);
  if (!out.empty()) cfg.override_out(out);
  if (seed_set) cfg.override_seed(seed_override);
  if (jobs_set) cfg.override_jobs(jobs);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feasibility regions for constrained optimal control"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  long seed = 0;
  int jobs = 1;
  bool seed_set = false, jobs_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "scenario config file");
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "seed (overrides config)")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("--jobs", jobs, "worker threads for sweeps")->each([&](const std::string&) {
      jobs_set = true;
    });
  };

  auto* sim = app.add_subcommand("simulate", "roll the controller out and write trajectory CSVs");
  auto* region = app.add_subcommand("region", "sweep a feasibility region map");
  auto* train = app.add_subcommand("train", "train the RL policy and sweep checkpoint regions");
  auto* verify = app.add_subcommand("verify", "run the feasible-region theorem suites");
  auto* plot = app.add_subcommand("plot", "render a region map and trajectories as SVG");
  auto* defaults = app.add_subcommand("defaults", "print every config key with its default");
  for (auto* s : {sim, region, train, verify, plot}) add_common(s);

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults->parsed()) {
      std::cout << feasreg::ScenarioConfig::defaults_text();
      return 0;
    }
    const auto cfg = load(config_path, out_dir, seed, seed_set, jobs, jobs_set);
    if (sim->parsed()) return feasreg::cmd_simulate(cfg);
    if (region->parsed()) return feasreg::cmd_region(cfg);
    if (train->parsed()) return feasreg::cmd_train(cfg);
    if (verify->parsed()) return feasreg::cmd_verify(cfg);
    if (plot->parsed()) return feasreg::cmd_plot(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
