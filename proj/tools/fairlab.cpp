// fairlab: run, verify and sweep fair online classification experiments.
//
//   fairlab run configs/three_point.json --out runs/demo [--seed 7] [--log-policies]
//   fairlab verify runs/demo
//   fairlab sweep configs/three_point.json --horizons 500,2000,8000

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Individually fair online classification with a simulated auditor"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool log_policies = false;
  auto* run = app.add_subcommand("run", "Run every configured seed and write artifacts");
  run->add_option("config", config_path, "Run config (JSON)")->required();
  run->add_option("--seed", seed, "Run only this seed");
  run->add_option("--out", out_dir, "Artifact directory (overrides the config's \"out\")");
  run->add_flag("--log-policies", log_policies, "Also write per-round policy weights");

  std::string artifact_dir;
  auto* verify = app.add_subcommand("verify", "Recompute every check from saved artifacts");
  verify->add_option("artifacts", artifact_dir, "Seed directory or directory of seed directories")
      ->required();

  std::string sweep_config;
  std::vector<long> horizons;
  auto* sweep = app.add_subcommand("sweep", "Run the first seed at several horizons T");
  sweep->add_option("config", sweep_config, "Run config (JSON)")->required();
  sweep->add_option("--horizons,-T", horizons, "Comma-separated horizons")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    fairlab::RunOptions options;
    options.seed = seed;
    options.out_dir = out_dir;
    options.log_policies = log_policies;
    return fairlab::cmd_run(config_path, options, std::cout, std::cerr);
  }
  if (*verify) return fairlab::cmd_verify(artifact_dir, std::cout, std::cerr);
  const std::vector<fairlab::Index> Ts(horizons.begin(), horizons.end());
  return fairlab::cmd_sweep(sweep_config, Ts, std::cout, std::cerr);
}
