// vtn_sim: command-line front end for training, evaluation, oracle and sweep runs.

#include <iostream>

#include <CLI11.hpp>

#include "vtn/experiment.hpp"

int main(int argc, char** argv) {
  using namespace vtn::exp;
  CLI::App app{"Task-offloading simulator for vehicular twin networks with identity-based authentication"};
  app.set_version_flag("--version", std::string(VTN_VERSION));

  CliFlags flags;
  std::string config, mode, out;
  std::uint64_t seed = 0;
  auto* config_opt = app.add_option("--config", config, "JSON experiment config");
  auto* mode_opt = app.add_option("--mode", mode, "train | evaluate | oracle | sweep");
  auto* seed_opt = app.add_option("--seed", seed, "single seed, replaces the seeds list");
  auto* out_opt = app.add_option("--out", out, "output directory");
  app.add_option("--override", flags.overrides, "dotted key=value, repeatable (e.g. train.iterations=50)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (*config_opt) flags.config_path = config;
  if (*mode_opt) flags.mode = mode;
  if (*seed_opt) flags.seed = seed;
  if (*out_opt) flags.out_dir = out;

  try {
    ExperimentConfig cfg = resolve_config(flags);
    int code = run_experiment(cfg);
    std::cout << "wrote " << cfg.out_dir << "/results.csv\n";
    if (code == kExitDivergence) std::cerr << "error: training diverged for at least one run (see empty rows)\n";
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const vtn::ppo::TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
