// sde: experiment runner for the random Stokes-Darcy ensemble DDM.
//
//   sde run <experiment> [--config FILE] [--set key=value]... --out DIR [--threads N] [--seed S]
//   sde list
//   sde defaults

#include <CLI11.hpp>
#include <iostream>

#include "edd/errors.hpp"
#include "edd/experiments.hpp"
#include "edd/log.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ensemble Robin-Robin domain decomposition for random Stokes-Darcy flow"};
  app.require_subcommand(1);

  std::string experiment, config_file, out_dir;
  std::vector<std::string> overrides;
  int threads = 0;
  long long seed = -1;
  bool verbose = false, quiet = false;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("experiment", experiment, "experiment id")->required()->check(CLI::IsMember(edd::experiment_names()));
  run->add_option("--config", config_file, "key=value file")->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "override a key (key=value), repeatable");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--threads", threads, "worker threads (1 = fully deterministic)")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "base seed")->check(CLI::NonNegativeNumber);
  run->add_flag("-v,--verbose", verbose, "progress messages");
  run->add_flag("-q,--quiet", quiet, "errors only");

  auto* list = app.add_subcommand("list", "list experiment ids");
  auto* defaults = app.add_subcommand("defaults", "print every key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : edd::kExitConfig;
  }

  if (list->parsed()) {
    for (const auto& n : edd::experiment_names()) std::cout << n << '\n';
    return 0;
  }
  if (defaults->parsed()) {
    std::cout << edd::Settings().canonical();
    return 0;
  }

  if (verbose) edd::log::set_level(edd::log::Level::info);
  if (quiet) edd::log::set_level(edd::log::Level::quiet);
  try {
    edd::Settings s;
    if (!config_file.empty()) s.load_file(config_file);
    for (const auto& o : overrides) s.apply(o);
    s.set("experiment", experiment);
    if (threads > 0) s.set("threads", std::to_string(threads));
    if (seed >= 0) s.set("seed", std::to_string(seed));
    const int rc = edd::run_experiment(s, out_dir);
    if (rc == edd::kExitDiverged) std::cerr << "sde: at least one solve did not converge\n";
    return rc;
  } catch (const edd::InputError& e) {
    std::cerr << "sde: " << e.what() << '\n';
    return edd::kExitConfig;
  } catch (const edd::SolverError& e) {
    std::cerr << "sde: solver failure: " << e.what() << '\n';
    return edd::kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "sde: " << e.what() << '\n';
    return edd::kExitConfig;
  }
}
