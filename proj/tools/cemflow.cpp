#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cemflow/config.hpp"
#include "cemflow/error.hpp"
#include "cemflow/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Relaxed CEM-GMsFEM solver for convection-diffusion problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  for (const char* name : {"steady", "transient", "nonlinear", "spectrum", "sweep", "reference"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Experiment configuration (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides run.output)");
    sub->add_option("--threads", threads, "Worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { seed = s, seed_set = true; }, "Medium seed (overrides run.seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    cemflow::ExperimentConfig cfg = cemflow::parse_config(config_path);
    if (!out_dir.empty()) cfg.output = out_dir;
    if (threads > 0) cfg.threads = threads;
    if (seed_set) {
      cfg.seed = seed;
      cfg.problem.medium_seed = seed;
    }
    const auto report = cemflow::run_experiment(cemflow::command_from_string(command), cfg);
    std::cout << cemflow::kResultsHeader << '\n';
    for (const auto& r : report.rows) std::cout << cemflow::format_row(r) << '\n';
    std::cout << "wrote " << report.files.size() << " files to " << cfg.output << '\n';
    return 0;
  } catch (const cemflow::ConfigError& e) {
    std::cerr << "cemflow: " << e.what() << '\n';
    return 2;
  } catch (const cemflow::IoError& e) {
    std::cerr << "cemflow: I/O error: " << e.what() << '\n';
    return 4;
  } catch (const cemflow::NumericalError& e) {
    std::cerr << "cemflow: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const cemflow::InvalidArgument& e) {
    std::cerr << "cemflow: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cemflow: " << e.what() << '\n';
    return 1;
  }
}
