// Command-line front end: relaxhjb <subcommand> --config FILE [--out DIR]
// [--seed N] [--threads N].

#include <iostream>

#include "CLI11.hpp"
#include "relaxhjb/cli.hpp"
#include "relaxhjb/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Regularised HJB solver and experiment runner"};
  app.require_subcommand(1, 1);

  std::string config_path;
  relaxhjb::RunOptions options;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  for (const auto& name : relaxhjb::subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (overrides the config)")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : relaxhjb::kExitError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--out")) options.out_dir = out_dir;
  if (chosen->count("--seed")) options.seed = seed;
  if (chosen->count("--threads")) options.threads = threads;

  relaxhjb::ExperimentConfig config;
  try {
    config = relaxhjb::parse_config(config_path);
  } catch (const relaxhjb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return relaxhjb::kExitError;
  }
  return relaxhjb::run(chosen->get_name(), config, options);
}
