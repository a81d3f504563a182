#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "inertial_prox/cli.hpp"

namespace ec = iprox::cli::exit_code;

int main(int argc, char** argv) {
  CLI::App app{"Two-step inertial proximal point solvers and benchmarks"};
  app.require_subcommand(1);

  double theta = 0.0;
  double delta = 0.0;
  auto* validate = app.add_subcommand("validate", "Check (theta, delta) against the admissible region");
  validate->add_option("--theta", theta, "first inertial weight")->required();
  validate->add_option("--delta", delta, "second inertial weight")->required();

  std::string config;
  bool bypass = false;
  auto* run = app.add_subcommand("run", "Single run; writes record.json and residuals.csv");
  run->add_option("config", config, "experiment JSON")->required();
  run->add_flag("--bypass-validation", bypass, "run even when parameters are outside the region");

  auto* bench = app.add_subcommand("bench", "Compare methods on one instance; writes bench.csv");
  bench->add_option("config", config, "experiment JSON")->required();

  auto* certify = app.add_subcommand("certify", "Check the Lyapunov and rate certificates on a linear problem");
  certify->add_option("config", config, "experiment JSON")->required();
  certify->add_flag("--bypass-validation", bypass, "run even when parameters are outside the region");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
    app.exit(e);
    std::cerr << app.help();
    return ec::kUsage;
  }

  if (*validate) return iprox::cli::cmd_validate(theta, delta, std::cout, std::cerr);
  if (*run) return iprox::cli::cmd_run(config, std::cout, std::cerr, bypass);
  if (*bench) return iprox::cli::cmd_bench(config, std::cout, std::cerr);
  if (*certify) return iprox::cli::cmd_certify(config, std::cout, std::cerr, bypass);
  return ec::kUsage;
}
