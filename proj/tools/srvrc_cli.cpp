#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "srvrc/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic recursive variance-reduced cubic regularization"};
  app.require_subcommand(1);

  std::string run_config, check_config, compare_dir;
  auto* run = app.add_subcommand("run", "Run one experiment; writes a trace CSV and a JSON summary");
  run->add_option("config", run_config, "Experiment JSON file")->required();
  auto* check = app.add_subcommand("check", "Check gradients and Hessian-vector products of the configured problem");
  check->add_option("config", check_config, "Experiment JSON file")->required();
  auto* compare = app.add_subcommand("compare", "Run every config in a directory and tabulate them");
  compare->add_option("dir", compare_dir, "Directory of experiment JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*run) return srvrc::cmd_run(run_config, std::cout, std::cerr);
  if (*check) return srvrc::cmd_check(check_config, std::cout, std::cerr);
  return srvrc::cmd_compare(compare_dir, std::cout, std::cerr);
}
