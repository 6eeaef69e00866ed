#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pidflow/app/commands.hpp"

int main(int argc, char** argv) {
  using namespace pidflow::app;

  CLI::App app{"pidflow: distributed PID-flow optimization experiments"};
  app.require_subcommand(1);

  CliOptions options;
  std::string out_dir;
  app.add_option("--out-dir", out_dir, "Directory for output files (overrides output.directory)");
  app.add_flag("--no-svg", options.no_svg, "Skip SVG plots");
  app.add_flag("--quiet", options.quiet, "Only print warnings and errors");

  std::string config_path;
  std::string example;

  auto* run = app.add_subcommand("run", "Integrate one configuration");
  run->add_option("config", config_path, "Config JSON")->required();

  auto* compare = app.add_subcommand("compare", "Integrate several run blocks on one problem");
  compare->add_option("config", config_path, "Config JSON")->required();

  auto* check = app.add_subcommand("check", "Evaluate the convergence condition without integrating");
  check->add_option("config", config_path, "Config JSON")->required();
  check->add_flag("--json", options.json, "Print the report as JSON");

  auto* reproduce = app.add_subcommand("reproduce", "Run a built-in example");
  reproduce->add_option("example", example, "example1, example1_nonconvex or example2")
      ->required()
      ->check(CLI::IsMember({"example1", "example1_nonconvex", "example2"}));

  // Global flags are accepted after the subcommand too.
  for (auto* sub : {run, compare, check, reproduce}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  if (!out_dir.empty()) options.out_dir = out_dir;

  if (*run) return cmd_run(config_path, options, std::cout, std::cerr);
  if (*compare) return cmd_compare(config_path, options, std::cout, std::cerr);
  if (*check) return cmd_check(config_path, options, std::cout, std::cerr);
  return cmd_reproduce(example, options, std::cout, std::cerr);
}
