// Command-line front end: run <config>, verify, plotdata <dir>.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "adaptgd/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive gradient descent experiments and invariant checks"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run a method x seed grid from a JSON config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  app.add_subcommand("verify", "Check every runtime invariant; nonzero exit on violation");

  std::string trace_dir;
  auto* plot = app.add_subcommand("plotdata", "Write two-column plot files from trace CSVs");
  plot->add_option("dir", trace_dir, "Directory holding <label>_seed<k>.csv traces")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : adaptgd::kExitConfig;
  }

  if (*run) return adaptgd::cmd_run(config_path, std::cout, std::cerr);
  if (*plot) return adaptgd::cmd_plotdata(trace_dir, std::cout, std::cerr);
  return adaptgd::cmd_verify(std::cout);
}
