#include "concentra/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"concentra: concentration dynamics of selection-mutation models"};
  app.require_subcommand(1);
  std::string out_dir = ".";
  app.add_option("-o,--out", out_dir, "Directory that receives artifact directories");

  std::string file;
  auto* run = app.add_subcommand("run", "Run the PDE with its canonical comparison and diagnostics");
  run->add_option("scenario", file, "Scenario JSON file")->required();

  std::vector<double> epsilons;
  auto* sweep = app.add_subcommand("sweep", "Run one scenario for several epsilon values");
  sweep->add_option("scenario", file, "Scenario JSON file")->required();
  sweep->add_option("--epsilon", epsilons, "Comma-separated epsilon values")->required()->delimiter(',');

  std::string closure;
  std::string pde_dir;
  auto* canonical = app.add_subcommand("canonical", "Integrate the limit dynamics only");
  canonical->add_option("scenario", file, "Scenario JSON file")->required();
  canonical->add_option("--closure", closure, "from_pde, frozen or riccati")->required();
  canonical->add_option("--pde-dir", pde_dir, "Artifact directory of a previous run");

  auto* check = app.add_subcommand("check", "Validate a scenario and print the assumption report");
  check->add_option("scenario", file, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : concentra::kExitConfig;
  }

  if (*run) return concentra::command_run(file, out_dir, std::cout, std::cerr);
  if (*sweep) return concentra::command_sweep(file, epsilons, out_dir, std::cout, std::cerr);
  if (*canonical) {
    std::optional<std::filesystem::path> dir;
    if (!pde_dir.empty()) dir = pde_dir;
    return concentra::command_canonical(file, closure, dir, out_dir, std::cout, std::cerr);
  }
  return concentra::command_check(file, std::cout, std::cerr);
}
