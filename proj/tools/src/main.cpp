#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fluxinv/errors.hpp"
#include "fluxinv_cli/commands.hpp"
#include "fluxinv_cli/config.hpp"

using namespace fluxinv;

int main(int argc, char** argv) {
  CLI::App app{"fluxinv: Bayesian flux inversion with Box-Cox transformed flux fields"};
  app.require_subcommand(1);
  app.footer(std::string("Config schema: ") + cli::kConfigSchemaVersion + ". Run `fluxinv schema` for all keys.");

  std::string config;
  std::optional<std::uint64_t> seed;

  auto* sim = app.add_subcommand("simulate", "simulate an OSSE data set from a config file");
  sim->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "override [run] seed");
  sim->footer(std::string("Config schema: ") + cli::kConfigSchemaVersion);

  auto* inf = app.add_subcommand("infer", "run the Gibbs sampler and write posterior samples");
  inf->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
  inf->add_option("--seed", seed, "override [run] seed");
  inf->footer(std::string("Config schema: ") + cli::kConfigSchemaVersion);

  cli::DiagnoseOptions dopt;
  auto* dia = app.add_subcommand("diagnose", "score posterior samples against the truth");
  dia->add_option("--grid", dopt.grid, "grid CSV")->required()->check(CLI::ExistingFile);
  dia->add_option("--truth", dopt.truth, "true flux CSV (inventory schema)")->required()->check(CLI::ExistingFile);
  dia->add_option("--samples", dopt.samples_dir, "directory holding flux_samples.csv")->required()->check(
      CLI::ExistingDirectory);
  dia->add_option("--masks", dopt.masks, "region masks CSV; writes aggregates.csv")->check(CLI::ExistingFile);
  dia->add_option("--stations", dopt.stations, "stations CSV (for mole-fraction scores)")->check(CLI::ExistingFile);
  dia->add_option("--heldout", dopt.heldout, "held-out mole fractions CSV")->check(CLI::ExistingFile);
  dia->add_option("--model", dopt.model, "label for the model column")->capture_default_str();
  dia->add_option("--out", dopt.out, "scores CSV")->capture_default_str();
  dia->add_flag("--append", dopt.append, "append a row instead of overwriting");
  dia->footer(std::string("Config schema: ") + cli::kConfigSchemaVersion + " (diagnose takes flags only)");

  long grid_n = 100;
  std::string demo_out = "cumulants_demo";
  auto* demo = app.add_subcommand("cumulants-demo", "write directional-kernel cumulant slices");
  demo->add_option("--grid-n", grid_n, "grid cells on [-10, 10]")->capture_default_str()->check(CLI::Range(3L, 2000L));
  demo->add_option("--out", demo_out, "output directory")->capture_default_str();
  demo->footer(std::string("Config schema: ") + cli::kConfigSchemaVersion + " (demo takes flags only)");

  auto* schema = app.add_subcommand("schema", "print the config schema");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = cli::load_config(config, seed);
      const auto r = cli::cmd_simulate(cfg);
      std::cout << "wrote " << r.written.size() << " files to " << cfg.output_dir << " (" << r.n_observations
                << " observations, " << r.n_heldout << " held out)\n";
    } else if (inf->parsed()) {
      const auto cfg = cli::load_config(config, seed);
      const auto r = cli::cmd_infer(cfg);
      std::cout << "retained " << r.retained << " draws in " << r.seconds << " s; HMC acceptance";
      for (double a : r.acceptance) std::cout << " " << a;
      std::cout << "; inputs " << r.input_hash << "\n";
    } else if (dia->parsed()) {
      const auto r = cli::cmd_diagnose(dopt);
      std::cout << "flux_rmspe " << r.flux_rmspe << " flux_mcrps " << r.flux_mcrps << " mf_rmspe " << r.mf_rmspe
                << " mf_mcrps " << r.mf_mcrps << "\n";
    } else if (demo->parsed()) {
      for (const auto& f : cli::cmd_cumulants_demo(grid_n, demo_out)) std::cout << "wrote " << f << "\n";
    } else if (schema->parsed()) {
      std::cout << cli::describe_schema();
    }
  } catch (const fluxinv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
