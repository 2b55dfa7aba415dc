#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "chargegame/runner.hpp"

namespace {

std::map<std::string, double> parse_loads(const std::vector<std::string>& entries) {
  std::map<std::string, double> loads;
  for (const std::string& entry : entries) {
    auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--load", "expected <bus>=<kw>, got '" + entry + "'");
    loads[entry.substr(0, eq)] = std::stod(entry.substr(eq + 1));
  }
  return loads;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Congestion-game learning simulator with a smart-charging grid backend"};
  app.require_subcommand(1);

  std::string config_path, grid_path, out_path = "reduction.json", out_dir;
  std::string mode;
  uint64_t seed = 0;
  bool seed_set = false, quiet = false;
  int threads = 1, n_players = 1500;
  double l_max = 0.0;
  std::vector<std::string> load_args;

  auto* simulate = app.add_subcommand("simulate", "run learning on a configured scenario");
  simulate->add_option("--config", config_path, "scenario config (JSON)")->required();
  simulate->add_option("--seed", seed, "override the base seed")->each([&](const std::string&) {
    seed_set = true;
  });
  simulate->add_option("--mode", mode, "override the update mode")
      ->check(CLI::IsMember({"sync", "async", "synchronous", "asynchronous"}));
  simulate->add_option("--out-dir", out_dir, "directory for relative output paths");
  simulate->add_option("--threads", threads, "per-run worker threads");
  simulate->add_flag("--quiet", quiet, "suppress progress output");

  auto* find_ne = app.add_subcommand("find-ne", "report the game's pure equilibria");
  find_ne->add_option("--config", config_path, "scenario config (JSON)")->required();
  find_ne->add_option("--out-dir", out_dir, "directory for relative output paths");
  find_ne->add_flag("--quiet", quiet, "suppress output");

  auto* reduce = app.add_subcommand("reduce-grid", "fit transformer-equivalent scale factors");
  reduce->add_option("--grid", grid_path, "grid scenario (JSON)")->required();
  reduce->add_option("--l-max", l_max, "sweep upper bound in kW (default: n_players * rho)");
  reduce->add_option("--n-players", n_players, "players used to size the price table");
  reduce->add_option("--out", out_path, "output report path");
  reduce->add_flag("--quiet", quiet, "suppress output");

  auto* powerflow = app.add_subcommand("powerflow", "one-shot power-flow solve");
  powerflow->add_option("--grid", grid_path, "grid scenario (JSON)")->required();
  powerflow->add_option("--load", load_args, "override a bus load, <bus>=<kw> (repeatable)");
  powerflow->add_flag("--quiet", quiet, "suppress output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      chargegame::ScenarioConfig config = chargegame::load_scenario(config_path);
      chargegame::SimulateOptions options;
      if (seed_set) options.seed_override = seed;
      if (mode == "sync" || mode == "synchronous")
        options.mode_override = chargegame::UpdateMode::synchronous;
      else if (mode == "async" || mode == "asynchronous")
        options.mode_override = chargegame::UpdateMode::asynchronous;
      options.out_dir = out_dir;
      options.threads = threads;
      options.quiet = quiet;
      chargegame::cmd_simulate(config, options);
    } else if (find_ne->parsed()) {
      chargegame::ScenarioConfig config = chargegame::load_scenario(config_path);
      chargegame::SimulateOptions options;
      options.out_dir = out_dir;
      options.quiet = quiet;
      chargegame::cmd_find_ne(config, options);
    } else if (reduce->parsed()) {
      chargegame::cmd_reduce_grid(grid_path, l_max, n_players, out_path, quiet);
    } else if (powerflow->parsed()) {
      chargegame::cmd_powerflow(grid_path, parse_loads(load_args), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
