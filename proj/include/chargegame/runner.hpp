#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chargegame/io.hpp"

namespace chargegame {

struct SimulateOptions {
  std::optional<uint64_t> seed_override;       // replaces the config's base seed
  std::optional<UpdateMode> mode_override;
  std::filesystem::path out_dir;               // prefix for relative output paths
  int threads = 1;                             // per-run worker threads
  bool quiet = false;
};

struct RunSummary {
  int run = 0;
  uint64_t seed = 0;
  long iterations = 0;
  std::optional<long> converged_at;
  std::vector<int> final_histogram;            // modal players per resource
  std::vector<double> final_mean;
  bool nash = false;
  std::filesystem::path trajectory_file;
};

struct SimulateResult {
  std::vector<RunSummary> runs;
  std::filesystem::path summary_file;
};

// Runs every seed of the scenario, writes one trajectory file per run plus a
// JSON summary. Independent runs execute concurrently; outputs depend only on
// the per-run seed, so files are byte-stable for any thread count.
SimulateResult cmd_simulate(const ScenarioConfig& config, const SimulateOptions& options);

// Equilibrium report: the minimal-coefficient support for symmetric games and
// a brute-force cross-check when the profile space is small enough.
json find_ne_report(const ScenarioConfig& config);
std::filesystem::path cmd_find_ne(const ScenarioConfig& config, const SimulateOptions& options);

// Fits the per-station scale factors for a grid scenario and writes a report
// that cmd_simulate can re-ingest as a complete game description.
json reduce_grid_report(const std::filesystem::path& grid_path, double l_max_kw, int n_players);
std::filesystem::path cmd_reduce_grid(const std::filesystem::path& grid_path, double l_max_kw,
                                      int n_players, const std::filesystem::path& out_path,
                                      bool quiet);

// One-shot power flow on a grid scenario; prints voltages, head power and the
// residual. Loads default to the scenario's base demand, individually
// overridable per bus.
void cmd_powerflow(const std::filesystem::path& grid_path,
                   const std::map<std::string, double>& load_overrides_kw, std::ostream& out);

}  // namespace chargegame
