#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "chargegame/game.hpp"
#include "chargegame/grid.hpp"
#include "chargegame/learning.hpp"

namespace chargegame {

// Insertion-ordered JSON keeps every emitted document byte-stable.
using json = nlohmann::ordered_json;

// Numeric text output ("%.12g"); JSON payloads keep full round-trip precision.
std::string format_sig(double value, int digits = 12);

// Reads and parses a JSON file; parse failures are rethrown with the file
// name and the line/column of the offending byte.
json load_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& payload);

json lambda_to_json(const LambdaFn& fn);
LambdaFn lambda_from_json(const json& j);

json game_to_json(const GameSpec& game);
GameSpec game_from_json(const json& j);

struct GridScenario {
  GridNetwork net;
  PricingConfig pricing;
};

json grid_scenario_to_json(const GridScenario& scenario);
GridScenario grid_scenario_from_json(const json& j);
GridScenario load_grid_scenario(const std::filesystem::path& path);

json learner_to_json(const LearnerConfig& cfg, bool c_max_explicit);
LearnerConfig learner_from_json(const json& j, bool* c_max_explicit);

struct InitialStrategy {
  enum class Kind { uniform, explicit_matrix, concentrated };
  Kind kind = Kind::uniform;
  Matrix matrix;       // explicit_matrix
  int resource = 0;    // concentrated
  double weight = 0.9; // concentrated

  MixedProfile build(int n_players, int n_resources) const;
};

struct OutputSpec {
  std::string trajectory_path = "trajectory";
  std::string summary_path = "summary.json";
  std::optional<long> stride;  // overrides learner.snapshot_stride when set
};

// A declarative run: where the game comes from, how to learn, what to write.
struct ScenarioConfig {
  // Exactly one game source.
  std::optional<json> inline_game;
  std::optional<std::string> grid_scenario;
  std::optional<std::string> reduction_file;
  int n_players = 0;                  // for grid/reduction sources
  std::optional<double> l_max_kw;     // sweep bound override for the fit

  LearnerConfig learner;
  bool c_max_explicit = false;        // false: sized from the built game
  InitialStrategy initial;
  OutputSpec outputs;
  int runs = 1;
  double ne_epsilon = 0.0;

  std::filesystem::path base_dir;     // resolves relative file references

  std::filesystem::path resolve(const std::string& ref) const;
};

json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const json& j, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// The game a scenario describes, plus whatever grid machinery produced it.
struct BuiltGame {
  GameSpec game;
  std::shared_ptr<const ReductionResult> reduction;  // null for inline games
  std::vector<std::string> resource_names;
};

BuiltGame build_game(const ScenarioConfig& config);

// Delimited trajectory dump: one mean row per iteration plus per-player rows
// (probabilities, realized action, realized cost) wherever a snapshot exists.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace chargegame
