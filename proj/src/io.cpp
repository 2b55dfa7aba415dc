#include "chargegame/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace chargegame {
namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

double require_number(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_number()) fail("missing numeric field '" + key + "'");
  return j[key].get<double>();
}

std::string require_string(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_string()) fail("missing string field '" + key + "'");
  return j[key].get<std::string>();
}

std::vector<double> number_array(const json& j) {
  if (!j.is_array()) fail("expected a numeric array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) fail("expected a numeric array");
    out.push_back(v.get<double>());
  }
  return out;
}

json complex_to_json(std::complex<double> z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

std::complex<double> complex_from_json(const json& j) {
  return {require_number(j, "re"), j.contains("im") ? j["im"].get<double>() : 0.0};
}

BusKind bus_kind_from_string(const std::string& s) {
  if (s == "slack") return BusKind::slack;
  if (s == "transformer") return BusKind::transformer;
  if (s == "evcs") return BusKind::evcs;
  if (s == "load") return BusKind::load;
  fail("unknown bus kind '" + s + "'");
}

std::string bus_kind_to_string(BusKind kind) {
  switch (kind) {
    case BusKind::slack: return "slack";
    case BusKind::transformer: return "transformer";
    case BusKind::evcs: return "evcs";
    case BusKind::load: return "load";
  }
  return "?";
}

}  // namespace

std::string format_sig(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return buf;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1, col = 1;
    for (size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
         ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& payload) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << payload.dump(2) << '\n';
}

json lambda_to_json(const LambdaFn& fn) {
  switch (fn.kind()) {
    case LambdaFn::Kind::affine:
      return json{{"kind", "affine"}, {"c0", fn.coefficients()[0]}, {"c1", fn.coefficients()[1]}};
    case LambdaFn::Kind::polynomial:
      return json{{"kind", "polynomial"}, {"coefficients", fn.coefficients()}};
    case LambdaFn::Kind::tabulated:
      return json{{"kind", "tabulated"}, {"x", fn.table_x()}, {"y", fn.table_y()}};
    case LambdaFn::Kind::grid_marginal:
      fail("a live grid-marginal price function is not serializable; "
           "reference the grid scenario instead");
  }
  fail("unknown lambda kind");
}

LambdaFn lambda_from_json(const json& j) {
  std::string kind = require_string(j, "kind");
  if (kind == "affine") return LambdaFn::affine(require_number(j, "c0"), require_number(j, "c1"));
  if (kind == "polynomial") {
    if (!j.contains("coefficients")) fail("polynomial lambda needs 'coefficients'");
    return LambdaFn::polynomial(number_array(j["coefficients"]));
  }
  if (kind == "tabulated") {
    if (!j.contains("x") || !j.contains("y")) fail("tabulated lambda needs 'x' and 'y'");
    return LambdaFn::tabulated(number_array(j["x"]), number_array(j["y"]));
  }
  fail("unknown lambda kind '" + kind + "'");
}

json game_to_json(const GameSpec& game) {
  json j;
  j["n_players"] = game.n_players();
  j["n_resources"] = game.n_resources();
  if (game.has_symmetric_alpha()) {
    std::vector<double> row(game.n_resources());
    for (int a = 0; a < game.n_resources(); ++a) row[a] = game.alpha(0, a);
    j["alpha"] = row;
  } else {
    json rows = json::array();
    for (int i = 0; i < game.n_players(); ++i) {
      std::vector<double> row(game.n_resources());
      for (int a = 0; a < game.n_resources(); ++a) row[a] = game.alpha(i, a);
      rows.push_back(row);
    }
    j["alpha"] = rows;
  }
  j["lambda"] = lambda_to_json(game.lambda());
  j["base_load"] = game.base_load();
  return j;
}

GameSpec game_from_json(const json& j) {
  if (!j.contains("alpha") || !j["alpha"].is_array() || j["alpha"].empty())
    fail("game needs a non-empty 'alpha'");
  double base_load = j.contains("base_load") ? j["base_load"].get<double>() : 0.0;
  LambdaFn lambda = j.contains("lambda") ? lambda_from_json(j["lambda"])
                                         : LambdaFn::affine(0.0, 1.0);
  if (j["alpha"][0].is_array()) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : j["alpha"]) rows.push_back(number_array(r));
    return GameSpec(Matrix::from_rows(rows), std::move(lambda), base_load);
  }
  int n_players = static_cast<int>(require_number(j, "n_players"));
  return GameSpec::symmetric(n_players, number_array(j["alpha"]), std::move(lambda), base_load);
}

json grid_scenario_to_json(const GridScenario& scenario) {
  const GridNetwork& net = scenario.net;
  json j;
  j["power_base_mva"] = net.power_base_mva();
  j["slack_voltage"] = complex_to_json(net.slack_voltage());
  json buses = json::array();
  for (const Bus& bus : net.buses())
    buses.push_back(json{{"id", bus.id},
                         {"kind", bus_kind_to_string(bus.kind)},
                         {"base_load_kw", bus.base_load_kw}});
  j["buses"] = buses;
  json lines = json::array();
  for (const Line& line : net.lines())
    lines.push_back(json{{"from", line.from},
                         {"to", line.to},
                         {"admittance", {{"g", line.admittance.real()},
                                         {"b", line.admittance.imag()}}}});
  j["lines"] = lines;
  json evcs = json::array();
  for (int s : net.evcs_indices()) evcs.push_back(net.buses()[s].id);
  j["evcs_buses"] = evcs;
  j["pricing"] = json{{"eta", scenario.pricing.eta},
                      {"rho_kwh", scenario.pricing.rho_kwh},
                      {"fd_step_kw", scenario.pricing.fd_step_kw}};
  return j;
}

GridScenario grid_scenario_from_json(const json& j) {
  if (!j.contains("buses") || !j["buses"].is_array()) fail("grid scenario needs 'buses'");
  std::vector<Bus> buses;
  for (const auto& bj : j["buses"]) {
    Bus bus;
    bus.id = require_string(bj, "id");
    bus.kind = bus_kind_from_string(require_string(bj, "kind"));
    bus.base_load_kw = bj.contains("base_load_kw") ? bj["base_load_kw"].get<double>() : 0.0;
    buses.push_back(std::move(bus));
  }
  if (!j.contains("lines") || !j["lines"].is_array()) fail("grid scenario needs 'lines'");
  std::vector<Line> lines;
  for (const auto& lj : j["lines"]) {
    Line line;
    line.from = require_string(lj, "from");
    line.to = require_string(lj, "to");
    if (lj.contains("admittance")) {
      line.admittance = {require_number(lj["admittance"], "g"),
                         lj["admittance"].contains("b") ? lj["admittance"]["b"].get<double>() : 0.0};
    } else if (lj.contains("impedance")) {
      std::complex<double> z(require_number(lj["impedance"], "r"),
                             lj["impedance"].contains("x") ? lj["impedance"]["x"].get<double>() : 0.0);
      if (std::abs(z) <= 0.0) fail("line impedance must be nonzero");
      line.admittance = 1.0 / z;
    } else {
      fail("line needs 'impedance' or 'admittance'");
    }
    lines.push_back(std::move(line));
  }
  std::complex<double> slack_voltage(1.0, 0.0);
  if (j.contains("slack_voltage")) slack_voltage = complex_from_json(j["slack_voltage"]);
  std::vector<std::string> evcs_order;
  if (!j.contains("evcs_buses") || !j["evcs_buses"].is_array())
    fail("grid scenario needs 'evcs_buses' (resource order)");
  for (const auto& id : j["evcs_buses"]) evcs_order.push_back(id.get<std::string>());
  double base_mva = require_number(j, "power_base_mva");

  PricingConfig pricing;
  if (j.contains("pricing")) {
    const json& p = j["pricing"];
    pricing.eta = require_number(p, "eta");
    pricing.rho_kwh = require_number(p, "rho_kwh");
    if (p.contains("fd_step_kw")) pricing.fd_step_kw = p["fd_step_kw"].get<double>();
  }
  pricing.validate();
  return {GridNetwork(std::move(buses), std::move(lines), slack_voltage, std::move(evcs_order),
                      base_mva),
          pricing};
}

GridScenario load_grid_scenario(const std::filesystem::path& path) {
  try {
    return grid_scenario_from_json(load_json_file(path));
  } catch (const std::exception& e) {
    fail("grid scenario '" + path.string() + "': " + e.what());
  }
}

json learner_to_json(const LearnerConfig& cfg, bool c_max_explicit) {
  json j;
  j["delta"] = cfg.delta;
  j["mode"] = cfg.mode == UpdateMode::synchronous ? "synchronous" : "asynchronous";
  j["max_iterations"] = cfg.max_iterations;
  j["convergence_threshold"] = cfg.convergence_threshold;
  j["seed"] = cfg.seed;
  j["snapshot_stride"] = cfg.snapshot_stride;
  if (c_max_explicit) j["c_max"] = cfg.c_max;
  return j;
}

LearnerConfig learner_from_json(const json& j, bool* c_max_explicit) {
  LearnerConfig cfg;
  cfg.delta = require_number(j, "delta");
  if (j.contains("mode")) {
    std::string mode = j["mode"].get<std::string>();
    if (mode == "synchronous" || mode == "sync")
      cfg.mode = UpdateMode::synchronous;
    else if (mode == "asynchronous" || mode == "async")
      cfg.mode = UpdateMode::asynchronous;
    else
      fail("unknown learner mode '" + mode + "'");
  }
  if (j.contains("max_iterations")) cfg.max_iterations = j["max_iterations"].get<long>();
  if (j.contains("convergence_threshold"))
    cfg.convergence_threshold = j["convergence_threshold"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("snapshot_stride")) cfg.snapshot_stride = j["snapshot_stride"].get<long>();
  bool has_cmax = j.contains("c_max");
  if (has_cmax) cfg.c_max = j["c_max"].get<double>();
  if (c_max_explicit) *c_max_explicit = has_cmax;
  return cfg;
}

MixedProfile InitialStrategy::build(int n_players, int n_resources) const {
  switch (kind) {
    case Kind::uniform:
      return MixedProfile::uniform(n_players, n_resources);
    case Kind::explicit_matrix: {
      if (matrix.rows() != n_players || matrix.cols() != n_resources)
        fail("initial strategy matrix shape does not match the game");
      return MixedProfile(matrix);
    }
    case Kind::concentrated: {
      if (resource < 0 || resource >= n_resources) fail("initial strategy resource out of range");
      if (!(weight > 0.0) || !(weight <= 1.0)) fail("initial strategy weight must be in (0, 1]");
      Matrix m(n_players, n_resources,
               n_resources > 1 ? (1.0 - weight) / (n_resources - 1) : 0.0);
      for (int i = 0; i < n_players; ++i) m(i, resource) = n_resources > 1 ? weight : 1.0;
      return MixedProfile(std::move(m));
    }
  }
  fail("unknown initial strategy kind");
}

std::filesystem::path ScenarioConfig::resolve(const std::string& ref) const {
  std::filesystem::path p(ref);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

json scenario_to_json(const ScenarioConfig& config) {
  json game;
  if (config.inline_game) {
    game["inline"] = *config.inline_game;
  } else if (config.grid_scenario) {
    game["grid_scenario"] = *config.grid_scenario;
    game["n_players"] = config.n_players;
    if (config.l_max_kw) game["l_max_kw"] = *config.l_max_kw;
  } else if (config.reduction_file) {
    game["reduction_file"] = *config.reduction_file;
    if (config.n_players > 0) game["n_players"] = config.n_players;
  }
  json init;
  switch (config.initial.kind) {
    case InitialStrategy::Kind::uniform:
      init["kind"] = "uniform";
      break;
    case InitialStrategy::Kind::explicit_matrix: {
      init["kind"] = "explicit";
      json rows = json::array();
      for (int i = 0; i < config.initial.matrix.rows(); ++i) {
        std::vector<double> row(config.initial.matrix.row(i).begin(),
                                config.initial.matrix.row(i).end());
        rows.push_back(row);
      }
      init["matrix"] = rows;
      break;
    }
    case InitialStrategy::Kind::concentrated:
      init["kind"] = "concentrated";
      init["resource"] = config.initial.resource;
      init["weight"] = config.initial.weight;
      break;
  }
  json outputs;
  outputs["trajectory_path"] = config.outputs.trajectory_path;
  outputs["summary_path"] = config.outputs.summary_path;
  if (config.outputs.stride) outputs["stride"] = *config.outputs.stride;

  json j;
  j["game"] = game;
  j["learner"] = learner_to_json(config.learner, config.c_max_explicit);
  j["initial_strategy"] = init;
  j["outputs"] = outputs;
  j["runs"] = config.runs;
  if (config.ne_epsilon != 0.0) j["ne_epsilon"] = config.ne_epsilon;
  return j;
}

ScenarioConfig scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
  ScenarioConfig config;
  config.base_dir = base_dir;
  if (!j.contains("game")) fail("scenario needs a 'game' section");
  const json& game = j["game"];
  int sources = 0;
  if (game.contains("inline")) {
    config.inline_game = game["inline"];
    ++sources;
  }
  if (game.contains("grid_scenario")) {
    config.grid_scenario = game["grid_scenario"].get<std::string>();
    config.n_players = static_cast<int>(require_number(game, "n_players"));
    if (game.contains("l_max_kw")) config.l_max_kw = game["l_max_kw"].get<double>();
    ++sources;
  }
  if (game.contains("reduction_file")) {
    config.reduction_file = game["reduction_file"].get<std::string>();
    if (game.contains("n_players")) config.n_players = game["n_players"].get<int>();
    ++sources;
  }
  if (sources != 1) fail("scenario 'game' needs exactly one of inline / grid_scenario / reduction_file");

  if (!j.contains("learner")) fail("scenario needs a 'learner' section");
  config.learner = learner_from_json(j["learner"], &config.c_max_explicit);

  if (j.contains("initial_strategy")) {
    const json& init = j["initial_strategy"];
    std::string kind = require_string(init, "kind");
    if (kind == "uniform") {
      config.initial.kind = InitialStrategy::Kind::uniform;
    } else if (kind == "explicit") {
      config.initial.kind = InitialStrategy::Kind::explicit_matrix;
      std::vector<std::vector<double>> rows;
      for (const auto& r : init["matrix"]) rows.push_back(number_array(r));
      config.initial.matrix = Matrix::from_rows(rows);
    } else if (kind == "concentrated") {
      config.initial.kind = InitialStrategy::Kind::concentrated;
      config.initial.resource = static_cast<int>(require_number(init, "resource"));
      if (init.contains("weight")) config.initial.weight = init["weight"].get<double>();
    } else {
      fail("unknown initial strategy '" + kind + "'");
    }
  }

  if (j.contains("outputs")) {
    const json& outputs = j["outputs"];
    if (outputs.contains("trajectory_path"))
      config.outputs.trajectory_path = outputs["trajectory_path"].get<std::string>();
    if (outputs.contains("summary_path"))
      config.outputs.summary_path = outputs["summary_path"].get<std::string>();
    if (outputs.contains("stride")) config.outputs.stride = outputs["stride"].get<long>();
  }
  if (config.outputs.stride) config.learner.snapshot_stride = *config.outputs.stride;

  if (j.contains("runs")) config.runs = j["runs"].get<int>();
  if (config.runs < 1) fail("scenario needs at least one run");
  if (j.contains("ne_epsilon")) config.ne_epsilon = j["ne_epsilon"].get<double>();
  return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  json j = load_json_file(path);
  try {
    return scenario_from_json(j, path.has_parent_path() ? path.parent_path()
                                                        : std::filesystem::path("."));
  } catch (const std::exception& e) {
    fail("scenario '" + path.string() + "': " + e.what());
  }
}

BuiltGame build_game(const ScenarioConfig& config) {
  if (config.inline_game) {
    GameSpec game = game_from_json(*config.inline_game);
    std::vector<std::string> names;
    for (int a = 0; a < game.n_resources(); ++a) names.push_back("r" + std::to_string(a));
    return {std::move(game), nullptr, std::move(names)};
  }
  if (config.grid_scenario) {
    if (config.n_players < 1) fail("grid-backed scenario needs n_players >= 1");
    GridScenario scenario = load_grid_scenario(config.resolve(*config.grid_scenario));
    double l_max = config.l_max_kw.value_or(config.n_players * scenario.pricing.rho_kwh);
    auto reduction = reduce_grid(scenario.net, scenario.pricing, l_max);
    GameSpec game =
        build_congestion_game(scenario.net, scenario.pricing, *reduction, config.n_players);
    std::vector<std::string> names;
    for (int s : scenario.net.evcs_indices()) names.push_back(scenario.net.buses()[s].id);
    return {std::move(game), std::move(reduction), std::move(names)};
  }
  if (config.reduction_file) {
    json j = load_json_file(config.resolve(*config.reduction_file));
    double rho = require_number(j, "rho_kwh");
    std::vector<double> alpha_tilde = number_array(j["alpha_tilde"]);
    double base = require_number(j, "base_load_kw");
    int n_players = config.n_players > 0 ? config.n_players
                                         : static_cast<int>(require_number(j, "n_players"));
    if (!j.contains("lambda_table")) fail("reduction file needs 'lambda_table'");
    LambdaFn lambda = LambdaFn::tabulated(number_array(j["lambda_table"]["x"]),
                                          number_array(j["lambda_table"]["y"]));
    std::vector<double> coeffs(alpha_tilde.size());
    for (size_t s = 0; s < alpha_tilde.size(); ++s) coeffs[s] = rho * alpha_tilde[s];
    GameSpec game = GameSpec::symmetric(n_players, std::move(coeffs), std::move(lambda), base);
    std::vector<std::string> names;
    if (j.contains("evcs"))
      for (const auto& id : j["evcs"]) names.push_back(id.get<std::string>());
    else
      for (int a = 0; a < game.n_resources(); ++a) names.push_back("r" + std::to_string(a));
    return {std::move(game), nullptr, std::move(names)};
  }
  fail("scenario has no game source");
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const int m = trajectory.n_resources;
  out << "iteration,player";
  for (int a = 0; a < m; ++a) out << ",p" << a;
  out << ",action,cost\n";

  std::map<long, const TrajectorySnapshot*> snapshots;
  for (const auto& snap : trajectory.snapshots) snapshots[snap.iteration] = &snap;
  std::map<long, const RealizedStep*> realized;
  for (const auto& step : trajectory.realized) realized[step.iteration] = &step;

  for (long it = 0; it < trajectory.mean_rows(); ++it) {
    out << it << ",mean";
    for (double p : trajectory.mean_row(it)) out << ',' << format_sig(p);
    out << ",-,-\n";
    auto snap = snapshots.find(it);
    if (snap == snapshots.end()) continue;
    auto step = realized.find(it);
    const Matrix& probs = snap->second->probs;
    for (int i = 0; i < probs.rows(); ++i) {
      out << it << ',' << i;
      for (int a = 0; a < m; ++a) out << ',' << format_sig(probs(i, a));
      if (step != realized.end())
        out << ',' << step->second->actions[i] << ',' << format_sig(step->second->costs[i]);
      else
        out << ",-,-";
      out << '\n';
    }
  }
}

}  // namespace chargegame
