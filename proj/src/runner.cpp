#include "chargegame/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <thread>

namespace chargegame {
namespace {

std::filesystem::path place(const std::filesystem::path& out_dir, const std::string& ref) {
  std::filesystem::path p(ref);
  if (p.is_absolute() || out_dir.empty()) return p;
  return out_dir / p;
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

}  // namespace

SimulateResult cmd_simulate(const ScenarioConfig& config, const SimulateOptions& options) {
  BuiltGame built = build_game(config);
  const GameSpec& game = built.game;

  LearnerConfig learner = config.learner;
  if (options.mode_override) learner.mode = *options.mode_override;
  double bound = compute_cmax(game);
  if (!config.c_max_explicit)
    learner.c_max = bound;
  else if (learner.c_max < bound * (1.0 - 1e-12))
    throw std::runtime_error("scenario c_max " + format_sig(learner.c_max) +
                             " is below the built game's bound " + format_sig(bound));
  learner.validate();

  uint64_t base_seed = options.seed_override.value_or(learner.seed);
  MixedProfile initial = config.initial.build(game.n_players(), game.n_resources());

  const int n_runs = config.runs;
  std::vector<RunSummary> summaries(n_runs);

  auto run_one = [&](int k) {
    LearnerConfig cfg = learner;
    cfg.seed = base_seed + static_cast<uint64_t>(k);
    Trajectory traj = run(game, cfg, initial, options.threads);

    RunSummary s;
    s.run = k;
    s.seed = cfg.seed;
    s.iterations = traj.iterations_run;
    s.converged_at = traj.converged_at;
    s.final_histogram.assign(game.n_resources(), 0);
    for (int a : traj.final_profile.actions) ++s.final_histogram[a];
    auto mean = traj.mean_row(traj.mean_rows() - 1);
    s.final_mean.assign(mean.begin(), mean.end());
    s.nash = is_nash(game, traj.final_profile, config.ne_epsilon);

    std::string name = config.outputs.trajectory_path + "_run" + std::to_string(k) + ".csv";
    s.trajectory_file = place(options.out_dir, name);
    ensure_parent(s.trajectory_file);
    std::ofstream out(s.trajectory_file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + s.trajectory_file.string() + "'");
    write_trajectory_csv(out, traj);
    summaries[k] = std::move(s);
  };

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  int concurrent = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(n_runs)));
  if (concurrent <= 1) {
    for (int k = 0; k < n_runs; ++k) run_one(k);
  } else {
    std::vector<std::future<void>> pending;
    for (int k = 0; k < n_runs; ++k)
      pending.push_back(std::async(std::launch::async, run_one, k));
    for (auto& f : pending) f.get();  // rethrows run failures
  }

  json per_run = json::array();
  int converged = 0;
  std::vector<long> modal_totals(game.n_resources(), 0);
  for (const RunSummary& s : summaries) {
    if (s.converged_at) ++converged;
    for (int a = 0; a < game.n_resources(); ++a) modal_totals[a] += s.final_histogram[a];
    json row;
    row["run"] = s.run;
    row["seed"] = s.seed;
    row["iterations"] = s.iterations;
    if (s.converged_at)
      row["converged_at"] = *s.converged_at;
    else
      row["converged_at"] = nullptr;
    row["final_profile_histogram"] = s.final_histogram;
    row["final_mean_strategy"] = s.final_mean;
    row["is_nash"] = s.nash;
    // relative name: keeps the summary byte-identical across output dirs
    row["trajectory_file"] =
        config.outputs.trajectory_path + "_run" + std::to_string(s.run) + ".csv";
    per_run.push_back(std::move(row));
  }

  json summary;
  summary["resources"] = built.resource_names;
  summary["n_players"] = game.n_players();
  summary["mode"] = learner.mode == UpdateMode::synchronous ? "synchronous" : "asynchronous";
  summary["delta"] = learner.delta;
  summary["c_max"] = learner.c_max;
  summary["base_seed"] = base_seed;
  summary["runs"] = per_run;
  summary["aggregate"] =
      json{{"converged_runs", converged}, {"total_runs", n_runs}, {"modal_players", modal_totals}};

  SimulateResult result;
  result.runs = std::move(summaries);
  result.summary_file = place(options.out_dir, config.outputs.summary_path);
  write_json_file(result.summary_file, summary);

  if (!options.quiet) {
    for (const RunSummary& s : result.runs) {
      std::cout << "run " << s.run << ": ";
      if (s.converged_at)
        std::cout << "converged at iteration " << *s.converged_at;
      else
        std::cout << "stopped at iteration " << s.iterations;
      std::cout << ", nash=" << (s.nash ? "yes" : "no") << '\n';
    }
    std::cout << "summary written to " << result.summary_file.string() << '\n';
  }
  return result;
}

json find_ne_report(const ScenarioConfig& config) {
  BuiltGame built = build_game(config);
  const GameSpec& game = built.game;

  json report;
  report["n_players"] = game.n_players();
  report["resources"] = built.resource_names;
  report["symmetric"] = game.has_symmetric_alpha();
  if (game.has_symmetric_alpha()) {
    std::vector<double> alpha(game.n_resources());
    for (int a = 0; a < game.n_resources(); ++a) alpha[a] = game.alpha(0, a);
    report["alpha"] = alpha;
    report["min_alpha_resources"] = characterize_ne(game);
  } else {
    report["min_alpha_resources"] = nullptr;
    report["note"] = "heterogeneous coefficients: equilibrium support characterization "
                     "is only available for symmetric games";
  }

  double profile_count = std::pow(static_cast<double>(game.n_resources()),
                                  static_cast<double>(game.n_players()));
  bool feasible = profile_count <= 1e6;
  json brute;
  brute["feasible"] = feasible;
  if (feasible) {
    std::vector<ActionProfile> equilibria = enumerate_ne_bruteforce(game);
    brute["ne_count"] = equilibria.size();
    if (game.has_symmetric_alpha()) {
      std::vector<int> support = characterize_ne(game);
      std::vector<bool> in_support(game.n_resources(), false);
      for (int a : support) in_support[a] = true;
      bool match = true;
      for (const ActionProfile& p : equilibria)
        for (int a : p.actions)
          if (!in_support[a]) match = false;
      double expected = std::pow(static_cast<double>(support.size()),
                                 static_cast<double>(game.n_players()));
      match = match && (static_cast<double>(equilibria.size()) == expected);
      brute["matches_characterization"] = match;
    }
  } else {
    brute["note"] = "profile space above 1e6: exhaustive scan skipped";
  }
  report["brute_force"] = std::move(brute);
  return report;
}

std::filesystem::path cmd_find_ne(const ScenarioConfig& config, const SimulateOptions& options) {
  json report = find_ne_report(config);
  std::filesystem::path out = place(options.out_dir, config.outputs.summary_path);
  write_json_file(out, report);
  if (!options.quiet) {
    if (report["symmetric"].get<bool>())
      std::cout << "equilibrium support: " << report["min_alpha_resources"].dump() << '\n';
    std::cout << "report written to " << out.string() << '\n';
  }
  return out;
}

json reduce_grid_report(const std::filesystem::path& grid_path, double l_max_kw, int n_players) {
  GridScenario scenario = load_grid_scenario(grid_path);
  if (n_players < 1) throw std::invalid_argument("reduce-grid: n_players must be >= 1");
  double l_max = l_max_kw > 0.0 ? l_max_kw : n_players * scenario.pricing.rho_kwh;
  auto reduction = reduce_grid(scenario.net, scenario.pricing, l_max);
  GameSpec game = build_congestion_game(scenario.net, scenario.pricing, *reduction, n_players);

  json report;
  report["grid_scenario"] = grid_path.string();
  report["n_players"] = n_players;
  report["rho_kwh"] = scenario.pricing.rho_kwh;
  report["l_max_kw"] = l_max;
  json evcs = json::array();
  for (int s : scenario.net.evcs_indices()) evcs.push_back(scenario.net.buses()[s].id);
  report["evcs"] = evcs;
  report["alpha_tilde"] = reduction->alpha_tilde();
  report["objective_value"] = reduction->objective_value();
  report["base_load_kw"] = reduction->weighted_base_load_kw();
  report["lambda_table"] = json{{"x", game.lambda().table_x()}, {"y", game.lambda().table_y()}};
  return report;
}

std::filesystem::path cmd_reduce_grid(const std::filesystem::path& grid_path, double l_max_kw,
                                      int n_players, const std::filesystem::path& out_path,
                                      bool quiet) {
  json report = reduce_grid_report(grid_path, l_max_kw, n_players);
  write_json_file(out_path, report);
  if (!quiet) {
    const auto& evcs = report["evcs"];
    const auto& alpha = report["alpha_tilde"];
    for (size_t s = 0; s < evcs.size(); ++s)
      std::cout << "alpha_tilde[" << evcs[s].get<std::string>() << "] = "
                << format_sig(alpha[s].get<double>()) << '\n';
    std::cout << "objective = " << format_sig(report["objective_value"].get<double>()) << '\n';
    std::cout << "report written to " << out_path.string() << '\n';
  }
  return out_path;
}

void cmd_powerflow(const std::filesystem::path& grid_path,
                   const std::map<std::string, double>& load_overrides_kw, std::ostream& out) {
  GridScenario scenario = load_grid_scenario(grid_path);
  std::vector<double> loads = scenario.net.base_loads_kw();
  for (const auto& [id, kw] : load_overrides_kw) loads[scenario.net.bus_index(id)] = kw;

  PowerFlowSolution sol = solve_power_flow(scenario.net, loads);
  for (int k = 0; k < scenario.net.n_buses(); ++k) {
    const auto& v = sol.voltages[k];
    out << "bus " << scenario.net.buses()[k].id << ": |V| = " << format_sig(std::abs(v))
        << " pu, angle = " << format_sig(std::arg(v) * 180.0 / 3.14159265358979323846)
        << " deg\n";
  }
  out << "S0 = " << format_sig(sol.head_apparent_power.real()) << " + j"
      << format_sig(sol.head_apparent_power.imag())
      << " pu, |S0| = " << format_sig(sol.head_mva(scenario.net)) << " MVA\n";
  out << "residual = " << format_sig(sol.residual) << " pu\n";
  out << "iterations = " << sol.iterations << '\n';
}

}  // namespace chargegame
