#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chargegame/io.hpp"
#include "chargegame/runner.hpp"

namespace py = pybind11;
using namespace chargegame;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  return Matrix::from_rows(rows);
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (int r = 0; r < m.rows(); ++r) rows[r].assign(m.row(r).begin(), m.row(r).end());
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Congestion games with load-coupled costs, reward-inaction learning "
            "and a smart-charging power-flow backend";

  py::class_<LambdaFn>(m, "LambdaFn")
      .def_static("affine", &LambdaFn::affine, py::arg("c0"), py::arg("c1"))
      .def_static("polynomial", &LambdaFn::polynomial, py::arg("coefficients"))
      .def_static("tabulated", &LambdaFn::tabulated, py::arg("x"), py::arg("y"))
      .def("__call__", &LambdaFn::operator())
      .def("describe", &LambdaFn::describe);

  py::class_<GameSpec>(m, "GameSpec")
      .def(py::init([](const std::vector<std::vector<double>>& alpha, const LambdaFn& lambda,
                       double base_load) {
             return GameSpec(matrix_from_rows(alpha), lambda, base_load);
           }),
           py::arg("alpha"), py::arg("lambda_fn"), py::arg("base_load") = 0.0)
      .def_static(
          "symmetric",
          [](int n_players, const std::vector<double>& alpha, const LambdaFn& lambda,
             double base_load) {
            return GameSpec::symmetric(n_players, alpha, lambda, base_load);
          },
          py::arg("n_players"), py::arg("alpha"), py::arg("lambda_fn"),
          py::arg("base_load") = 0.0)
      .def_property_readonly("n_players", &GameSpec::n_players)
      .def_property_readonly("n_resources", &GameSpec::n_resources)
      .def_property_readonly("base_load", &GameSpec::base_load)
      .def("alpha", py::overload_cast<int, int>(&GameSpec::alpha, py::const_))
      .def("lambda_at", &GameSpec::lambda_at)
      .def("has_symmetric_alpha", &GameSpec::has_symmetric_alpha);

  py::class_<MixedProfile>(m, "MixedProfile")
      .def(py::init([](const std::vector<std::vector<double>>& rows) {
             return MixedProfile(matrix_from_rows(rows));
           }),
           py::arg("probs"))
      .def_static("uniform", &MixedProfile::uniform, py::arg("n_players"), py::arg("n_resources"))
      .def_static("degenerate", &MixedProfile::degenerate, py::arg("actions"),
                  py::arg("n_resources"))
      .def_property_readonly("probs",
                             [](const MixedProfile& p) { return matrix_to_rows(p.probs()); });

  m.def("count_loads", [](const GameSpec& g, const std::vector<int>& actions) {
    return count_loads(g, ActionProfile(actions));
  });
  m.def("aggregate_load", [](const GameSpec& g, const std::vector<int>& actions) {
    return aggregate_load(g, ActionProfile(actions));
  });
  m.def("cost", [](const GameSpec& g, int player, const std::vector<int>& actions) {
    return cost(g, player, ActionProfile(actions));
  });
  m.def("ordinal_potential", [](const GameSpec& g, const std::vector<int>& actions) {
    return ordinal_potential(g, ActionProfile(actions));
  });
  m.def(
      "is_nash",
      [](const GameSpec& g, const std::vector<int>& actions, double epsilon) {
        return is_nash(g, ActionProfile(actions), epsilon);
      },
      py::arg("game"), py::arg("actions"), py::arg("epsilon") = 0.0);
  m.def("characterize_ne", &characterize_ne);
  m.def("enumerate_ne_bruteforce", [](const GameSpec& g) {
    std::vector<std::vector<int>> out;
    for (const ActionProfile& p : enumerate_ne_bruteforce(g)) out.push_back(p.actions);
    return out;
  });
  m.def("expected_cost", [](const GameSpec& g, const MixedProfile& mixed, int player,
                            int resource) { return expected_cost(g, mixed, player, resource); });
  m.def(
      "expected_cost_mc",
      [](const GameSpec& g, const MixedProfile& mixed, int player, int resource, long samples,
         uint64_t seed) {
        McEstimate e = expected_cost_mc(g, mixed.probs(), player, resource, samples, seed);
        return py::make_tuple(e.estimate, e.std_error);
      },
      py::arg("game"), py::arg("mixed"), py::arg("player"), py::arg("resource"),
      py::arg("samples"), py::arg("seed") = 0);
  m.def("continuous_potential", [](const GameSpec& g, const MixedProfile& mixed) {
    return continuous_potential(g, mixed);
  });
  // Raw variants evaluate the multilinear forms on an arbitrary matrix, the
  // shape finite-difference probes of the potential need.
  m.def("continuous_potential_raw",
        [](const GameSpec& g, const std::vector<std::vector<double>>& rows) {
          return continuous_potential(g, matrix_from_rows(rows));
        });
  m.def("expected_cost_raw", [](const GameSpec& g, const std::vector<std::vector<double>>& rows,
                                int player, int resource) {
    return expected_cost(g, matrix_from_rows(rows), player, resource);
  });
  m.def("compute_cmax", &compute_cmax);

  py::enum_<UpdateMode>(m, "UpdateMode")
      .value("synchronous", UpdateMode::synchronous)
      .value("asynchronous", UpdateMode::asynchronous);

  py::class_<LearnerConfig>(m, "LearnerConfig")
      .def(py::init([](double delta, double c_max, UpdateMode mode, long max_iterations,
                       double convergence_threshold, uint64_t seed, long snapshot_stride) {
             LearnerConfig cfg{delta, c_max, mode, max_iterations, convergence_threshold, seed,
                               snapshot_stride};
             cfg.validate();
             return cfg;
           }),
           py::arg("delta"), py::arg("c_max"), py::arg("mode") = UpdateMode::synchronous,
           py::arg("max_iterations") = 100000, py::arg("convergence_threshold") = 0.999,
           py::arg("seed") = 0, py::arg("snapshot_stride") = 1)
      .def_static("for_game", &LearnerConfig::for_game, py::arg("game"), py::arg("delta"),
                  py::arg("mode") = UpdateMode::synchronous, py::arg("max_iterations") = 100000,
                  py::arg("seed") = 0)
      .def_readwrite("delta", &LearnerConfig::delta)
      .def_readwrite("c_max", &LearnerConfig::c_max)
      .def_readwrite("mode", &LearnerConfig::mode)
      .def_readwrite("max_iterations", &LearnerConfig::max_iterations)
      .def_readwrite("convergence_threshold", &LearnerConfig::convergence_threshold)
      .def_readwrite("seed", &LearnerConfig::seed)
      .def_readwrite("snapshot_stride", &LearnerConfig::snapshot_stride);

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("iterations_run", [](const Trajectory& t) { return t.iterations_run; })
      .def_property_readonly("converged_at",
                             [](const Trajectory& t) -> py::object {
                               if (t.converged_at) return py::int_(*t.converged_at);
                               return py::none();
                             })
      .def_property_readonly("final_profile",
                             [](const Trajectory& t) { return t.final_profile.actions; })
      .def_property_readonly("final_probs",
                             [](const Trajectory& t) {
                               return matrix_to_rows(t.snapshots.back().probs);
                             })
      .def_property_readonly("mean_history", [](const Trajectory& t) {
        std::vector<std::vector<double>> rows(t.mean_rows());
        for (long k = 0; k < t.mean_rows(); ++k)
          rows[k].assign(t.mean_row(k).begin(), t.mean_row(k).end());
        return rows;
      });

  m.def(
      "run",
      [](const GameSpec& game, const LearnerConfig& config, const MixedProfile& initial,
         int threads) {
        py::gil_scoped_release release;
        return run(game, config, initial, threads);
      },
      py::arg("game"), py::arg("config"), py::arg("initial"), py::arg("threads") = 1);
  m.def("update_strategy", [](const std::vector<double>& row, int action, double cost,
                              const LearnerConfig& cfg) {
    return update_strategy(row, action, cost, cfg);
  });
  m.def("drift_closed_form", [](const GameSpec& game, const MixedProfile& mixed, double c_max) {
    return matrix_to_rows(drift_closed_form(game, mixed.probs(), c_max).entries);
  });
  m.def("drift_monte_carlo", [](const GameSpec& game, const MixedProfile& mixed,
                                const LearnerConfig& cfg, long samples) {
    DriftEstimate e = drift_monte_carlo(game, mixed.probs(), cfg, samples);
    return py::make_tuple(matrix_to_rows(e.mean.entries), matrix_to_rows(e.std_error));
  });
  m.def("lyapunov_descent_check", [](const GameSpec& game, int trials, uint64_t seed) {
    DescentReport r = lyapunov_descent_check(game, trials, seed);
    py::dict d;
    d["violations"] = r.violations;
    d["max_value"] = r.max_value;
    d["max_rel_mismatch"] = r.max_rel_mismatch;
    d["trials"] = r.trials;
    return d;
  });

  py::class_<PricingConfig>(m, "PricingConfig")
      .def(py::init([](double eta, double rho_kwh, double fd_step_kw) {
             PricingConfig p{eta, rho_kwh, fd_step_kw};
             p.validate();
             return p;
           }),
           py::arg("eta") = 5e-3, py::arg("rho_kwh") = 3.0, py::arg("fd_step_kw") = 0.1)
      .def_readwrite("eta", &PricingConfig::eta)
      .def_readwrite("rho_kwh", &PricingConfig::rho_kwh)
      .def_readwrite("fd_step_kw", &PricingConfig::fd_step_kw);

  py::class_<GridNetwork>(m, "GridNetwork")
      .def_property_readonly("n_buses", &GridNetwork::n_buses)
      .def_property_readonly("n_evcs", &GridNetwork::n_evcs)
      .def_property_readonly("power_base_mva", &GridNetwork::power_base_mva)
      .def("bus_index", &GridNetwork::bus_index)
      .def("base_loads_kw", &GridNetwork::base_loads_kw)
      .def("evcs_ids", [](const GridNetwork& net) {
        std::vector<std::string> ids;
        for (int s : net.evcs_indices()) ids.push_back(net.buses()[s].id);
        return ids;
      });

  py::class_<GridScenario>(m, "GridScenario")
      .def_readonly("net", &GridScenario::net)
      .def_readonly("pricing", &GridScenario::pricing);

  m.def("load_grid_scenario",
        [](const std::filesystem::path& path) { return load_grid_scenario(path); });

  py::class_<PowerFlowSolution>(m, "PowerFlowSolution")
      .def_readonly("voltages", &PowerFlowSolution::voltages)
      .def_readonly("head_apparent_power", &PowerFlowSolution::head_apparent_power)
      .def_readonly("residual", &PowerFlowSolution::residual)
      .def_readonly("iterations", &PowerFlowSolution::iterations)
      .def("head_mva", &PowerFlowSolution::head_mva);

  m.def("solve_power_flow",
        [](const GridNetwork& net, const std::map<std::string, double>& loads) {
          return solve_power_flow(net, loads);
        });
  m.def("eno_cost", [](const GridNetwork& net, const std::vector<double>& loads,
                       const PricingConfig& pricing) { return eno_cost(net, loads, pricing); });
  m.def("marginal_price",
        [](const GridNetwork& net, const std::vector<double>& loads, const std::string& bus,
           const PricingConfig& pricing) {
          return marginal_price(net, loads, net.bus_index(bus), pricing);
        });

  py::class_<ReductionResult, std::shared_ptr<ReductionResult>>(m, "ReductionResult")
      .def_property_readonly("alpha_tilde",
                             [](const ReductionResult& r) { return r.alpha_tilde(); })
      .def_property_readonly("objective_value",
                             [](const ReductionResult& r) { return r.objective_value(); })
      .def_property_readonly("l_max_kw", [](const ReductionResult& r) { return r.l_max_kw(); })
      .def("marginal", &ReductionResult::marginal)
      .def("weighted_base_load_kw", &ReductionResult::weighted_base_load_kw);

  m.def("reduce_grid",
        [](const GridNetwork& net, const PricingConfig& pricing, double l_max_kw) {
          py::gil_scoped_release release;
          return std::const_pointer_cast<ReductionResult>(reduce_grid(net, pricing, l_max_kw));
        });
  m.def("charging_cost", [](const ReductionResult& reduction, const PricingConfig& pricing,
                            const std::vector<int>& counts,
                            const std::vector<double>& base_loads_kw, int resource) {
    return charging_cost(reduction, pricing, counts, base_loads_kw, resource);
  });
  m.def("build_congestion_game",
        [](const GridNetwork& net, const PricingConfig& pricing, const ReductionResult& reduction,
           int n_players) {
          py::gil_scoped_release release;
          return build_congestion_game(net, pricing, reduction, n_players);
        });
}
