#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "chargegame/grid.hpp"
#include "chargegame/io.hpp"
#include "testutil.hpp"

using namespace chargegame;

#ifndef CHARGEGAME_DATA_DIR
#define CHARGEGAME_DATA_DIR "data"
#endif

namespace {

const GridScenario& default_scenario() {
  static GridScenario scenario =
      load_grid_scenario(std::filesystem::path(CHARGEGAME_DATA_DIR) / "grids/default.json");
  return scenario;
}

const GridScenario& collapsed_scenario() {
  static GridScenario scenario =
      load_grid_scenario(std::filesystem::path(CHARGEGAME_DATA_DIR) / "grids/collapsed.json");
  return scenario;
}

// The scale-factor fit is the slow piece; share one result per player count.
std::shared_ptr<const ReductionResult> default_reduction(int n_players) {
  static std::map<int, std::shared_ptr<const ReductionResult>> cache;
  auto it = cache.find(n_players);
  if (it == cache.end()) {
    const GridScenario& s = default_scenario();
    it = cache.emplace(n_players, reduce_grid(s.net, s.pricing,
                                              n_players * s.pricing.rho_kwh)).first;
  }
  return it->second;
}

std::vector<double> loads_at(const GridNetwork& net,
                             const std::map<std::string, double>& by_id) {
  std::vector<double> loads(net.n_buses(), 0.0);
  for (const auto& [id, kw] : by_id) loads[net.bus_index(id)] = kw;
  return loads;
}

}  // namespace

TEST_CASE("GridNetwork validation") {
  std::vector<Bus> buses{{"s", BusKind::slack, 0.0}, {"t", BusKind::transformer, 0.0}};
  CHECK_THROWS_AS(GridNetwork(buses, {{"s", "t", {0.0, 0.0}}}, {1.0, 0.0}, {}, 100.0),
                  std::invalid_argument);  // zero admittance
  CHECK_THROWS_AS(GridNetwork(buses, {{"s", "x", {1.0, 0.0}}}, {1.0, 0.0}, {}, 100.0),
                  std::invalid_argument);  // unknown endpoint
  CHECK_THROWS_AS(GridNetwork(buses, {}, {1.0, 0.0}, {}, 100.0),
                  std::invalid_argument);  // disconnected

  std::vector<Bus> no_slack{{"a", BusKind::load, 0.0}, {"t", BusKind::transformer, 0.0}};
  CHECK_THROWS_AS(GridNetwork(no_slack, {{"a", "t", {1.0, 0.0}}}, {1.0, 0.0}, {}, 100.0),
                  std::invalid_argument);

  std::vector<Bus> island{{"s", BusKind::slack, 0.0},
                          {"t", BusKind::transformer, 0.0},
                          {"x", BusKind::load, 0.0}};
  CHECK_THROWS_AS(GridNetwork(island, {{"s", "t", {1.0, 0.0}}}, {1.0, 0.0}, {}, 100.0),
                  std::invalid_argument);
}

TEST_CASE("power flow: no-load network is the flat solution") {
  GridNetwork net = testutil::two_feeder_net();
  PowerFlowSolution sol = solve_power_flow(net, std::vector<double>(net.n_buses(), 0.0));
  CHECK(sol.iterations == 1);
  CHECK(sol.residual <= 1e-12);
  for (const auto& v : sol.voltages) CHECK(std::abs(v - net.slack_voltage()) == 0.0);
  CHECK(std::abs(sol.head_apparent_power) <= 1e-9);
}

TEST_CASE("power flow: two-bus closed form") {
  std::complex<double> z(0.01, 0.01);
  GridNetwork net = testutil::two_bus_net(z, 100.0);
  double load_pu = 0.1;
  double load_kw = load_pu * 100.0 * 1000.0;

  testutil::TwoBusSolution oracle = testutil::two_bus_closed_form(1.0, z, load_pu);
  PowerFlowSolution sol = solve_power_flow(net, loads_at(net, {{"t", load_kw}}));

  CHECK(sol.residual <= 1e-8);
  CHECK(std::abs(sol.voltages[1] - oracle.u1) / std::abs(oracle.u1) <= 1e-9);
  CHECK(std::abs(sol.head_apparent_power - oracle.s0) / std::abs(oracle.s0) <= 1e-9);

  // operator cost from the oracle head power
  PricingConfig pricing;
  double s0_mva = std::abs(oracle.s0) * 100.0;
  CHECK(eno_cost(net, loads_at(net, {{"t", load_kw}}), pricing) ==
        doctest::Approx(pricing.eta * s0_mva * s0_mva).epsilon(1e-9));
}

TEST_CASE("power flow: stronger lines move head power toward the pure load") {
  std::complex<double> z(0.01, 0.01);
  double load_kw = 0.1 * 100.0 * 1000.0;
  GridNetwork weak = testutil::two_bus_net(z, 100.0);
  GridNetwork strong = testutil::two_bus_net(z / 2.0, 100.0);  // doubled admittance

  double s_weak = std::abs(
      solve_power_flow(weak, loads_at(weak, {{"t", load_kw}})).head_apparent_power);
  double s_strong = std::abs(
      solve_power_flow(strong, loads_at(strong, {{"t", load_kw}})).head_apparent_power);
  CHECK(s_strong < s_weak);
  CHECK(s_strong >= 0.1);  // losses keep it above the consumed power
}

TEST_CASE("power flow: residuals stay within tolerance on random loadings") {
  const GridScenario& s = default_scenario();
  std::mt19937_64 gen(71);
  std::uniform_real_distribution<double> wiggle(0.5, 1.5);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> loads = s.net.base_loads_kw();
    for (double& l : loads) l *= wiggle(gen);
    loads[s.net.slack_index()] = 0.0;
    PowerFlowSolution sol = solve_power_flow(s.net, loads);
    CHECK(sol.residual <= 1e-8);
  }
}

TEST_CASE("power flow: infeasible loading fails loudly") {
  GridNetwork net = testutil::two_bus_net({0.5, 0.5}, 100.0);
  CHECK_THROWS_AS(solve_power_flow(net, loads_at(net, {{"t", 2.0 * 100.0 * 1000.0}})),
                  std::runtime_error);
}

TEST_CASE("eno_cost: zero at no load, increasing in every station load") {
  const GridScenario& s = default_scenario();
  CHECK(eno_cost(s.net, std::vector<double>(s.net.n_buses(), 0.0), s.pricing) <= 1e-12);

  std::vector<double> base = s.net.base_loads_kw();
  double h0 = eno_cost(s.net, base, s.pricing);
  for (int station : s.net.evcs_indices()) {
    double prev = h0;
    for (int k = 1; k <= 21; ++k) {
      std::vector<double> loads = base;
      loads[station] += 4500.0 * k / 21.0;
      double h = eno_cost(s.net, loads, s.pricing);
      CHECK(h > prev);
      prev = h;
    }
  }
}

TEST_CASE("marginal_price: symmetric feeders price identically") {
  GridNetwork net = testutil::two_feeder_net();
  PricingConfig pricing;
  std::vector<double> loads = loads_at(net, {{"u", 1000.0}, {"v", 1000.0}});
  double pu = marginal_price(net, loads, net.bus_index("u"), pricing);
  double pv = marginal_price(net, loads, net.bus_index("v"), pricing);
  CHECK(std::abs(pu - pv) <= 1e-9);
  CHECK_THROWS_AS(marginal_price(net, loads, net.bus_index("head"), pricing),
                  std::invalid_argument);
}

TEST_CASE("marginal_price: the near station is cheaper at equal loading") {
  const GridScenario& s = default_scenario();
  std::vector<double> equal =
      loads_at(s.net, {{"a", 4.0e6}, {"b", 4.0e6}, {"c", 4.0e6}});
  double pa = marginal_price(s.net, equal, s.net.bus_index("a"), s.pricing);
  double pb = marginal_price(s.net, equal, s.net.bus_index("b"), s.pricing);
  double pc = marginal_price(s.net, equal, s.net.bus_index("c"), s.pricing);
  CHECK(pb < pa);
  CHECK(pb < pc);
}

TEST_CASE("marginal_price: halving the step barely moves the estimate") {
  const GridScenario& s = default_scenario();
  std::vector<double> base = s.net.base_loads_kw();
  PricingConfig coarse = s.pricing;  // h = 0.1 kW
  PricingConfig fine = s.pricing;
  fine.fd_step_kw = 0.05;
  int bus = s.net.bus_index("a");
  double p1 = marginal_price(s.net, base, bus, coarse);
  double p2 = marginal_price(s.net, base, bus, fine);
  CHECK(std::abs(p1 - p2) / std::abs(p1) <= 1e-6);
}

TEST_CASE("reduce_grid: collapsed network reduces to unit scale factors") {
  const GridScenario& s = collapsed_scenario();
  auto reduction = reduce_grid(s.net, s.pricing, 4500.0);
  for (double a : reduction->alpha_tilde()) CHECK(std::abs(a - 1.0) <= 1e-6);
  CHECK(reduction->objective_value() <= 1e-9);
}

TEST_CASE("reduce_grid: default network ordering and magnitudes") {
  auto reduction = default_reduction(1500);
  const auto& alpha = reduction->alpha_tilde();  // order: a, b, c
  REQUIRE(alpha.size() == 3);
  CHECK(alpha[1] < alpha[0]);
  CHECK(alpha[0] < alpha[2]);
  for (double a : alpha) {
    CHECK(a > 1.0);
    CHECK(a < 1.3);
  }
  // the fit cannot be worse than the all-ones start
  const GridScenario& s = default_scenario();
  CHECK(reduction->objective_value() <= 1e-3);
  CHECK(reduction->l_max_kw() == 4500.0);
}

TEST_CASE("charging_cost basics") {
  const GridScenario& s = default_scenario();
  auto reduction = default_reduction(10);
  std::vector<double> station_base(3);
  for (int k = 0; k < 3; ++k)
    station_base[k] = s.net.buses()[s.net.evcs_indices()[k]].base_load_kw;

  // empty occupancy: rho * alpha_r * marginal(weighted base)
  double base_marginal = reduction->marginal(reduction->weighted_base_load_kw());
  for (int r = 0; r < 3; ++r)
    CHECK(charging_cost(*reduction, s.pricing, {0, 0, 0}, station_base, r) ==
          doctest::Approx(s.pricing.rho_kwh * reduction->alpha_tilde()[r] * base_marginal)
              .epsilon(1e-12));

  // monotone in every count
  for (int r = 0; r < 3; ++r) {
    double prev = charging_cost(*reduction, s.pricing, {0, 0, 0}, station_base, r);
    for (int n = 1; n <= 10; ++n) {
      std::vector<int> counts(3, 0);
      counts[r] = n;
      double c = charging_cost(*reduction, s.pricing, counts, station_base, r);
      CHECK(c > prev);
      prev = c;
    }
  }
  CHECK_THROWS_AS(charging_cost(*reduction, s.pricing, {1, 2}, station_base, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(charging_cost(*reduction, s.pricing, {-1, 0, 0}, station_base, 0),
                  std::invalid_argument);
}

TEST_CASE("charging_cost matches the induced game exactly under a live price function") {
  const GridScenario& s = default_scenario();
  auto reduction = default_reduction(10);
  std::vector<double> station_base(3);
  double weighted_base = 0.0;
  std::vector<double> coeffs(3);
  for (int k = 0; k < 3; ++k) {
    station_base[k] = s.net.buses()[s.net.evcs_indices()[k]].base_load_kw;
    weighted_base += reduction->alpha_tilde()[k] * station_base[k];
    coeffs[k] = s.pricing.rho_kwh * reduction->alpha_tilde()[k];
  }
  LambdaFn live = LambdaFn::grid_marginal(reduction);
  live.check_monotone(0.0, weighted_base + 10 * s.pricing.rho_kwh * 1.2, 1000);
  GameSpec game = GameSpec::symmetric(10, coeffs, live, weighted_base);

  std::mt19937_64 gen(5150);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> actions(10);
    std::vector<int> counts(3, 0);
    for (int& a : actions) {
      a = pick(gen);
      ++counts[a];
    }
    ActionProfile profile(actions);
    for (int i = 0; i < 10; ++i) {
      double via_game = cost(game, i, profile);
      double via_grid =
          charging_cost(*reduction, s.pricing, counts, station_base, actions[i]);
      // identical up to the solver's own reproducibility floor
      CHECK(via_game == doctest::Approx(via_grid).epsilon(5e-8));
    }
  }
}

TEST_CASE("build_congestion_game: tabulated game tracks the grid within 1e-6") {
  const GridScenario& s = default_scenario();
  auto reduction = default_reduction(10);
  GameSpec game = build_congestion_game(s.net, s.pricing, *reduction, 10);
  CHECK(game.n_players() == 10);
  CHECK(game.n_resources() == 3);
  CHECK(game.has_symmetric_alpha());

  std::vector<double> station_base(3);
  for (int k = 0; k < 3; ++k)
    station_base[k] = s.net.buses()[s.net.evcs_indices()[k]].base_load_kw;

  std::mt19937_64 gen(6001);
  std::uniform_int_distribution<int> pick(0, 2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<int> actions(10);
    std::vector<int> counts(3, 0);
    for (int& a : actions) {
      a = pick(gen);
      ++counts[a];
    }
    ActionProfile profile(actions);
    for (int r = 0; r < 3; ++r) {
      if (counts[r] == 0) continue;
      int player = 0;
      while (actions[player] != r) ++player;
      double via_game = cost(game, player, profile);
      double via_grid = charging_cost(*reduction, s.pricing, counts, station_base, r);
      worst = std::max(worst, std::abs(via_game - via_grid) / std::abs(via_grid));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("build_congestion_game: bound, equilibria and price band") {
  const GridScenario& s = default_scenario();
  auto reduction = default_reduction(1500);
  GameSpec game = build_congestion_game(s.net, s.pricing, *reduction, 1500);

  double bound = compute_cmax(game);
  CHECK(bound > 0.0);
  for (double y : game.lambda().table_y())
    CHECK(s.pricing.rho_kwh * reduction->alpha_tilde()[2] * y <= bound * (1 + 1e-12));

  // equilibria sit on the cheapest station; cross-check by brute force at n=3
  const auto& alpha = reduction->alpha_tilde();
  int argmin = 0;
  for (int r = 1; r < 3; ++r)
    if (alpha[r] < alpha[argmin]) argmin = r;
  CHECK(characterize_ne(game) == std::vector<int>{argmin});
  GameSpec small = build_congestion_game(s.net, s.pricing, *reduction, 3);
  for (const ActionProfile& p : enumerate_ne_bruteforce(small))
    for (int a : p.actions) CHECK(a == argmin);

  // per-session unit prices across the whole occupancy range
  double base = reduction->weighted_base_load_kw();
  double top = base + 1500 * s.pricing.rho_kwh *
                          *std::max_element(alpha.begin(), alpha.end());
  for (int k = 0; k <= 20; ++k) {
    double x = base + (top - base) * k / 20.0;
    double lam = game.lambda_at(x);
    for (int r = 0; r < 3; ++r) {
      double price = alpha[r] * lam;
      CHECK(price >= 0.10);
      CHECK(price <= 0.20);
    }
  }

  // spot check: the tabulated game still tracks the live grid at full scale
  std::vector<double> station_base(3);
  for (int k = 0; k < 3; ++k)
    station_base[k] = s.net.buses()[s.net.evcs_indices()[k]].base_load_kw;
  for (std::vector<int> counts : {std::vector<int>{500, 500, 500},
                                  std::vector<int>{1500, 0, 0},
                                  std::vector<int>{100, 1300, 100}}) {
    std::vector<int> actions;
    for (int r = 0; r < 3; ++r) actions.insert(actions.end(), counts[r], r);
    ActionProfile profile(std::move(actions));
    for (int r = 0; r < 3; ++r) {
      if (counts[r] == 0) continue;
      int player = 0;
      while (profile.actions[player] != r) ++player;
      double via_game = cost(game, player, profile);
      double via_grid = charging_cost(*reduction, s.pricing, counts, station_base, r);
      CHECK(via_game == doctest::Approx(via_grid).epsilon(1e-4));
    }
  }
}
