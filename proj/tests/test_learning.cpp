#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "chargegame/learning.hpp"
#include "testutil.hpp"

using namespace chargegame;

namespace {

LearnerConfig config_with(double delta, double c_max, uint64_t seed = 0) {
  LearnerConfig cfg;
  cfg.delta = delta;
  cfg.c_max = c_max;
  cfg.seed = seed;
  return cfg;
}

// Exhaustive max cost over every (player, profile) pair; the oracle for the
// closed-form bound.
double cmax_bruteforce(const GameSpec& g) {
  double best = 0.0;
  std::vector<int> odo(g.n_players(), 0);
  for (;;) {
    ActionProfile p(odo);
    for (int i = 0; i < g.n_players(); ++i) best = std::max(best, cost(g, i, p));
    int k = 0;
    for (; k < g.n_players(); ++k) {
      if (++odo[k] < g.n_resources()) break;
      odo[k] = 0;
    }
    if (k == g.n_players()) break;
  }
  return best;
}

bool trajectories_identical(const Trajectory& a, const Trajectory& b) {
  if (a.iterations_run != b.iterations_run || a.converged_at != b.converged_at) return false;
  if (!(a.final_profile == b.final_profile)) return false;
  if (a.mean_history != b.mean_history) return false;
  if (a.snapshots.size() != b.snapshots.size() || a.realized.size() != b.realized.size())
    return false;
  for (size_t k = 0; k < a.snapshots.size(); ++k)
    if (a.snapshots[k].iteration != b.snapshots[k].iteration ||
        !(a.snapshots[k].probs == b.snapshots[k].probs))
      return false;
  for (size_t k = 0; k < a.realized.size(); ++k)
    if (a.realized[k].iteration != b.realized[k].iteration ||
        a.realized[k].actions != b.realized[k].actions || a.realized[k].costs != b.realized[k].costs)
      return false;
  return true;
}

}  // namespace

TEST_CASE("compute_cmax") {
  GameSpec g = GameSpec::symmetric(2, {1.0, 2.0}, LambdaFn::affine(0, 1));
  CHECK(compute_cmax(g) == 8.0);
  CHECK(compute_cmax(g) == cmax_bruteforce(g));

  GameSpec flat = GameSpec::symmetric(3, {1.5, 1.5}, LambdaFn::affine(0, 1), 2.0);
  CHECK(compute_cmax(flat) == doctest::Approx(1.5 * (2.0 + 3 * 1.5)));

  GameSpec hetero(Matrix::from_rows({{1.0, 5.0}, {2.0, 3.0}}), LambdaFn::affine(0, 1));
  CHECK(compute_cmax(hetero) == 40.0);
  CHECK(compute_cmax(hetero) == cmax_bruteforce(hetero));

  std::mt19937_64 gen(11);
  for (int t = 0; t < 30; ++t) {
    GameSpec rg = testutil::random_symmetric_game(gen);
    CHECK(compute_cmax(rg) == doctest::Approx(cmax_bruteforce(rg)).epsilon(1e-12));
  }
}

TEST_CASE("LearnerConfig validation") {
  CHECK_THROWS_AS(config_with(0.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config_with(1.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config_with(0.5, 0.0).validate(), std::invalid_argument);
  LearnerConfig bad = config_with(0.5, 1.0);
  bad.convergence_threshold = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  GameSpec g = GameSpec::symmetric(2, {1.0, 2.0}, LambdaFn::affine(0, 1));
  LearnerConfig sized = LearnerConfig::for_game(g, 0.5, UpdateMode::synchronous, 100, 1);
  CHECK(sized.c_max == compute_cmax(g));
}

TEST_CASE("update_strategy hand values") {
  LearnerConfig cfg = config_with(0.5, 1.0);

  auto out = update_strategy(std::vector<double>{0.5, 0.5}, 0, 0.5, cfg);
  CHECK(out[0] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(0.375).epsilon(1e-15));

  auto zero_cost = update_strategy(std::vector<double>{0.5, 0.5}, 1, 0.0, cfg);
  CHECK(zero_cost[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(zero_cost[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("update_strategy inaction and errors") {
  LearnerConfig cfg = config_with(0.7, 2.5);
  std::vector<double> row{0.2, 0.3, 0.5};
  auto unchanged = update_strategy(row, 1, 2.5, cfg);  // cost == c_max
  CHECK(unchanged == row);

  CHECK_THROWS_AS(update_strategy(row, 1, -0.1, cfg), std::invalid_argument);
  CHECK_THROWS_AS(update_strategy(row, 1, 2.6, cfg), std::runtime_error);
  CHECK_THROWS_AS(update_strategy(row, 5, 1.0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(update_strategy(std::vector<double>{0.9, 0.3}, 0, 1.0, cfg),
                  std::invalid_argument);
}

TEST_CASE("update_strategy preserves the simplex over many steps") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LearnerConfig cfg = config_with(0.3, 1.0);
  std::vector<double> row{0.25, 0.25, 0.25, 0.25};
  for (int step = 0; step < 10000; ++step) {
    int action = static_cast<int>(unif(gen) * 4) % 4;
    row = update_strategy(row, action, unif(gen), cfg);
    for (double p : row) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0 + 1e-12);
    }
  }
  double sum = 0.0;
  for (double p : row) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("run: single resource converges immediately") {
  GameSpec g = GameSpec::symmetric(4, {1.0}, LambdaFn::affine(0, 1));
  LearnerConfig cfg = LearnerConfig::for_game(g, 0.5, UpdateMode::synchronous, 100, 3);
  Trajectory t = run(g, cfg, MixedProfile::uniform(4, 1));
  REQUIRE(t.converged_at.has_value());
  CHECK(*t.converged_at == 0);
  CHECK(t.final_profile == ActionProfile({0, 0, 0, 0}));
}

TEST_CASE("run: lone player learns the cheap resource") {
  GameSpec g = GameSpec::symmetric(1, {1.0, 2.0}, LambdaFn::affine(0, 1));
  LearnerConfig cfg = LearnerConfig::for_game(g, 0.5, UpdateMode::synchronous, 20000, 5);
  Trajectory t = run(g, cfg, MixedProfile::uniform(1, 2));
  REQUIRE(t.converged_at.has_value());
  CHECK(t.final_profile == ActionProfile({0}));
  CHECK(t.snapshots.back().probs(0, 0) >= cfg.convergence_threshold);
}

TEST_CASE("run: deterministic and schedule-independent") {
  GameSpec g = GameSpec::symmetric(6, {1.0, 1.4, 2.0}, LambdaFn::affine(0.5, 1.0));
  LearnerConfig cfg = LearnerConfig::for_game(g, 0.2, UpdateMode::synchronous, 3000, 77);
  cfg.snapshot_stride = 7;
  MixedProfile init = MixedProfile::uniform(6, 3);

  Trajectory first = run(g, cfg, init, 1);
  Trajectory second = run(g, cfg, init, 1);
  CHECK(trajectories_identical(first, second));

  Trajectory threaded = run(g, cfg, init, 3);
  CHECK(trajectories_identical(first, threaded));

  LearnerConfig other = cfg;
  other.seed = 78;
  CHECK_FALSE(trajectories_identical(first, run(g, other, init, 1)));
}

TEST_CASE("run: heterogeneous players learn their own cheap resources") {
  GameSpec g(Matrix::from_rows({{1.0, 5.0}, {2.0, 3.0}}), LambdaFn::affine(0, 1));
  REQUIRE(is_nash(g, ActionProfile({0, 0}), 0.0));
  for (uint64_t seed = 0; seed < 5; ++seed) {
    LearnerConfig cfg = LearnerConfig::for_game(g, 0.02, UpdateMode::synchronous, 50000, seed);
    Trajectory t = run(g, cfg, MixedProfile::uniform(2, 2));
    REQUIRE(t.converged_at.has_value());
    CHECK(t.final_profile == ActionProfile({0, 0}));
  }
}

TEST_CASE("run: asynchronous mode updates one player per iteration") {
  GameSpec g = GameSpec::symmetric(3, {1.0, 2.0}, LambdaFn::affine(0, 1));
  LearnerConfig cfg = LearnerConfig::for_game(g, 0.4, UpdateMode::asynchronous, 200000, 9);
  cfg.snapshot_stride = 1;
  Trajectory t = run(g, cfg, MixedProfile::uniform(3, 2));
  REQUIRE(t.converged_at.has_value());
  CHECK(t.final_profile == ActionProfile({0, 0, 0}));

  // between consecutive snapshots at stride 1, at most one row changed
  for (size_t k = 1; k < std::min<size_t>(t.snapshots.size(), 200); ++k) {
    const Matrix& prev = t.snapshots[k - 1].probs;
    const Matrix& next = t.snapshots[k].probs;
    if (t.snapshots[k].iteration != t.snapshots[k - 1].iteration + 1) continue;
    int changed = 0;
    for (int i = 0; i < 3; ++i)
      if (!std::equal(prev.row(i).begin(), prev.row(i).end(), next.row(i).begin())) ++changed;
    CHECK(changed <= 1);
  }
}

TEST_CASE("run: trajectory bookkeeping invariants") {
  GameSpec g = GameSpec::symmetric(5, {1.0, 1.5}, LambdaFn::affine(0.2, 1.0));
  LearnerConfig cfg = LearnerConfig::for_game(g, 0.15, UpdateMode::synchronous, 800, 21);
  cfg.snapshot_stride = 13;
  Trajectory t = run(g, cfg, MixedProfile::uniform(5, 2));

  CHECK(t.mean_rows() == t.iterations_run + 1);
  for (size_t k = 1; k < t.snapshots.size(); ++k)
    CHECK(t.snapshots[k].iteration > t.snapshots[k - 1].iteration);
  for (const TrajectorySnapshot& snap : t.snapshots)
    CHECK_NOTHROW(MixedProfile(snap.probs));
  for (const RealizedStep& step : t.realized) {
    CHECK(step.actions.size() == 5);
    for (size_t i = 0; i < step.costs.size(); ++i)
      CHECK(step.costs[i] <= cfg.c_max * (1 + 1e-12));
  }
  for (long k = 0; k < t.mean_rows(); ++k) {
    double sum = 0.0;
    for (double v : t.mean_row(k)) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("run rejects a c_max below the game's bound") {
  GameSpec g = GameSpec::symmetric(2, {1.0, 2.0}, LambdaFn::affine(0, 1));
  LearnerConfig cfg = config_with(0.5, 7.0, 1);  // bound is 8
  CHECK_THROWS_AS(run(g, cfg, MixedProfile::uniform(2, 2)), std::invalid_argument);

  LearnerConfig ok = config_with(0.5, 8.0, 1);
  CHECK_THROWS_AS(run(g, ok, MixedProfile::uniform(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(run(g, ok, MixedProfile::uniform(2, 3)), std::invalid_argument);
}

TEST_CASE("drift_closed_form rest points and tangency") {
  GameSpec g = GameSpec::symmetric(3, {1.0, 2.0}, LambdaFn::affine(0, 1));
  double c_max = compute_cmax(g);

  Matrix pure = MixedProfile::degenerate({0, 1, 0}, 2).probs();
  DriftVector at_rest = drift_closed_form(g, pure, c_max);
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 2; ++a) CHECK(at_rest.entries(i, a) == 0.0);

  GameSpec flat = GameSpec::symmetric(3, {1.5, 1.5}, LambdaFn::affine(0, 1));
  DriftVector symmetric_drift =
      drift_closed_form(flat, MixedProfile::uniform(3, 2).probs(), compute_cmax(flat));
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 2; ++a)
      CHECK(std::abs(symmetric_drift.entries(i, a)) <= 1e-15);

  std::mt19937_64 gen(13);
  for (int t = 0; t < 30; ++t) {
    GameSpec rg = testutil::random_symmetric_game(gen, 4, 3, 2);
    Matrix probs = testutil::random_interior(gen, rg.n_players(), rg.n_resources());
    DriftVector f = drift_closed_form(rg, probs, compute_cmax(rg));
    for (int i = 0; i < rg.n_players(); ++i) {
      double sum = 0.0;
      for (int a = 0; a < rg.n_resources(); ++a) sum += f.entries(i, a);
      CHECK(std::abs(sum) <= 1e-9);
    }
  }
}

TEST_CASE("drift_monte_carlo agrees with the closed form") {
  GameSpec g = GameSpec::symmetric(2, {1.0, 2.0}, LambdaFn::affine(0, 1));
  double c_max = compute_cmax(g);
  Matrix uniform = MixedProfile::uniform(2, 2).probs();

  LearnerConfig cfg = config_with(0.5, c_max, 4242);
  DriftEstimate mc = drift_monte_carlo(g, uniform, cfg, 100000);
  DriftVector closed = drift_closed_form(g, uniform, c_max);
  for (int i = 0; i < 2; ++i) {
    double row_sum = 0.0;
    for (int a = 0; a < 2; ++a) {
      CHECK(std::abs(closed.entries(i, a) - mc.mean.entries(i, a)) <=
            3.0 * mc.std_error(i, a) + 1e-12);
      row_sum += mc.mean.entries(i, a);
    }
    CHECK(std::abs(row_sum) <= 3.0 * (mc.std_error(i, 0) + mc.std_error(i, 1)) + 1e-12);
  }

  Matrix pure = MixedProfile::degenerate({0, 1}, 2).probs();
  DriftEstimate rest = drift_monte_carlo(g, pure, cfg, 200);
  for (int i = 0; i < 2; ++i)
    for (int a = 0; a < 2; ++a) {
      CHECK(rest.mean.entries(i, a) == 0.0);
      CHECK(rest.std_error(i, a) == 0.0);
    }
}

TEST_CASE("lyapunov descent") {
  GameSpec flat = GameSpec::symmetric(2, {1.5, 1.5}, LambdaFn::affine(0, 1));
  DescentReport symmetric_report = lyapunov_descent_check(flat, 50, 31);
  CHECK(symmetric_report.violations == 0);
  CHECK(std::abs(symmetric_report.max_value) <= 1e-10);

  GameSpec g = GameSpec::symmetric(2, {1.0, 2.0}, LambdaFn::affine(0, 1));
  DescentReport report = lyapunov_descent_check(g, 100, 32);
  CHECK(report.violations == 0);
  CHECK(report.max_value <= 1e-10);
  CHECK(report.max_rel_mismatch <= 1e-5);

  GameSpec with_zero = GameSpec::symmetric(2, {0.0, 1.0}, LambdaFn::affine(0, 1));
  CHECK_THROWS_AS(lyapunov_descent_check(with_zero, 5, 1), std::invalid_argument);
}

TEST_CASE("learned play concentrates on the cheapest resource") {
  // Wrong-corner absorption vanishes as the step shrinks; with a small step
  // and a clear margin on the minimal coefficient, nearly every run should
  // land on it.
  std::mt19937_64 gen(20260811);
  std::uniform_int_distribution<int> pick_n(2, 20), pick_m(2, 4);
  std::uniform_real_distribution<double> coeff(0.5, 3.0);
  int wins = 0, total = 0;
  for (int instance = 0; instance < 3; ++instance) {
    int n = pick_n(gen), m = pick_m(gen);
    std::vector<double> alpha(m);
    for (double& a : alpha) a = coeff(gen);
    int argmin = 0;
    for (int a = 1; a < m; ++a)
      if (alpha[a] < alpha[argmin]) argmin = a;
    alpha[argmin] = 0.8 * *std::min_element(alpha.begin(), alpha.end());
    GameSpec g = GameSpec::symmetric(n, alpha, LambdaFn::affine(0.5, 1.0));
    LearnerConfig cfg = LearnerConfig::for_game(g, 0.01, UpdateMode::synchronous, 100000, 0);
    cfg.snapshot_stride = 1000000;
    for (uint64_t seed = 0; seed < 10; ++seed) {
      cfg.seed = seed;
      Trajectory t = run(g, cfg, MixedProfile::uniform(n, m));
      ++total;
      bool on_min = t.converged_at.has_value();
      for (int a : t.final_profile.actions) on_min = on_min && (a == argmin);
      if (on_min) ++wins;
    }
  }
  CHECK(wins * 10 >= total * 9);
}
