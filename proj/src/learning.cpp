#include "chargegame/learning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include "chargegame/rng.hpp"

namespace chargegame {
namespace {

int sample_index(std::span<const double> row, double u) {
  double acc = 0.0;
  int m = static_cast<int>(row.size());
  for (int a = 0; a < m; ++a) {
    acc += row[a];
    if (u < acc) return a;
  }
  return m - 1;
}

// Reward-inaction step applied in place. The new row is the convex
// combination (1 - beta) * row + beta * e_action with
// beta = delta * (1 - cost / c_max), so the simplex is preserved exactly up
// to float drift, which is corrected only past 1e-12.
void update_row_inplace(std::span<double> row, int action, double cost, double delta,
                        double c_max) {
  if (!(cost >= 0.0))
    throw std::invalid_argument("update_strategy: negative cost");
  if (cost > c_max * (1.0 + 1e-9))
    throw std::runtime_error("update_strategy: observed cost " + std::to_string(cost) +
                             " exceeds c_max " + std::to_string(c_max) +
                             " (c_max is mis-sized for this game)");
  double beta = delta * (1.0 - cost / c_max);
  beta = std::clamp(beta, 0.0, 1.0);
  double keep = 1.0 - beta;
  double sum = 0.0;
  for (double& p : row) {
    p *= keep;
    sum += p;
  }
  row[action] += beta;
  sum += beta;
  if (std::abs(sum - 1.0) > 1e-12) {
    for (double& p : row) p /= sum;
  }
}

// Runs fn over [0, n) split into contiguous chunks, one per worker. Chunk
// boundaries never affect results: workers write disjoint slices and read
// only shared immutable state. The first worker exception is rethrown after
// all workers join.
void parallel_over(int n, int threads, const std::function<void(int, int)>& fn) {
  threads = std::clamp(threads, 1, 64);
  if (threads == 1 || n < 2 * threads) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int lo = t * chunk;
    int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi, t]() {
      try {
        fn(lo, hi);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

Matrix interior_point(std::mt19937_64& gen, int n, int m) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix probs(n, m);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int a = 0; a < m; ++a) {
      double e = -std::log1p(-unif(gen));  // Exp(1) draws give a flat Dirichlet
      probs(i, a) = e;
      sum += e;
    }
    for (int a = 0; a < m; ++a) probs(i, a) /= sum;
  }
  return probs;
}

Matrix expected_cost_table(const GameSpec& game, const Matrix& probs) {
  Matrix cbar(game.n_players(), game.n_resources());
  for (int i = 0; i < game.n_players(); ++i)
    for (int a = 0; a < game.n_resources(); ++a)
      cbar(i, a) = expected_cost(game, probs, i, a);
  return cbar;
}

}  // namespace

void LearnerConfig::validate() const {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw std::invalid_argument("LearnerConfig: delta must lie in (0, 1)");
  if (!(c_max > 0.0) || !std::isfinite(c_max))
    throw std::invalid_argument("LearnerConfig: c_max must be positive");
  if (max_iterations < 1)
    throw std::invalid_argument("LearnerConfig: max_iterations must be >= 1");
  if (!(convergence_threshold > 0.0) || !(convergence_threshold < 1.0))
    throw std::invalid_argument("LearnerConfig: convergence_threshold must lie in (0, 1)");
  if (snapshot_stride < 1)
    throw std::invalid_argument("LearnerConfig: snapshot_stride must be >= 1");
}

LearnerConfig LearnerConfig::for_game(const GameSpec& game, double delta, UpdateMode mode,
                                      long max_iterations, uint64_t seed) {
  LearnerConfig cfg;
  cfg.delta = delta;
  cfg.c_max = compute_cmax(game);
  cfg.mode = mode;
  cfg.max_iterations = max_iterations;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

double compute_cmax(const GameSpec& game) {
  // lambda is non-decreasing, so the load is largest when every player takes
  // her biggest coefficient; the most expensive player pays rowmax * lambda.
  double load = game.base_load();
  double best = 0.0;
  for (int i = 0; i < game.n_players(); ++i) {
    double rowmax = 0.0;
    for (int a = 0; a < game.n_resources(); ++a) rowmax = std::max(rowmax, game.alpha(i, a));
    load += rowmax;
    best = std::max(best, rowmax);
  }
  return best * game.lambda_at(load);
}

std::vector<double> update_strategy(std::span<const double> row, int action, double cost,
                                    const LearnerConfig& config) {
  config.validate();
  if (row.empty()) throw std::invalid_argument("update_strategy: empty row");
  if (action < 0 || action >= static_cast<int>(row.size()))
    throw std::invalid_argument("update_strategy: action out of range");
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= -1e-12) || !(p <= 1.0 + 1e-12))
      throw std::invalid_argument("update_strategy: row entry outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("update_strategy: row is not on the simplex");
  std::vector<double> out(row.begin(), row.end());
  update_row_inplace(out, action, cost, config.delta, config.c_max);
  return out;
}

Trajectory run(const GameSpec& game, const LearnerConfig& config, const MixedProfile& initial,
               int threads) {
  config.validate();
  if (initial.n_players() != game.n_players() || initial.n_resources() != game.n_resources())
    throw std::invalid_argument("run: initial profile shape does not match game");
  double game_cmax = compute_cmax(game);
  if (config.c_max < game_cmax * (1.0 - 1e-12))
    throw std::invalid_argument("run: config.c_max " + std::to_string(config.c_max) +
                                " is below the game's cost bound " + std::to_string(game_cmax));

  const int n = game.n_players();
  const int m = game.n_resources();
  const uint64_t seed = config.seed;

  Matrix probs = initial.probs();
  std::vector<int> actions(n, 0);
  std::vector<double> costs(n, 0.0);

  Trajectory traj;
  traj.n_resources = m;
  traj.mean_history.reserve(static_cast<size_t>(std::min<long>(config.max_iterations + 1, 1 << 20)) * m);

  auto converged = [&]() {
    for (int i = 0; i < n; ++i) {
      double rowmax = 0.0;
      for (int a = 0; a < m; ++a) rowmax = std::max(rowmax, probs(i, a));
      if (rowmax < config.convergence_threshold) return false;
    }
    return true;
  };
  auto record_mean = [&]() {
    for (int a = 0; a < m; ++a) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += probs(i, a);
      traj.mean_history.push_back(s / n);
    }
  };
  auto record_snapshot = [&](long it) { traj.snapshots.push_back({it, probs}); };

  long it = 0;
  for (;;) {
    record_mean();
    if (converged()) {
      traj.converged_at = it;
      record_snapshot(it);
      break;
    }
    if (it >= config.max_iterations) {
      record_snapshot(it);
      break;
    }

    // Phase 1: every player samples an action from her current row. Each
    // player has her own substream, so chunking does not matter.
    parallel_over(n, threads, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i)
        actions[i] = sample_index(probs.row(i),
                                  rng::uniform(seed, static_cast<uint64_t>(i),
                                               static_cast<uint64_t>(it)));
    });

    // Aggregate load summed in a fixed order regardless of thread count.
    double load = game.base_load();
    for (int i = 0; i < n; ++i) load += game.alpha(i, actions[i]);
    double lam = game.lambda_at(load);
    parallel_over(n, threads, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) costs[i] = game.alpha(i, actions[i]) * lam;
    });

    if (it % config.snapshot_stride == 0) {
      record_snapshot(it);
      traj.realized.push_back({it, actions, costs});
    }

    // Phase 2: reward-inaction updates.
    if (config.mode == UpdateMode::synchronous) {
      parallel_over(n, threads, [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i)
          update_row_inplace(probs.row(i), actions[i], costs[i], config.delta, config.c_max);
      });
    } else {
      int chosen = static_cast<int>(
          rng::uniform(seed, static_cast<uint64_t>(n), static_cast<uint64_t>(it)) * n);
      chosen = std::min(chosen, n - 1);
      update_row_inplace(probs.row(chosen), actions[chosen], costs[chosen], config.delta,
                         config.c_max);
    }
    ++it;
  }

  traj.iterations_run = it;
  std::vector<int> modal(n, 0);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int a = 1; a < m; ++a)
      if (probs(i, a) > probs(i, best)) best = a;
    modal[i] = best;
  }
  traj.final_profile = ActionProfile(std::move(modal));
  return traj;
}

DriftVector drift_closed_form(const GameSpec& game, const Matrix& probs, double c_max) {
  if (!(c_max > 0.0)) throw std::invalid_argument("drift_closed_form: c_max must be positive");
  Matrix cbar = expected_cost_table(game, probs);
  Matrix f(game.n_players(), game.n_resources());
  for (int i = 0; i < game.n_players(); ++i) {
    for (int a = 0; a < game.n_resources(); ++a) {
      double acc = 0.0;
      for (int b = 0; b < game.n_resources(); ++b) {
        if (b == a) continue;
        acc += probs(i, b) * (cbar(i, a) - cbar(i, b));
      }
      f(i, a) = -probs(i, a) * acc / c_max;
    }
  }
  return {std::move(f)};
}

DriftEstimate drift_monte_carlo(const GameSpec& game, const Matrix& probs,
                                const LearnerConfig& config, long samples) {
  config.validate();
  if (samples < 1) throw std::invalid_argument("drift_monte_carlo: samples must be >= 1");
  if (probs.rows() != game.n_players() || probs.cols() != game.n_resources())
    throw std::invalid_argument("drift_monte_carlo: shape mismatch");

  const int n = game.n_players();
  const int m = game.n_resources();
  Matrix mean(n, m), m2(n, m);
  std::vector<int> actions(n, 0);
  for (long s = 0; s < samples; ++s) {
    double load = game.base_load();
    for (int j = 0; j < n; ++j) {
      actions[j] = sample_index(probs.row(j), rng::uniform(config.seed, static_cast<uint64_t>(j),
                                                           static_cast<uint64_t>(s)));
      load += game.alpha(j, actions[j]);
    }
    double lam = game.lambda_at(load);
    for (int i = 0; i < n; ++i) {
      double reward = 1.0 - game.alpha(i, actions[i]) * lam / config.c_max;
      for (int a = 0; a < m; ++a) {
        double g = reward * ((a == actions[i] ? 1.0 : 0.0) - probs(i, a));
        double d = g - mean(i, a);
        mean(i, a) += d / static_cast<double>(s + 1);
        m2(i, a) += d * (g - mean(i, a));
      }
    }
  }
  Matrix se(n, m);
  if (samples > 1)
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < m; ++a)
        se(i, a) = std::sqrt(m2(i, a) / static_cast<double>(samples - 1)) /
                   std::sqrt(static_cast<double>(samples));
  return {{std::move(mean)}, std::move(se)};
}

DescentReport lyapunov_descent_check(const GameSpec& game, int trials, uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("lyapunov_descent_check: trials must be >= 1");
  for (int i = 0; i < game.n_players(); ++i)
    for (int a = 0; a < game.n_resources(); ++a)
      if (!(game.alpha(i, a) > 0.0))
        throw std::invalid_argument(
            "lyapunov_descent_check: requires strictly positive coefficients");

  const int n = game.n_players();
  const int m = game.n_resources();
  const double c_max = compute_cmax(game);
  const double h = 1e-5;
  std::mt19937_64 gen(seed);

  DescentReport report;
  report.trials = trials;
  report.max_value = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    Matrix probs = interior_point(gen, n, m);
    Matrix cbar = expected_cost_table(game, probs);

    // Closed form: pairwise over resources, with the gradient constants
    // 1/alpha folded in. Non-positive because both pair factors share the
    // sign of alpha_k - alpha_l.
    double closed = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < m; ++k)
        for (int l = k + 1; l < m; ++l)
          closed -= probs(i, k) * probs(i, l) *
                    (cbar(i, k) / game.alpha(i, k) - cbar(i, l) / game.alpha(i, l)) *
                    (cbar(i, k) - cbar(i, l)) / c_max;

    // Independent route: central differences of the expected potential dotted
    // with the mean-field displacement.
    DriftVector drift = drift_closed_form(game, probs, c_max);
    double fd = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < m; ++a) {
        Matrix up = probs, down = probs;
        up(i, a) += h;
        down(i, a) -= h;
        double grad = (continuous_potential(game, up) - continuous_potential(game, down)) / (2 * h);
        fd += grad * drift.entries(i, a);
      }
    }

    double value = std::max(closed, fd);
    report.max_value = std::max(report.max_value, value);
    if (value > 1e-10) ++report.violations;
    double scale = std::max(std::abs(closed), std::abs(fd));
    if (scale > 1e-14)
      report.max_rel_mismatch = std::max(report.max_rel_mismatch, std::abs(closed - fd) / scale);
  }
  return report;
}

}  // namespace chargegame
