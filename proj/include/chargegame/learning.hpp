#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "chargegame/game.hpp"

namespace chargegame {

enum class UpdateMode { synchronous, asynchronous };

// Parameters of the reward-inaction learner. c_max must bound every cost the
// game can produce; run() checks it against compute_cmax and the updates
// reject any observed cost above it.
struct LearnerConfig {
  double delta = 0.1;              // learning step in (0, 1)
  double c_max = 1.0;              // global cost bound
  UpdateMode mode = UpdateMode::synchronous;
  long max_iterations = 100000;
  double convergence_threshold = 0.999;  // every player has a row entry >= this
  uint64_t seed = 0;
  long snapshot_stride = 1;        // record full state every k-th iteration

  void validate() const;           // parameter ranges only
  // Convenience: config sized for a game (c_max = compute_cmax).
  static LearnerConfig for_game(const GameSpec& game, double delta, UpdateMode mode,
                                long max_iterations, uint64_t seed);
};

struct TrajectorySnapshot {
  long iteration = 0;
  Matrix probs;  // N x M, rows on the simplex
};

struct RealizedStep {
  long iteration = 0;
  std::vector<int> actions;
  std::vector<double> costs;
};

// Everything a run leaves behind: strided full-state snapshots, strided
// realized actions/costs, the per-resource mean strategy at every iteration,
// and the modal action profile at termination.
struct Trajectory {
  std::vector<TrajectorySnapshot> snapshots;
  std::vector<RealizedStep> realized;
  std::vector<double> mean_history;  // row-major, one length-M row per iteration
  int n_resources = 0;
  long iterations_run = 0;
  std::optional<long> converged_at;
  ActionProfile final_profile;

  long mean_rows() const {
    return n_resources == 0 ? 0 : static_cast<long>(mean_history.size()) / n_resources;
  }
  std::span<const double> mean_row(long k) const {
    return {mean_history.data() + k * n_resources, static_cast<size_t>(n_resources)};
  }
};

// Expected one-step displacement direction of the learner, rows tangent to
// the simplex (each sums to 0).
struct DriftVector {
  Matrix entries;
};

// Exact maximum cost over all players, resources and profiles. Because lambda
// is non-decreasing, the load is maximal when every player takes her largest
// coefficient, so no enumeration is needed.
double compute_cmax(const GameSpec& game);

// One reward-inaction step on a single player's row:
//   row' = row + delta * (1 - cost / c_max) * (e_action - row).
// The result is a convex combination of row and e_action, so it stays on the
// simplex exactly; rows are renormalized only if float drift exceeds 1e-12.
std::vector<double> update_strategy(std::span<const double> row, int action,
                                    double cost, const LearnerConfig& config);

// Repeated play. Every iteration all players sample actions from their rows;
// synchronous mode updates every row, asynchronous mode updates one player
// chosen uniformly. Player i draws from substream (seed, i, n) and the
// asynchronous selection from substream (seed, N, n), so results are
// bit-identical for any thread count. Stops when every player concentrates
// past config.convergence_threshold or at max_iterations.
Trajectory run(const GameSpec& game, const LearnerConfig& config,
               const MixedProfile& initial, int threads = 1);

// Mean-field displacement computed from exact expected costs:
//   f[i][a] = -probs[i][a] * sum_b probs[i][b] * (cbar[i][a] - cbar[i][b]) / c_max.
DriftVector drift_closed_form(const GameSpec& game, const Matrix& probs, double c_max);

struct DriftEstimate {
  DriftVector mean;
  Matrix std_error;
};

// Sample mean of (updated - current) / delta over profiles drawn from probs.
DriftEstimate drift_monte_carlo(const GameSpec& game, const Matrix& probs,
                                const LearnerConfig& config, long samples);

struct DescentReport {
  int violations = 0;          // points where the derivative exceeds +1e-10
  double max_value = 0.0;      // largest derivative seen (should be <= 0)
  double max_rel_mismatch = 0.0;  // closed form vs finite-difference gradient
  int trials = 0;
};

// Checks that the expected potential decreases along the learner's mean
// field. At `trials` random interior strategy profiles it evaluates
// d/dt E[potential] both in closed form and as the finite-difference gradient
// dotted with drift_closed_form. Requires all coefficients > 0.
DescentReport lyapunov_descent_check(const GameSpec& game, int trials, uint64_t seed);

}  // namespace chargegame
