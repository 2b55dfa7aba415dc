#pragma once

#include <cstdint>
#include <vector>

#include "chargegame/lambda.hpp"
#include "chargegame/matrix.hpp"

namespace chargegame {

// One action per player; entries are resource indices in [0, M).
struct ActionProfile {
  std::vector<int> actions;

  ActionProfile() = default;
  explicit ActionProfile(std::vector<int> a) : actions(std::move(a)) {}
  int size() const { return static_cast<int>(actions.size()); }
  bool operator==(const ActionProfile&) const = default;
};

// Finite congestion game with load-coupled costs: player i choosing resource
// r_i pays alpha(i, r_i) * lambda(base_load + sum_j alpha(j, r_j)).
// Immutable after construction; all operations on it are pure functions.
class GameSpec {
 public:
  // Heterogeneous game: one coefficient row per player.
  GameSpec(Matrix alpha, LambdaFn lambda, double base_load = 0.0);
  // Symmetric game: every player shares the same coefficient vector.
  static GameSpec symmetric(int n_players, std::vector<double> alpha,
                            LambdaFn lambda, double base_load = 0.0);

  int n_players() const { return alpha_.rows(); }
  int n_resources() const { return alpha_.cols(); }
  double alpha(int player, int resource) const { return alpha_(player, resource); }
  const Matrix& alpha_matrix() const { return alpha_; }
  const LambdaFn& lambda() const { return lambda_; }
  double lambda_at(double load) const { return lambda_(load); }
  double base_load() const { return base_load_; }

  // True when every row of the coefficient matrix is bit-identical.
  bool has_symmetric_alpha() const;

 private:
  Matrix alpha_;
  LambdaFn lambda_;
  double base_load_ = 0.0;
};

// Row-stochastic strategy matrix, one simplex row per player.
class MixedProfile {
 public:
  explicit MixedProfile(Matrix probs);
  static MixedProfile uniform(int n_players, int n_resources);
  // Unit row e_{actions[i]} per player.
  static MixedProfile degenerate(const std::vector<int>& actions, int n_resources);

  const Matrix& probs() const { return probs_; }
  int n_players() const { return probs_.rows(); }
  int n_resources() const { return probs_.cols(); }

 private:
  Matrix probs_;
};

// ---- pure-profile operations ----

// Occupancy vector: entry a counts the players choosing resource a.
std::vector<int> count_loads(const GameSpec& game, const ActionProfile& profile);

// base_load + sum_i alpha(i, r_i).
double aggregate_load(const GameSpec& game, const ActionProfile& profile);

// alpha(player, r_player) * lambda(aggregate_load).
double cost(const GameSpec& game, int player, const ActionProfile& profile);

// lambda(aggregate_load): shares the sign of every unilateral cost change.
double ordinal_potential(const GameSpec& game, const ActionProfile& profile);

// True iff no player can lower her cost by more than epsilon with a
// unilateral move. epsilon = 0 gives exact equilibria.
bool is_nash(const GameSpec& game, const ActionProfile& profile, double epsilon = 0.0);

// For symmetric games only: the set of resources with the minimal coefficient
// (ties within 1e-12). A profile is an equilibrium iff it is supported there.
std::vector<int> characterize_ne(const GameSpec& game);

// Exhaustive scan of all M^N profiles (guarded at 1e6) for exact equilibria.
std::vector<ActionProfile> enumerate_ne_bruteforce(const GameSpec& game);

// ---- mixed-strategy operations ----
// The matrix overloads treat the entries as raw coordinates; every quantity
// is a multilinear polynomial in them, which is exactly what coordinate-wise
// finite differencing of the potential requires. The MixedProfile overloads
// just forward.

// Expected cost of player i pinned to `resource`, others drawn from probs.
// Exact enumeration over the M^(N-1) opponent profiles (guarded at 1e6).
double expected_cost(const GameSpec& game, const Matrix& probs, int player, int resource);
double expected_cost(const GameSpec& game, const MixedProfile& mixed, int player, int resource);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Monte Carlo version of expected_cost for instances too large to enumerate.
// Deterministic for a fixed seed.
McEstimate expected_cost_mc(const GameSpec& game, const Matrix& probs, int player,
                            int resource, long samples, uint64_t seed);

// Expectation of the ordinal potential under probs (M^N terms, guarded at 1e6).
double continuous_potential(const GameSpec& game, const Matrix& probs);
double continuous_potential(const GameSpec& game, const MixedProfile& mixed);

}  // namespace chargegame
