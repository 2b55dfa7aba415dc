#include "chargegame/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "chargegame/rng.hpp"

namespace chargegame {
namespace {

constexpr double kEnumerationGuard = 1e6;
constexpr double kTieTolerance = 1e-12;

void check_profile(const GameSpec& game, const ActionProfile& profile) {
  if (profile.size() != game.n_players())
    throw std::invalid_argument("ActionProfile: expected " + std::to_string(game.n_players()) +
                                " actions, got " + std::to_string(profile.size()));
  for (int a : profile.actions)
    if (a < 0 || a >= game.n_resources())
      throw std::invalid_argument("ActionProfile: resource index " + std::to_string(a) +
                                  " out of range");
}

void check_probs_shape(const GameSpec& game, const Matrix& probs) {
  if (probs.rows() != game.n_players() || probs.cols() != game.n_resources())
    throw std::invalid_argument("MixedProfile: shape does not match game");
}

void check_player_resource(const GameSpec& game, int player, int resource) {
  if (player < 0 || player >= game.n_players())
    throw std::invalid_argument("player index out of range");
  if (resource < 0 || resource >= game.n_resources())
    throw std::invalid_argument("resource index out of range");
}

// M^exponent, clamped so guard comparisons never overflow.
double pow_count(int base, int exponent) {
  double n = 1.0;
  for (int k = 0; k < exponent; ++k) {
    n *= base;
    if (n > 1e18) return n;
  }
  return n;
}

void check_enumeration_guard(int base, int exponent, const char* what) {
  if (pow_count(base, exponent) > kEnumerationGuard)
    throw std::runtime_error(std::string(what) +
                             ": enumeration guard exceeded (more than 1e6 terms); "
                             "use the Monte Carlo variant");
}

// Odometer over profiles of `digits` entries in [0, base). Returns false when
// it wraps around.
bool advance(std::vector<int>& odo, int base) {
  for (size_t k = 0; k < odo.size(); ++k) {
    if (++odo[k] < base) return true;
    odo[k] = 0;
  }
  return false;
}

int sample_index(std::span<const double> row, double u) {
  double acc = 0.0;
  int m = static_cast<int>(row.size());
  for (int a = 0; a < m; ++a) {
    acc += row[a];
    if (u < acc) return a;
  }
  return m - 1;
}

}  // namespace

GameSpec::GameSpec(Matrix alpha, LambdaFn lambda, double base_load)
    : alpha_(std::move(alpha)), lambda_(std::move(lambda)), base_load_(base_load) {
  if (alpha_.rows() < 1 || alpha_.cols() < 1)
    throw std::invalid_argument("GameSpec: need at least one player and one resource");
  for (int i = 0; i < alpha_.rows(); ++i)
    for (int a = 0; a < alpha_.cols(); ++a)
      if (!(alpha_(i, a) >= 0.0) || !std::isfinite(alpha_(i, a)))
        throw std::invalid_argument("GameSpec: coefficients must be finite and >= 0");
  if (!(base_load_ >= 0.0) || !std::isfinite(base_load_))
    throw std::invalid_argument("GameSpec: base load must be finite and >= 0");
}

GameSpec GameSpec::symmetric(int n_players, std::vector<double> alpha, LambdaFn lambda,
                             double base_load) {
  if (n_players < 1) throw std::invalid_argument("GameSpec: need at least one player");
  Matrix m(n_players, static_cast<int>(alpha.size()));
  for (int i = 0; i < n_players; ++i)
    for (size_t a = 0; a < alpha.size(); ++a) m(i, static_cast<int>(a)) = alpha[a];
  return GameSpec(std::move(m), std::move(lambda), base_load);
}

bool GameSpec::has_symmetric_alpha() const {
  for (int i = 1; i < alpha_.rows(); ++i)
    for (int a = 0; a < alpha_.cols(); ++a)
      if (alpha_(i, a) != alpha_(0, a)) return false;
  return true;
}

MixedProfile::MixedProfile(Matrix probs) : probs_(std::move(probs)) {
  if (probs_.rows() < 1 || probs_.cols() < 1)
    throw std::invalid_argument("MixedProfile: empty matrix");
  for (int i = 0; i < probs_.rows(); ++i) {
    double sum = 0.0;
    for (int a = 0; a < probs_.cols(); ++a) {
      double p = probs_(i, a);
      if (!(p >= -1e-12) || !(p <= 1.0 + 1e-12))
        throw std::invalid_argument("MixedProfile: entry outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("MixedProfile: row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
  }
}

MixedProfile MixedProfile::uniform(int n_players, int n_resources) {
  Matrix m(n_players, n_resources, 1.0 / n_resources);
  return MixedProfile(std::move(m));
}

MixedProfile MixedProfile::degenerate(const std::vector<int>& actions, int n_resources) {
  Matrix m(static_cast<int>(actions.size()), n_resources, 0.0);
  for (size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= n_resources)
      throw std::invalid_argument("MixedProfile::degenerate: action out of range");
    m(static_cast<int>(i), actions[i]) = 1.0;
  }
  return MixedProfile(std::move(m));
}

std::vector<int> count_loads(const GameSpec& game, const ActionProfile& profile) {
  check_profile(game, profile);
  std::vector<int> counts(game.n_resources(), 0);
  for (int a : profile.actions) ++counts[a];
  return counts;
}

double aggregate_load(const GameSpec& game, const ActionProfile& profile) {
  check_profile(game, profile);
  double load = game.base_load();
  for (int i = 0; i < game.n_players(); ++i) load += game.alpha(i, profile.actions[i]);
  return load;
}

double cost(const GameSpec& game, int player, const ActionProfile& profile) {
  check_profile(game, profile);
  if (player < 0 || player >= game.n_players())
    throw std::invalid_argument("cost: player index out of range");
  return game.alpha(player, profile.actions[player]) *
         game.lambda_at(aggregate_load(game, profile));
}

double ordinal_potential(const GameSpec& game, const ActionProfile& profile) {
  return game.lambda_at(aggregate_load(game, profile));
}

bool is_nash(const GameSpec& game, const ActionProfile& profile, double epsilon) {
  check_profile(game, profile);
  if (!(epsilon >= 0.0)) throw std::invalid_argument("is_nash: epsilon must be >= 0");
  double load = aggregate_load(game, profile);
  for (int i = 0; i < game.n_players(); ++i) {
    double own_alpha = game.alpha(i, profile.actions[i]);
    double own_cost = own_alpha * game.lambda_at(load);
    double others = load - own_alpha;
    for (int a = 0; a < game.n_resources(); ++a) {
      if (a == profile.actions[i]) continue;
      double alt = game.alpha(i, a) * game.lambda_at(others + game.alpha(i, a));
      if (own_cost > alt + epsilon) return false;
    }
  }
  return true;
}

std::vector<int> characterize_ne(const GameSpec& game) {
  if (!game.has_symmetric_alpha())
    throw std::invalid_argument(
        "characterize_ne: only symmetric games are characterized; "
        "use enumerate_ne_bruteforce for heterogeneous coefficients");
  double min_alpha = std::numeric_limits<double>::infinity();
  for (int a = 0; a < game.n_resources(); ++a) min_alpha = std::min(min_alpha, game.alpha(0, a));
  std::vector<int> support;
  for (int a = 0; a < game.n_resources(); ++a)
    if (game.alpha(0, a) <= min_alpha + kTieTolerance) support.push_back(a);
  return support;
}

std::vector<ActionProfile> enumerate_ne_bruteforce(const GameSpec& game) {
  check_enumeration_guard(game.n_resources(), game.n_players(), "enumerate_ne_bruteforce");
  std::vector<ActionProfile> out;
  std::vector<int> odo(game.n_players(), 0);
  do {
    ActionProfile p(odo);
    if (is_nash(game, p, 0.0)) out.push_back(std::move(p));
  } while (advance(odo, game.n_resources()));
  return out;
}

double expected_cost(const GameSpec& game, const Matrix& probs, int player, int resource) {
  check_probs_shape(game, probs);
  check_player_resource(game, player, resource);
  check_enumeration_guard(game.n_resources(), game.n_players() - 1, "expected_cost");

  const int n = game.n_players();
  std::vector<int> others;
  for (int j = 0; j < n; ++j)
    if (j != player) others.push_back(j);

  double pinned_alpha = game.alpha(player, resource);
  double total = 0.0;
  std::vector<int> odo(others.size(), 0);
  do {
    double weight = 1.0;
    double load = game.base_load() + pinned_alpha;
    for (size_t k = 0; k < others.size(); ++k) {
      int j = others[k];
      weight *= probs(j, odo[k]);
      load += game.alpha(j, odo[k]);
    }
    total += weight * pinned_alpha * game.lambda_at(load);
  } while (advance(odo, game.n_resources()));
  return total;
}

double expected_cost(const GameSpec& game, const MixedProfile& mixed, int player, int resource) {
  return expected_cost(game, mixed.probs(), player, resource);
}

McEstimate expected_cost_mc(const GameSpec& game, const Matrix& probs, int player,
                            int resource, long samples, uint64_t seed) {
  check_probs_shape(game, probs);
  check_player_resource(game, player, resource);
  if (samples < 1) throw std::invalid_argument("expected_cost_mc: samples must be >= 1");

  const int n = game.n_players();
  double pinned_alpha = game.alpha(player, resource);
  double mean = 0.0, m2 = 0.0;
  for (long s = 0; s < samples; ++s) {
    double load = game.base_load() + pinned_alpha;
    for (int j = 0; j < n; ++j) {
      if (j == player) continue;
      int a = sample_index(probs.row(j), rng::uniform(seed, static_cast<uint64_t>(j),
                                                      static_cast<uint64_t>(s)));
      load += game.alpha(j, a);
    }
    double c = pinned_alpha * game.lambda_at(load);
    double d = c - mean;
    mean += d / static_cast<double>(s + 1);
    m2 += d * (c - mean);
  }
  double std_error = 0.0;
  if (samples > 1)
    std_error = std::sqrt(m2 / static_cast<double>(samples - 1)) /
                std::sqrt(static_cast<double>(samples));
  return {mean, std_error};
}

double continuous_potential(const GameSpec& game, const Matrix& probs) {
  check_probs_shape(game, probs);
  check_enumeration_guard(game.n_resources(), game.n_players(), "continuous_potential");
  double total = 0.0;
  std::vector<int> odo(game.n_players(), 0);
  do {
    double weight = 1.0;
    double load = game.base_load();
    for (int i = 0; i < game.n_players(); ++i) {
      weight *= probs(i, odo[i]);
      load += game.alpha(i, odo[i]);
    }
    total += weight * game.lambda_at(load);
  } while (advance(odo, game.n_resources()));
  return total;
}

double continuous_potential(const GameSpec& game, const MixedProfile& mixed) {
  return continuous_potential(game, mixed.probs());
}

}  // namespace chargegame
