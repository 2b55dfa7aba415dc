#include "chargegame/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace chargegame {
namespace {

using cx = std::complex<double>;

constexpr double kResidualFloor = 1e-15;

// Gaussian elimination with partial pivoting; A is n x n row-major, solved in
// place. Plenty for the few-bus Jacobians this solver sees.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(a[static_cast<size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      double v = std::abs(a[static_cast<size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (!(best > 1e-300)) throw std::runtime_error("power flow: singular Jacobian");
    if (pivot != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<size_t>(pivot) * n + c], a[static_cast<size_t>(col) * n + c]);
      std::swap(b[pivot], b[col]);
    }
    double inv = 1.0 / a[static_cast<size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      double factor = a[static_cast<size_t>(r) * n + col] * inv;
      if (factor == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<size_t>(r) * n + c] -= factor * a[static_cast<size_t>(col) * n + c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[static_cast<size_t>(r) * n + c] * x[c];
    x[r] = acc / a[static_cast<size_t>(r) * n + r];
  }
  return x;
}

void check_loads(const GridNetwork& net, const std::vector<double>& loads_kw) {
  if (static_cast<int>(loads_kw.size()) != net.n_buses())
    throw std::invalid_argument("power flow: loads vector size does not match bus count");
  if (loads_kw[net.slack_index()] != 0.0)
    throw std::invalid_argument("power flow: loads at the slack bus are not supported");
  for (double l : loads_kw)
    if (!std::isfinite(l)) throw std::invalid_argument("power flow: non-finite load");
}

}  // namespace

GridNetwork::GridNetwork(std::vector<Bus> buses, std::vector<Line> lines,
                         std::complex<double> slack_voltage,
                         std::vector<std::string> evcs_order, double power_base_mva)
    : buses_(std::move(buses)), lines_(std::move(lines)), slack_voltage_(slack_voltage),
      power_base_mva_(power_base_mva) {
  if (buses_.empty()) throw std::invalid_argument("GridNetwork: no buses");
  if (!(power_base_mva_ > 0.0)) throw std::invalid_argument("GridNetwork: power base must be > 0");
  if (std::abs(slack_voltage_) <= 0.0)
    throw std::invalid_argument("GridNetwork: slack voltage must be nonzero");

  std::unordered_map<std::string, int> index;
  for (int k = 0; k < n_buses(); ++k) {
    const Bus& bus = buses_[k];
    if (bus.id.empty()) throw std::invalid_argument("GridNetwork: empty bus id");
    if (!index.emplace(bus.id, k).second)
      throw std::invalid_argument("GridNetwork: duplicate bus id '" + bus.id + "'");
    if (!(bus.base_load_kw >= 0.0) || !std::isfinite(bus.base_load_kw))
      throw std::invalid_argument("GridNetwork: base load must be finite and >= 0");
    if (bus.kind == BusKind::slack) {
      if (slack_index_ >= 0) throw std::invalid_argument("GridNetwork: more than one slack bus");
      slack_index_ = k;
      if (bus.base_load_kw != 0.0)
        throw std::invalid_argument("GridNetwork: the slack bus cannot carry load");
    }
    if (bus.kind == BusKind::transformer) {
      if (transformer_index_ >= 0)
        throw std::invalid_argument("GridNetwork: more than one transformer bus");
      transformer_index_ = k;
    }
  }
  if (slack_index_ < 0) throw std::invalid_argument("GridNetwork: no slack bus");
  if (transformer_index_ < 0) throw std::invalid_argument("GridNetwork: no transformer bus");

  std::unordered_set<std::string> seen;
  for (const std::string& id : evcs_order) {
    auto it = index.find(id);
    if (it == index.end())
      throw std::invalid_argument("GridNetwork: unknown charging-station bus '" + id + "'");
    if (buses_[it->second].kind != BusKind::evcs)
      throw std::invalid_argument("GridNetwork: bus '" + id + "' is not a charging station");
    if (!seen.insert(id).second)
      throw std::invalid_argument("GridNetwork: duplicate charging-station id '" + id + "'");
    evcs_indices_.push_back(it->second);
  }
  for (const Bus& bus : buses_)
    if (bus.kind == BusKind::evcs && !seen.count(bus.id))
      throw std::invalid_argument("GridNetwork: charging station '" + bus.id +
                                  "' missing from the station order");

  const int b = n_buses();
  ybus_.assign(static_cast<size_t>(b) * b, cx(0.0, 0.0));
  std::vector<std::vector<int>> adjacency(b);
  for (const Line& line : lines_) {
    auto from = index.find(line.from);
    auto to = index.find(line.to);
    if (from == index.end() || to == index.end())
      throw std::invalid_argument("GridNetwork: line references unknown bus");
    if (from->second == to->second)
      throw std::invalid_argument("GridNetwork: line endpoints coincide");
    if (!(std::abs(line.admittance) > 0.0) || !std::isfinite(std::abs(line.admittance)))
      throw std::invalid_argument("GridNetwork: line admittance must be nonzero and finite");
    int f = from->second, t = to->second;
    ybus_[static_cast<size_t>(f) * b + f] += line.admittance;
    ybus_[static_cast<size_t>(t) * b + t] += line.admittance;
    ybus_[static_cast<size_t>(f) * b + t] -= line.admittance;
    ybus_[static_cast<size_t>(t) * b + f] -= line.admittance;
    line_endpoints_.emplace_back(f, t);
    adjacency[f].push_back(t);
    adjacency[t].push_back(f);
  }

  std::vector<bool> reached(b, false);
  std::queue<int> frontier;
  frontier.push(slack_index_);
  reached[slack_index_] = true;
  while (!frontier.empty()) {
    int k = frontier.front();
    frontier.pop();
    for (int next : adjacency[k])
      if (!reached[next]) {
        reached[next] = true;
        frontier.push(next);
      }
  }
  for (int k = 0; k < b; ++k)
    if (!reached[k])
      throw std::invalid_argument("GridNetwork: bus '" + buses_[k].id +
                                  "' is not connected to the slack bus");
}

int GridNetwork::bus_index(const std::string& id) const {
  for (int k = 0; k < n_buses(); ++k)
    if (buses_[k].id == id) return k;
  throw std::invalid_argument("GridNetwork: unknown bus '" + id + "'");
}

std::vector<double> GridNetwork::base_loads_kw() const {
  std::vector<double> loads(buses_.size(), 0.0);
  for (size_t k = 0; k < buses_.size(); ++k) loads[k] = buses_[k].base_load_kw;
  return loads;
}

void PricingConfig::validate() const {
  if (!(eta > 0.0) || !(rho_kwh > 0.0) || !(fd_step_kw > 0.0))
    throw std::invalid_argument("PricingConfig: eta, rho and fd step must be positive");
}

PowerFlowSolution solve_power_flow(const GridNetwork& net, const std::vector<double>& loads_kw,
                                   double tolerance_pu, int max_iterations) {
  check_loads(net, loads_kw);
  const int b = net.n_buses();
  const int slack = net.slack_index();
  const auto& y = net.ybus();

  std::vector<int> free_buses;  // everything but the slack
  for (int k = 0; k < b; ++k)
    if (k != slack) free_buses.push_back(k);
  const int nf = static_cast<int>(free_buses.size());

  // Specified injections, per-unit: consumption enters with a minus sign,
  // unity power factor.
  std::vector<cx> s_spec(b, cx(0.0, 0.0));
  for (int k = 0; k < b; ++k)
    s_spec[k] = cx(-loads_kw[k] / 1000.0 / net.power_base_mva(), 0.0);

  std::vector<cx> u(b, net.slack_voltage());  // flat start
  std::vector<cx> current(b), mismatch(b);

  auto evaluate = [&]() {
    double norm = 0.0;
    for (int k = 0; k < b; ++k) {
      cx acc(0.0, 0.0);
      for (int m = 0; m < b; ++m) acc += y[static_cast<size_t>(k) * b + m] * u[m];
      current[k] = acc;
    }
    for (int k : free_buses) {
      mismatch[k] = u[k] * std::conj(current[k]) - s_spec[k];
      norm = std::max(norm, std::abs(mismatch[k]));
    }
    return norm;
  };

  double norm = 0.0;
  int evals = 0;
  // Two fixed polish steps after crossing the tolerance drive the residual to
  // the precision floor on a schedule that is stable under tiny input
  // perturbations; marginal-price differences need that stability.
  int polish_left = -1;
  for (;;) {
    norm = evaluate();
    ++evals;
    if (norm <= kResidualFloor) break;
    if (polish_left == 0) break;
    if (polish_left < 0 && norm <= tolerance_pu) polish_left = 2;
    if (evals >= max_iterations) break;

    std::vector<double> jac(static_cast<size_t>(2 * nf) * (2 * nf), 0.0);
    std::vector<double> rhs(2 * nf, 0.0);
    for (int row = 0; row < nf; ++row) {
      int k = free_buses[row];
      rhs[row] = -mismatch[k].real();
      rhs[nf + row] = -mismatch[k].imag();
      for (int col = 0; col < nf; ++col) {
        int m = free_buses[col];
        cx de = u[k] * std::conj(y[static_cast<size_t>(k) * b + m]);
        if (k == m) de += std::conj(current[k]);
        cx df = cx(0.0, 1.0) * (k == m ? std::conj(current[k]) : cx(0.0, 0.0)) -
                cx(0.0, 1.0) * u[k] * std::conj(y[static_cast<size_t>(k) * b + m]);
        jac[static_cast<size_t>(row) * 2 * nf + col] = de.real();
        jac[static_cast<size_t>(row) * 2 * nf + nf + col] = df.real();
        jac[static_cast<size_t>(nf + row) * 2 * nf + col] = de.imag();
        jac[static_cast<size_t>(nf + row) * 2 * nf + nf + col] = df.imag();
      }
    }
    std::vector<double> dx = solve_dense(std::move(jac), std::move(rhs));
    for (int col = 0; col < nf; ++col)
      u[free_buses[col]] += cx(dx[col], dx[nf + col]);
    if (polish_left > 0) --polish_left;
  }

  if (!(norm <= tolerance_pu)) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", norm);
    throw std::runtime_error(std::string("power flow did not converge: residual ") + buf +
                             " pu after " + std::to_string(evals) +
                             " iterations (infeasible loading?)");
  }

  PowerFlowSolution solution;
  solution.voltages = std::move(u);
  // Head power assembled as consumed load plus line losses; the direct slack
  // injection U conj((YU)) cancels catastrophically through stiff lines.
  cx s0(0.0, 0.0);
  for (int k = 0; k < b; ++k) s0 -= s_spec[k];
  for (size_t l = 0; l < net.lines().size(); ++l) {
    auto [f, t] = net.line_endpoints()[l];
    cx du = solution.voltages[f] - solution.voltages[t];
    s0 += std::norm(du) * std::conj(net.lines()[l].admittance);
  }
  solution.head_apparent_power = s0;
  solution.residual = norm;
  solution.iterations = evals;
  return solution;
}

PowerFlowSolution solve_power_flow(const GridNetwork& net,
                                   const std::map<std::string, double>& loads_kw) {
  std::vector<double> loads(net.n_buses(), 0.0);
  for (const auto& [id, kw] : loads_kw) loads[net.bus_index(id)] = kw;
  return solve_power_flow(net, loads);
}

double eno_cost(const GridNetwork& net, const std::vector<double>& loads_kw,
                const PricingConfig& pricing) {
  pricing.validate();
  PowerFlowSolution sol = solve_power_flow(net, loads_kw);
  double s0_mva = sol.head_mva(net);
  return pricing.eta * s0_mva * s0_mva;
}

double marginal_price(const GridNetwork& net, const std::vector<double>& loads_kw, int bus,
                      const PricingConfig& pricing) {
  pricing.validate();
  if (bus < 0 || bus >= net.n_buses())
    throw std::invalid_argument("marginal_price: bus index out of range");
  if (bus == net.slack_index())
    throw std::invalid_argument("marginal_price: cannot perturb the slack bus");
  double h = pricing.fd_step_kw;
  std::vector<double> up = loads_kw, down = loads_kw;
  up[bus] += h;
  down[bus] -= h;
  return (eno_cost(net, up, pricing) - eno_cost(net, down, pricing)) / (2.0 * h);
}

std::vector<double> reduced_loads(const GridNetwork& net, double aggregate_kw) {
  std::vector<double> loads = net.base_loads_kw();
  for (int s : net.evcs_indices()) loads[s] = 0.0;
  loads[net.transformer_index()] += aggregate_kw;
  return loads;
}

ReductionResult::ReductionResult(GridNetwork net, PricingConfig pricing,
                                 std::vector<double> alpha_tilde, double objective_value,
                                 double l_max_kw)
    : net_(std::move(net)), pricing_(pricing), alpha_tilde_(std::move(alpha_tilde)),
      objective_value_(objective_value), l_max_kw_(l_max_kw) {
  if (static_cast<int>(alpha_tilde_.size()) != net_.n_evcs())
    throw std::invalid_argument("ReductionResult: one scale factor per charging station");
  for (double a : alpha_tilde_)
    if (!(a > 0.0)) throw std::invalid_argument("ReductionResult: scale factors must be > 0");
}

double ReductionResult::marginal(double load_kw) const {
  return marginal_price(net_, reduced_loads(net_, load_kw), net_.transformer_index(), pricing_);
}

std::string ReductionResult::describe() const { return "reduced grid marginal price"; }

double ReductionResult::weighted_base_load_kw() const {
  double acc = 0.0;
  for (int s = 0; s < net_.n_evcs(); ++s)
    acc += alpha_tilde_[s] * net_.buses()[net_.evcs_indices()[s]].base_load_kw;
  return acc;
}

namespace {

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, double step, double tol, int max_iter) {
  const int n = static_cast<int>(start.size());
  std::vector<std::pair<double, std::vector<double>>> simplex;
  simplex.reserve(n + 1);
  simplex.emplace_back(f(start), start);
  for (int k = 0; k < n; ++k) {
    std::vector<double> v = start;
    v[k] += step;
    simplex.emplace_back(f(v), std::move(v));
  }

  auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };
  NelderMeadResult result;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    double best = simplex.front().first;
    double worst = simplex.back().first;
    if (worst - best <= tol * std::max(1.0, std::abs(best))) {
      result.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (int v = 0; v < n; ++v)
      for (int k = 0; k < n; ++k) centroid[k] += simplex[v].second[k] / n;

    auto blend = [&](double coeff) {
      std::vector<double> p(n);
      for (int k = 0; k < n; ++k)
        p[k] = centroid[k] + coeff * (simplex.back().second[k] - centroid[k]);
      return p;
    };

    std::vector<double> reflected = blend(-1.0);
    double fr = f(reflected);
    if (fr < simplex.front().first) {
      std::vector<double> expanded = blend(-2.0);
      double fe = f(expanded);
      if (fe < fr)
        simplex.back() = {fe, std::move(expanded)};
      else
        simplex.back() = {fr, std::move(reflected)};
      continue;
    }
    if (fr < simplex[n - 1].first) {
      simplex.back() = {fr, std::move(reflected)};
      continue;
    }
    std::vector<double> contracted = blend(fr < simplex.back().first ? -0.5 : 0.5);
    double fc = f(contracted);
    if (fc < std::min(fr, simplex.back().first)) {
      simplex.back() = {fc, std::move(contracted)};
      continue;
    }
    for (int v = 1; v <= n; ++v) {
      for (int k = 0; k < n; ++k)
        simplex[v].second[k] = simplex[0].second[k] + 0.5 * (simplex[v].second[k] - simplex[0].second[k]);
      simplex[v].first = f(simplex[v].second);
    }
  }
  std::sort(simplex.begin(), simplex.end(), by_value);
  result.x = simplex.front().second;
  result.value = simplex.front().first;
  return result;
}

}  // namespace

std::shared_ptr<const ReductionResult> reduce_grid(const GridNetwork& net,
                                                   const PricingConfig& pricing,
                                                   double l_max_kw) {
  pricing.validate();
  if (!(l_max_kw > 0.0)) throw std::invalid_argument("reduce_grid: l_max must be positive");
  if (net.n_evcs() == 0)
    throw std::invalid_argument("reduce_grid: the network has no charging stations");
  const int n_stations = net.n_evcs();
  const int transformer = net.transformer_index();
  constexpr int kSweepPoints = 21;

  std::vector<double> base = net.base_loads_kw();
  double dl = l_max_kw / (kSweepPoints - 1);

  // Target side of the fit: true marginal prices at each station across its
  // sweep. Independent of the scale factors, so computed once.
  std::vector<std::vector<double>> target(n_stations, std::vector<double>(kSweepPoints));
  for (int s = 0; s < n_stations; ++s) {
    int bus = net.evcs_indices()[s];
    for (int k = 0; k < kSweepPoints; ++k) {
      std::vector<double> loads = base;
      loads[bus] += dl * k;
      target[s][k] = marginal_price(net, loads, bus, pricing);
    }
  }

  std::vector<double> station_base(n_stations);
  for (int s = 0; s < n_stations; ++s)
    station_base[s] = net.buses()[net.evcs_indices()[s]].base_load_kw;

  auto objective = [&](const std::vector<double>& alpha) {
    for (double a : alpha)
      if (!(a > 0.0)) return 1e300;
    double weighted_base = 0.0;
    for (int s = 0; s < n_stations; ++s) weighted_base += alpha[s] * station_base[s];
    double acc = 0.0;
    for (int s = 0; s < n_stations; ++s) {
      for (int k = 0; k < kSweepPoints; ++k) {
        double aggregate = weighted_base + alpha[s] * dl * k;
        double mp = marginal_price(net, reduced_loads(net, aggregate), transformer, pricing);
        double gap = target[s][k] - alpha[s] * mp;
        double weight = (k == 0 || k == kSweepPoints - 1) ? 0.5 * dl : dl;
        acc += weight * gap * gap;
      }
    }
    return acc;
  };

  std::vector<double> best(n_stations, 1.0);
  double best_value = objective(best);
  bool converged = false;
  for (int restart = 0; restart < 5; ++restart) {
    NelderMeadResult nm = nelder_mead(objective, best, 0.05, 1e-12, 400 * n_stations);
    converged = nm.converged;
    double improvement = best_value - nm.value;
    if (nm.value < best_value) {
      best = nm.x;
      best_value = nm.value;
    }
    if (converged && improvement < 1e-12) break;
  }
  if (!converged)
    throw std::runtime_error(
        "reduce_grid: scale-factor fit failed to converge (mis-specified network?)");

  return std::make_shared<ReductionResult>(net, pricing, best, best_value, l_max_kw);
}

double charging_cost(const ReductionResult& reduction, const PricingConfig& pricing,
                     const std::vector<int>& counts, const std::vector<double>& base_loads_kw,
                     int resource) {
  pricing.validate();
  const auto& alpha = reduction.alpha_tilde();
  const int m = static_cast<int>(alpha.size());
  if (static_cast<int>(counts.size()) != m || static_cast<int>(base_loads_kw.size()) != m)
    throw std::invalid_argument("charging_cost: counts/base loads must cover every station");
  if (resource < 0 || resource >= m)
    throw std::invalid_argument("charging_cost: resource index out of range");
  double aggregate = 0.0;
  for (int s = 0; s < m; ++s) {
    if (counts[s] < 0) throw std::invalid_argument("charging_cost: negative count");
    aggregate += pricing.rho_kwh * alpha[s] * counts[s] + alpha[s] * base_loads_kw[s];
  }
  const GridNetwork& net = reduction.net();
  double mp = marginal_price(net, reduced_loads(net, aggregate), net.transformer_index(), pricing);
  return pricing.rho_kwh * alpha[resource] * mp;
}

GameSpec build_congestion_game(const GridNetwork& net, const PricingConfig& pricing,
                               const ReductionResult& reduction, int n_players) {
  pricing.validate();
  if (n_players < 1) throw std::invalid_argument("build_congestion_game: need players");
  const auto& alpha_tilde = reduction.alpha_tilde();
  if (static_cast<int>(alpha_tilde.size()) != net.n_evcs())
    throw std::invalid_argument("build_congestion_game: reduction does not match network");

  double base = 0.0;
  double max_scale = 0.0;
  for (int s = 0; s < net.n_evcs(); ++s) {
    base += alpha_tilde[s] * net.buses()[net.evcs_indices()[s]].base_load_kw;
    max_scale = std::max(max_scale, alpha_tilde[s]);
  }
  double upper = n_players * pricing.rho_kwh * max_scale + base;

  constexpr int kSamples = 256;
  std::vector<double> xs(kSamples), ys(kSamples);
  for (int k = 0; k < kSamples; ++k) {
    double x = upper * static_cast<double>(k) / (kSamples - 1);
    double y = marginal_price(net, reduced_loads(net, x), net.transformer_index(), pricing);
    xs[k] = x;
    ys[k] = std::max(y, 0.0);  // clip finite-difference noise at the unloaded end
  }
  for (int k = 1; k < kSamples; ++k)
    if (ys[k] < ys[k - 1])
      throw std::runtime_error(
          "build_congestion_game: sampled marginal price is not monotone; the requested "
          "occupancy range leaves the grid's stable operating region");

  std::vector<double> coeffs(alpha_tilde.size());
  for (size_t s = 0; s < alpha_tilde.size(); ++s) coeffs[s] = pricing.rho_kwh * alpha_tilde[s];
  return GameSpec::symmetric(n_players, std::move(coeffs),
                             LambdaFn::tabulated(std::move(xs), std::move(ys)), base);
}

}  // namespace chargegame
