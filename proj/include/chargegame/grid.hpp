#pragma once

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "chargegame/game.hpp"
#include "chargegame/lambda.hpp"

namespace chargegame {

enum class BusKind { slack, transformer, evcs, load };

struct Bus {
  std::string id;
  BusKind kind = BusKind::load;
  double base_load_kw = 0.0;  // fixed demand from other usages
};

struct Line {
  std::string from;
  std::string to;
  std::complex<double> admittance;  // per-unit
};

// Radial or meshed network with one slack bus, one transformer bus and an
// ordered list of charging-station buses (the resources of the induced game).
// Immutable after construction.
class GridNetwork {
 public:
  GridNetwork(std::vector<Bus> buses, std::vector<Line> lines,
              std::complex<double> slack_voltage,
              std::vector<std::string> evcs_order, double power_base_mva);

  int n_buses() const { return static_cast<int>(buses_.size()); }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  std::complex<double> slack_voltage() const { return slack_voltage_; }
  double power_base_mva() const { return power_base_mva_; }

  int slack_index() const { return slack_index_; }
  int transformer_index() const { return transformer_index_; }
  const std::vector<int>& evcs_indices() const { return evcs_indices_; }
  int n_evcs() const { return static_cast<int>(evcs_indices_.size()); }

  int bus_index(const std::string& id) const;  // throws on unknown id
  const std::vector<std::complex<double>>& ybus() const { return ybus_; }  // dense, row-major
  // Resolved bus indices per line, aligned with lines().
  const std::vector<std::pair<int, int>>& line_endpoints() const { return line_endpoints_; }

  // Per-bus base loads (kW), indexed like buses().
  std::vector<double> base_loads_kw() const;

 private:
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::complex<double> slack_voltage_;
  double power_base_mva_ = 1.0;
  int slack_index_ = -1;
  int transformer_index_ = -1;
  std::vector<int> evcs_indices_;
  std::vector<std::complex<double>> ybus_;
  std::vector<std::pair<int, int>> line_endpoints_;
};

struct PowerFlowSolution {
  std::vector<std::complex<double>> voltages;  // per-unit, indexed like buses()
  std::complex<double> head_apparent_power;    // per-unit injection at the slack
  double residual = 0.0;                       // max power-balance mismatch, pu
  int iterations = 0;

  double head_mva(const GridNetwork& net) const {
    return std::abs(head_apparent_power) * net.power_base_mva();
  }
};

// Scaling constants of the operator's generation cost and of the charging
// sessions (each session lasts one hour at constant power, so energy in kWh
// and power in kW coincide numerically).
struct PricingConfig {
  double eta = 5e-3;       // currency / MVA^2
  double rho_kwh = 3.0;    // per-vehicle charging need
  double fd_step_kw = 0.1; // step for marginal-price differences

  void validate() const;
};

// Newton-Raphson solve of the bus-injection power balance with the slack
// voltage pinned. Loads are active-power demands in kW (unity power factor)
// and must be zero at the slack bus. Succeeds when the residual reaches
// `tolerance_pu` (the solver keeps polishing while progress continues, so the
// final residual is usually near machine precision).
PowerFlowSolution solve_power_flow(const GridNetwork& net,
                                   const std::vector<double>& loads_kw,
                                   double tolerance_pu = 1e-8, int max_iterations = 50);

// Convenience overload: loads by bus id, unspecified buses at 0.
PowerFlowSolution solve_power_flow(const GridNetwork& net,
                                   const std::map<std::string, double>& loads_kw);

// Operator cost: eta * |S0|^2 with S0 in MVA.
double eno_cost(const GridNetwork& net, const std::vector<double>& loads_kw,
                const PricingConfig& pricing);

// Central finite difference of eno_cost with respect to the load at `bus`,
// in currency per kWh.
double marginal_price(const GridNetwork& net, const std::vector<double>& loads_kw,
                      int bus, const PricingConfig& pricing);

// Load vector of the reduced model: charging-station demands are replaced by
// the weighted aggregate at the transformer bus; every other bus keeps its
// base load.
std::vector<double> reduced_loads(const GridNetwork& net, double aggregate_kw);

// Result of fitting per-station scale factors so that demand at station r
// has the same marginal cost as alpha_tilde[r] times that demand placed at
// the transformer bus. Keeps a copy of the network so the reduced marginal
// price stays evaluable.
class ReductionResult : public MarginalSource {
 public:
  ReductionResult(GridNetwork net, PricingConfig pricing,
                  std::vector<double> alpha_tilde, double objective_value,
                  double l_max_kw);

  const std::vector<double>& alpha_tilde() const { return alpha_tilde_; }
  double objective_value() const { return objective_value_; }
  double l_max_kw() const { return l_max_kw_; }
  const GridNetwork& net() const { return net_; }
  const PricingConfig& pricing() const { return pricing_; }

  // Marginal price at the transformer bus with aggregate load_kw placed there.
  double marginal(double load_kw) const override;
  std::string describe() const override;

  // Sum over stations of alpha_tilde[s] * base_load_kw[s]: the constant
  // offset inside the induced game's lambda argument.
  double weighted_base_load_kw() const;

 private:
  GridNetwork net_;
  PricingConfig pricing_;
  std::vector<double> alpha_tilde_;
  double objective_value_ = 0.0;
  double l_max_kw_ = 0.0;
};

// Fits alpha_tilde > 0 by minimizing the trapezoid-discretized squared gap
// (21 points per station sweep on [0, l_max_kw]) between the true marginal
// price at each station and the scaled marginal price at the transformer.
// Nelder-Mead descent restarted from the all-ones point.
std::shared_ptr<const ReductionResult> reduce_grid(const GridNetwork& net,
                                                   const PricingConfig& pricing,
                                                   double l_max_kw);

// Per-session charging cost at station `resource` when counts[s] vehicles sit
// at station s: rho * alpha_tilde[r] * marginal(aggregate), with the
// aggregate = sum_s rho * alpha_tilde[s] * counts[s] + sum_s alpha_tilde[s] * base[s].
double charging_cost(const ReductionResult& reduction, const PricingConfig& pricing,
                     const std::vector<int>& counts,
                     const std::vector<double>& base_loads_kw, int resource);

// The induced congestion game: coefficient rho * alpha_tilde[r] per station,
// lambda = reduced marginal price tabulated at 256 points over
// [0, n_players * rho * max(alpha_tilde) + weighted base], monotonicity
// verified on the samples.
GameSpec build_congestion_game(const GridNetwork& net, const PricingConfig& pricing,
                               const ReductionResult& reduction, int n_players);

}  // namespace chargegame
