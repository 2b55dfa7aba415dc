#pragma once

#include <memory>
#include <string>
#include <vector>

namespace chargegame {

// Anything that can report a marginal cost for an aggregate load (kW).
// Implemented by the reduced grid so a load-price function can be backed by
// live power-flow evaluations instead of a frozen table.
class MarginalSource {
 public:
  virtual ~MarginalSource() = default;
  virtual double marginal(double load_kw) const = 0;
  virtual std::string describe() const { return "marginal source"; }
};

// Non-decreasing map R+ -> R+ applied to the aggregate load. Kept as a closed
// family (instead of arbitrary callbacks) so monotonicity can be sampled and
// configs stay serializable.
class LambdaFn {
 public:
  enum class Kind { affine, polynomial, tabulated, grid_marginal };

  // c0 + c1 * x, both coefficients >= 0.
  static LambdaFn affine(double c0, double c1);
  // Sum of coeffs[k] * x^k with all coefficients >= 0.
  static LambdaFn polynomial(std::vector<double> coeffs);
  // Piecewise-linear through (x[k], y[k]); x strictly increasing, y
  // non-decreasing and >= 0. Below the first breakpoint the first value is
  // held; above the last one the final segment slope is extended.
  static LambdaFn tabulated(std::vector<double> x, std::vector<double> y);
  // Marginal cost of a reduced grid, evaluated on demand.
  static LambdaFn grid_marginal(std::shared_ptr<const MarginalSource> source);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  // Coefficients for affine/polynomial kinds.
  const std::vector<double>& coefficients() const { return xs_; }
  const std::vector<double>& table_x() const { return xs_; }
  const std::vector<double>& table_y() const { return ys_; }
  const std::shared_ptr<const MarginalSource>& source() const { return source_; }

  // Samples `samples` ordered points on [lo, hi] and throws if any adjacent
  // pair decreases or any value is negative.
  void check_monotone(double lo, double hi, int samples = 1000) const;

  std::string describe() const;

 private:
  LambdaFn(Kind kind, std::vector<double> xs, std::vector<double> ys,
           std::shared_ptr<const MarginalSource> source)
      : kind_(kind), xs_(std::move(xs)), ys_(std::move(ys)), source_(std::move(source)) {}

  Kind kind_ = Kind::affine;
  std::vector<double> xs_;  // coefficients, or table abscissae
  std::vector<double> ys_;  // table ordinates
  std::shared_ptr<const MarginalSource> source_;
};

}  // namespace chargegame
