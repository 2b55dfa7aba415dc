#include "chargegame/lambda.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chargegame {

LambdaFn LambdaFn::affine(double c0, double c1) {
  if (!(c0 >= 0.0) || !(c1 >= 0.0))
    throw std::invalid_argument("LambdaFn::affine: coefficients must be >= 0");
  return LambdaFn(Kind::affine, {c0, c1}, {}, nullptr);
}

LambdaFn LambdaFn::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("LambdaFn::polynomial: no coefficients");
  for (double c : coeffs)
    if (!(c >= 0.0)) throw std::invalid_argument("LambdaFn::polynomial: coefficients must be >= 0");
  return LambdaFn(Kind::polynomial, std::move(coeffs), {}, nullptr);
}

LambdaFn LambdaFn::tabulated(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("LambdaFn::tabulated: need >= 2 matching breakpoints");
  for (size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || !std::isfinite(y[k]))
      throw std::invalid_argument("LambdaFn::tabulated: non-finite breakpoint");
    if (!(y[k] >= 0.0))
      throw std::invalid_argument("LambdaFn::tabulated: values must be >= 0");
    if (k > 0 && !(x[k] > x[k - 1]))
      throw std::invalid_argument("LambdaFn::tabulated: abscissae must be strictly increasing");
    if (k > 0 && y[k] < y[k - 1])
      throw std::invalid_argument("LambdaFn::tabulated: values must be non-decreasing");
  }
  return LambdaFn(Kind::tabulated, std::move(x), std::move(y), nullptr);
}

LambdaFn LambdaFn::grid_marginal(std::shared_ptr<const MarginalSource> source) {
  if (!source) throw std::invalid_argument("LambdaFn::grid_marginal: null source");
  return LambdaFn(Kind::grid_marginal, {}, {}, std::move(source));
}

double LambdaFn::operator()(double x) const {
  switch (kind_) {
    case Kind::affine:
      return xs_[0] + xs_[1] * x;
    case Kind::polynomial: {
      double acc = 0.0;
      for (size_t k = xs_.size(); k-- > 0;) acc = acc * x + xs_[k];
      return acc;
    }
    case Kind::tabulated: {
      if (x <= xs_.front()) return ys_.front();
      if (x >= xs_.back()) {
        size_t n = xs_.size();
        double slope = (ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
        return ys_.back() + slope * (x - xs_.back());
      }
      auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      size_t hi = static_cast<size_t>(it - xs_.begin());
      size_t lo = hi - 1;
      double t = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
      return ys_[lo] + t * (ys_[hi] - ys_[lo]);
    }
    case Kind::grid_marginal:
      return source_->marginal(x);
  }
  throw std::logic_error("LambdaFn: unknown kind");
}

void LambdaFn::check_monotone(double lo, double hi, int samples) const {
  if (!(hi > lo) || samples < 2)
    throw std::invalid_argument("LambdaFn::check_monotone: bad range");
  double prev = (*this)(lo);
  for (int k = 0; k < samples; ++k) {
    double x = lo + (hi - lo) * static_cast<double>(k + 1) / samples;
    double y = (*this)(x);
    if (!(prev >= 0.0) || !std::isfinite(y))
      throw std::runtime_error("LambdaFn: negative or non-finite value at sampled point");
    if (y < prev)
      throw std::runtime_error("LambdaFn: decreasing between sampled points");
    prev = y;
  }
}

std::string LambdaFn::describe() const {
  switch (kind_) {
    case Kind::affine: return "affine";
    case Kind::polynomial: return "polynomial";
    case Kind::tabulated: return "tabulated";
    case Kind::grid_marginal: return source_ ? source_->describe() : "grid_marginal";
  }
  return "?";
}

}  // namespace chargegame
