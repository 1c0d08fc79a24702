#include "covspec/trig.hpp"

#include <cmath>
#include <numbers>

#include "covspec/error.hpp"

namespace covspec {

namespace {

// x - round(x); std::round is symmetric so reduce(-x) == -reduce(x).
double reduce(double x) { return x - std::round(x); }

}  // namespace

double sin_2pi(double x) {
  const double r = reduce(x);
  if (r == 0.0 || std::abs(r) == 0.5) return 0.0;
  return std::sin(2.0 * std::numbers::pi * r);
}

double cos_2pi(double x) {
  const double r = std::abs(reduce(x));
  if (r == 0.0) return 1.0;
  if (r == 0.5) return -1.0;
  if (r == 0.25) return 0.0;
  return std::cos(2.0 * std::numbers::pi * r);
}

EvenTrigPoly::EvenTrigPoly(std::vector<double> coefficients) : coef_(std::move(coefficients)) {
  if (coef_.empty()) throw ValidationError("EvenTrigPoly needs at least a_0");
  for (double a : coef_) {
    if (!std::isfinite(a)) throw ValidationError("EvenTrigPoly coefficient is not finite");
  }
}

double EvenTrigPoly::operator()(double tau) const {
  double sum = coef_[0];
  for (std::size_t k = 1; k < coef_.size(); ++k) {
    sum += coef_[k] * cos_2pi(static_cast<double>(k) * tau);
  }
  return sum;
}

OddTrigPoly::OddTrigPoly(std::vector<double> coefficients) : coef_(std::move(coefficients)) {
  if (coef_.empty()) throw ValidationError("OddTrigPoly needs at least b_1");
  for (double b : coef_) {
    if (!std::isfinite(b)) throw ValidationError("OddTrigPoly coefficient is not finite");
  }
}

double OddTrigPoly::operator()(double tau) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < coef_.size(); ++k) {
    sum += coef_[k] * sin_2pi(static_cast<double>(k + 1) * tau);
  }
  return sum;
}

}  // namespace covspec
