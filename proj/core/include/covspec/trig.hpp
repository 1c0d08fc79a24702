#pragma once

#include <cstddef>
#include <vector>

namespace covspec {

/// sin(2*pi*x) with the argument reduced to [-1/2, 1/2] first, so that
/// integer and half-integer x give exactly 0 and the result is exactly odd.
double sin_2pi(double x);

/// cos(2*pi*x) with the same reduction; exactly even in x.
double cos_2pi(double x);

/// Even trigonometric polynomial  sum_{k=0}^{K} a_k cos(2 pi k tau).
class EvenTrigPoly {
 public:
  EvenTrigPoly() : coef_{0.0} {}
  explicit EvenTrigPoly(std::vector<double> coefficients);

  double operator()(double tau) const;

  int order() const { return static_cast<int>(coef_.size()) - 1; }
  const std::vector<double>& coefficients() const { return coef_; }

 private:
  std::vector<double> coef_;
};

/// Odd trigonometric polynomial  sum_{k=1}^{K} b_k sin(2 pi k tau).
/// coefficients()[0] is b_1.
class OddTrigPoly {
 public:
  OddTrigPoly() : coef_{0.0} {}
  explicit OddTrigPoly(std::vector<double> coefficients);

  double operator()(double tau) const;

  int order() const { return static_cast<int>(coef_.size()); }
  const std::vector<double>& coefficients() const { return coef_; }

 private:
  std::vector<double> coef_;
};

}  // namespace covspec
