#pragma once

#include <cmath>
#include <numbers>

#include "covspec/error.hpp"

namespace covspec {

template <CovarianceSpectral M>
double eval_covariance(const M& model, const Eigen::VectorXd& lag, long u, long grid_size) {
  if (grid_size < 2 * std::abs(u) + 2) {
    throw ValidationError("eval_covariance: grid size must be at least 2|u| + 2");
  }
  const double F = static_cast<double>(grid_size);
  Complex sum{0.0, 0.0};
  double magnitude = 0.0;
  for (long j = 1; j < grid_size; ++j) {
    const double tau = (2 * j <= grid_size) ? j / F : j / F - 1.0;
    const Complex h = model.H(lag, tau);
    sum += h * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(u) * tau);
    magnitude += std::abs(h);
  }
  sum /= F;
  magnitude /= F;
  if (std::abs(sum.imag()) > 1e-8 * std::max(magnitude, 1e-300)) {
    throw NumericalError("eval_covariance: imaginary residue exceeds tolerance; H is not Hermitian");
  }
  return sum.real();
}

}  // namespace covspec
