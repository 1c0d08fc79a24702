#pragma once

#include <span>
#include <vector>

namespace covspec {

enum class BandwidthRule {
  /// 0.9 min(sd, IQR/1.34) n^{-1/5}
  Silverman,
  /// Leave-one-out cross-validation over a log-spaced grid.
  CrossValidation,
};

struct KernelSmoothOptions {
  double bandwidth = 0.0;  // <= 0 selects automatically
  /// 0 = Nadaraya-Watson (local constant), 1 = local linear.
  int degree = 1;
  BandwidthRule rule = BandwidthRule::CrossValidation;
};

struct NonparametricFit {
  std::vector<double> curve;
  double bandwidth = 0.0;
};

double silverman_bandwidth(std::span<const double> x);
double cv_bandwidth(std::span<const double> x, std::span<const double> y, int degree);

/// Gaussian-kernel local polynomial regression of y on x evaluated at eval_x.
/// Throws ValidationError when all x coincide.
std::vector<double> kernel_regression(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> eval_x, double bandwidth, int degree);

/// Smooths y over x, evaluated at x itself.
NonparametricFit fit_nonparametric(std::span<const double> x, std::span<const double> y,
                                   const KernelSmoothOptions& options = {});

}  // namespace covspec
