#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "covspec/error.hpp"
#include "covspec/kernel_smooth.hpp"

using namespace covspec;

namespace {

double nw_oracle(const std::vector<double>& x, const std::vector<double>& y, double x0, double h) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = std::exp(-0.5 * std::pow((x[i] - x0) / h, 2));
    num += w * y[i];
    den += w;
  }
  return num / den;
}

double ll_oracle(const std::vector<double>& x, const std::vector<double>& y, double x0, double h) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(x.size()), 2);
  Eigen::VectorXd W(static_cast<Eigen::Index>(x.size())), Y(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = 1;
    X(r, 1) = x[i] - x0;
    W(r) = std::exp(-0.5 * std::pow((x[i] - x0) / h, 2));
    Y(r) = y[i];
  }
  const Eigen::MatrixXd A = X.transpose() * W.asDiagonal() * X;
  const Eigen::VectorXd b = X.transpose() * W.asDiagonal() * Y;
  return A.ldlt().solve(b)(0);
}

}  // namespace

TEST(KernelSmooth, ConstantStaysConstant) {
  std::vector<double> x(50), y(50, 2.5);
  std::iota(x.begin(), x.end(), 0.0);
  for (int degree : {0, 1}) {
    KernelSmoothOptions o;
    o.degree = degree;
    const auto fit = fit_nonparametric(x, y, o);
    for (double v : fit.curve) EXPECT_NEAR(v, 2.5, 1e-12);
  }
}

TEST(KernelSmooth, SmallBandwidthInterpolates) {
  std::vector<double> x{0.0, 1.0, 2.0, 3.0, 5.0};
  std::vector<double> y{1.0, -2.0, 0.5, 4.0, 3.0};
  for (int degree : {0, 1}) {
    const auto c = kernel_regression(x, y, x, 1e-3, degree);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(c[i], y[i], 1e-12);
  }
}

TEST(KernelSmooth, MatchesDirectWeightedFits) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(80), y(80);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = std::sin(6 * x[i]) + 0.2 * u(rng);
  }
  const std::vector<double> at{0.0, 0.13, 0.5, 0.77, 1.0};
  const auto nw = kernel_regression(x, y, at, 0.07, 0);
  const auto ll = kernel_regression(x, y, at, 0.07, 1);
  for (std::size_t k = 0; k < at.size(); ++k) {
    EXPECT_NEAR(nw[k], nw_oracle(x, y, at[k], 0.07), 1e-9);
    EXPECT_NEAR(ll[k], ll_oracle(x, y, at[k], 0.07), 1e-9);
  }
}

TEST(KernelSmooth, RejectsDegenerateInput) {
  const std::vector<double> x(5, 1.0), y{1, 2, 3, 4, 5};
  EXPECT_THROW(fit_nonparametric(x, y), ValidationError);
  EXPECT_THROW(kernel_regression(x, y, x, 0.1, 0), ValidationError);
  const std::vector<double> x2{1, 2, 3};
  EXPECT_THROW(kernel_regression(x2, y, x2, 0.1, 0), ValidationError);
}

TEST(KernelSmooth, SilvermanRule) {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 0.0);
  const double mean = 49.5;
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 99.0);
  // quartiles by linear interpolation
  const double iqr = 74.25 - 24.75;
  EXPECT_NEAR(silverman_bandwidth(x), 0.9 * std::min(sd, iqr / 1.34) * std::pow(100.0, -0.2), 1e-12);
}

TEST(KernelSmooth, NoisySineWithAutomaticBandwidth) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 0.1);
  const int N = 512;
  std::vector<double> x(N), y(N);
  for (int i = 0; i < N; ++i) {
    x[static_cast<std::size_t>(i)] = (i + 0.5) / N;
    y[static_cast<std::size_t>(i)] = std::sin(2 * M_PI * x[static_cast<std::size_t>(i)]) + n(rng);
  }
  const auto fit = fit_nonparametric(x, y);
  double err = 0;
  for (int i = 0; i < N; ++i) {
    err = std::max(err, std::abs(fit.curve[static_cast<std::size_t>(i)] - std::sin(2 * M_PI * x[static_cast<std::size_t>(i)])));
  }
  EXPECT_LT(err, 0.1);
  EXPECT_GT(fit.bandwidth, 0.0);
}
