#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace covspec {

/// Linear model y = X b + e whose rows sit on a (group, frequency) grid.
/// group[r] and freq_index[r] locate row r; missing cells are allowed.
struct RegressionProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> group;
  std::vector<std::size_t> freq_index;
  std::size_t n_groups = 1;
  std::size_t n_freqs = 0;

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
  /// Single group, rows at consecutive frequencies 0..n-1.
  static RegressionProblem single_series(Eigen::MatrixXd X, Eigen::VectorXd y);
  void validate() const;
};

struct OlsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
  double rss = 0.0;
  double sigma2 = 0.0;  // rss / (n - p)

  Eigen::VectorXd classical_se() const { return (sigma2 * xtx_inv.diagonal()).cwiseSqrt(); }
};

/// Throws NumericalError when X lacks full column rank.
OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Cov(e_{g1,j1}, e_{g2,j2}) = sigma_s(g1, g2) * phi^{|j1 - j2|}.
struct StructuredErrorModel {
  Eigen::MatrixXd sigma_s;
  double phi = 0.0;
  std::vector<std::string> warnings;
};

/// sigma_s(g1, g2) = (1/F) sum_j e_{g1,j} e_{g2,j} (missing cells count as 0);
/// phi = delta_1 = (1/(G F)) sum_g sum_j e_{g,j} e_{g,j+1} / sigma_s(g, g),
/// which makes delta_0 = 1. Groups with zero variance are left out of phi.
/// |phi| >= 1 is clipped to +-0.99 with a warning.
StructuredErrorModel estimate_error_structure(const RegressionProblem& problem,
                                              const Eigen::VectorXd& residuals);

/// (X'X)^{-1} X' (Sigma_S (x) Sigma_F) X (X'X)^{-1} with Sigma_F the AR(1)
/// Toeplitz matrix. Works block by block; the Kronecker product is never formed.
Eigen::MatrixXd sandwich_covariance(const RegressionProblem& problem, const Eigen::MatrixXd& xtx_inv,
                                    const StructuredErrorModel& errors);

/// Applies the AR(1) correlation matrix phi^{|j-k|} to a vector in O(n).
Eigen::VectorXd ar1_apply(const Eigen::VectorXd& x, double phi);

struct LinearFit {
  OlsResult ols;
  StructuredErrorModel errors;
  Eigen::MatrixXd covariance;  // sandwich
  Eigen::VectorXd se;          // sandwich standard errors
  double aic = 0.0;
  std::size_t n = 0;
};

/// OLS plus structured standard errors and the AIC of the fit.
LinearFit fit_linear(const RegressionProblem& problem);

/// Gaussian profile AIC: n log(RSS/n) + 2 * n_coef. RSS is floored at
/// 1e-20 * TSS so exact fits of nested models tie and the smaller order wins.
double aic(std::size_t n, double rss, std::size_t n_coef, double total_ss);

struct AicEntry {
  int order = 0;
  double aic = 0.0;
};

/// argmin of AIC; ties go to the smaller order.
int aic_select(std::span<const AicEntry> trace);

struct Band {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// estimate +- 2 SE pointwise.
Band pointwise_ci(std::span<const double> curve, std::span<const double> se);

/// sqrt(x_r' C x_r) for each row of a design matrix.
std::vector<double> fitted_se(const Eigen::MatrixXd& design, const Eigen::MatrixXd& covariance);

}  // namespace covspec
