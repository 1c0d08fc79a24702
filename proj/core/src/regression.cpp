#include "covspec/regression.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "covspec/error.hpp"

namespace covspec {

RegressionProblem RegressionProblem::single_series(Eigen::MatrixXd X, Eigen::VectorXd y) {
  RegressionProblem p;
  const auto n = static_cast<std::size_t>(y.size());
  p.X = std::move(X);
  p.y = std::move(y);
  p.group.assign(n, 0);
  p.freq_index.resize(n);
  for (std::size_t r = 0; r < n; ++r) p.freq_index[r] = r;
  p.n_groups = 1;
  p.n_freqs = n;
  return p;
}

void RegressionProblem::validate() const {
  const auto n = rows();
  if (static_cast<std::size_t>(X.rows()) != n || group.size() != n || freq_index.size() != n) {
    throw ValidationError("regression problem has inconsistent row counts");
  }
  if (!X.allFinite() || !y.allFinite()) throw ValidationError("regression problem has non-finite entries");
  for (std::size_t r = 0; r < n; ++r) {
    if (group[r] >= n_groups || freq_index[r] >= n_freqs) {
      throw ValidationError("regression row lies outside the (group, frequency) grid");
    }
  }
}

OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n != y.size()) throw ValidationError("ols: X and y differ in row count");
  if (p == 0) throw ValidationError("ols: design has no columns");
  if (n < p) {
    throw NumericalError("ols: fewer observations than coefficients");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-11);
  if (qr.rank() < p) {
    std::ostringstream msg;
    msg << "ols: design matrix is rank deficient (rank " << qr.rank() << " < " << p << " columns)";
    throw NumericalError(msg.str());
  }
  OlsResult out;
  out.coef = qr.solve(y);
  out.fitted = X * out.coef;
  out.residuals = y - out.fitted;
  out.rss = out.residuals.squaredNorm();
  out.sigma2 = n > p ? out.rss / static_cast<double>(n - p) : 0.0;

  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  out.xtx_inv = perm * inner * perm.transpose();
  return out;
}

namespace {

std::size_t distinct_frequencies(const RegressionProblem& problem) {
  std::set<std::size_t> seen(problem.freq_index.begin(), problem.freq_index.end());
  return seen.size();
}

Eigen::MatrixXd residual_grid(const RegressionProblem& problem, const Eigen::VectorXd& residuals) {
  Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(problem.n_groups),
                                               static_cast<Eigen::Index>(problem.n_freqs));
  for (std::size_t r = 0; r < problem.rows(); ++r) {
    grid(static_cast<Eigen::Index>(problem.group[r]), static_cast<Eigen::Index>(problem.freq_index[r])) =
        residuals(static_cast<Eigen::Index>(r));
  }
  return grid;
}

}  // namespace

StructuredErrorModel estimate_error_structure(const RegressionProblem& problem,
                                              const Eigen::VectorXd& residuals) {
  problem.validate();
  if (static_cast<std::size_t>(residuals.size()) != problem.rows()) {
    throw ValidationError("residual vector does not match the regression problem");
  }
  const Eigen::MatrixXd E = residual_grid(problem, residuals);
  const double F = static_cast<double>(std::max<std::size_t>(1, distinct_frequencies(problem)));

  StructuredErrorModel model;
  model.sigma_s = E * E.transpose() / F;

  double lag_one = 0.0;
  std::size_t used_groups = 0;
  for (Eigen::Index g = 0; g < E.rows(); ++g) {
    const double s = model.sigma_s(g, g);
    if (!(s > 0.0)) continue;
    ++used_groups;
    double acc = 0.0;
    for (Eigen::Index j = 0; j + 1 < E.cols(); ++j) acc += E(g, j) * E(g, j + 1);
    lag_one += acc / s;
  }
  model.phi = used_groups > 0 ? lag_one / (static_cast<double>(used_groups) * F) : 0.0;
  if (std::abs(model.phi) >= 1.0) {
    std::ostringstream msg;
    msg << "lag-one residual correlation " << model.phi << " clipped to +-0.99";
    model.warnings.push_back(msg.str());
    model.phi = std::copysign(0.99, model.phi);
  }
  return model;
}

Eigen::VectorXd ar1_apply(const Eigen::VectorXd& x, double phi) {
  const auto n = x.size();
  Eigen::VectorXd forward(n);
  Eigen::VectorXd backward(n);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc = x(j) + phi * acc;
    forward(j) = acc;
  }
  acc = 0.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    acc = x(j) + phi * acc;
    backward(j) = acc;
  }
  return forward + backward - x;
}

Eigen::MatrixXd sandwich_covariance(const RegressionProblem& problem, const Eigen::MatrixXd& xtx_inv,
                                    const StructuredErrorModel& errors) {
  problem.validate();
  const auto G = static_cast<Eigen::Index>(problem.n_groups);
  const auto F = static_cast<Eigen::Index>(problem.n_freqs);
  const auto p = problem.X.cols();
  if (errors.sigma_s.rows() != G || errors.sigma_s.cols() != G) {
    throw ValidationError("spatial covariance does not match the number of row groups");
  }

  // Blocks X_g laid on the full frequency grid, then (I (x) Sigma_F) applied per block.
  std::vector<Eigen::MatrixXd> blocks(static_cast<std::size_t>(G), Eigen::MatrixXd::Zero(F, p));
  for (std::size_t r = 0; r < problem.rows(); ++r) {
    blocks[problem.group[r]].row(static_cast<Eigen::Index>(problem.freq_index[r])) =
        problem.X.row(static_cast<Eigen::Index>(r));
  }
  std::vector<Eigen::MatrixXd> filtered(static_cast<std::size_t>(G), Eigen::MatrixXd(F, p));
  for (Eigen::Index g = 0; g < G; ++g) {
    for (Eigen::Index c = 0; c < p; ++c) {
      filtered[static_cast<std::size_t>(g)].col(c) = ar1_apply(blocks[static_cast<std::size_t>(g)].col(c), errors.phi);
    }
  }

  // (Sigma_S (x) I) step, then the X' contraction.
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd mixed(F, p);
  for (Eigen::Index g1 = 0; g1 < G; ++g1) {
    mixed.setZero();
    for (Eigen::Index g2 = 0; g2 < G; ++g2) {
      const double s = errors.sigma_s(g1, g2);
      if (s != 0.0) mixed.noalias() += s * filtered[static_cast<std::size_t>(g2)];
    }
    meat.noalias() += blocks[static_cast<std::size_t>(g1)].transpose() * mixed;
  }
  meat = 0.5 * (meat + meat.transpose());
  return xtx_inv * meat * xtx_inv;
}

double aic(std::size_t n, double rss, std::size_t n_coef, double total_ss) {
  if (n == 0) throw ValidationError("aic: no observations");
  const double floor = std::max(1e-20 * total_ss, 1e-300);
  const double nd = static_cast<double>(n);
  return nd * std::log(std::max(rss, floor) / nd) + 2.0 * static_cast<double>(n_coef);
}

LinearFit fit_linear(const RegressionProblem& problem) {
  problem.validate();
  LinearFit fit;
  fit.ols = ols(problem.X, problem.y);
  fit.errors = estimate_error_structure(problem, fit.ols.residuals);
  fit.covariance = sandwich_covariance(problem, fit.ols.xtx_inv, fit.errors);
  fit.se = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.n = problem.rows();
  fit.aic = aic(fit.n, fit.ols.rss, static_cast<std::size_t>(problem.X.cols()), problem.y.squaredNorm());
  return fit;
}

int aic_select(std::span<const AicEntry> trace) {
  if (trace.empty()) throw ValidationError("aic_select: empty trace");
  const AicEntry* best = &trace.front();
  for (const auto& e : trace) {
    if (e.aic < best->aic || (e.aic == best->aic && e.order < best->order)) best = &e;
  }
  return best->order;
}

Band pointwise_ci(std::span<const double> curve, std::span<const double> se) {
  if (curve.size() != se.size()) throw ValidationError("pointwise_ci: curve and SE lengths differ");
  Band band;
  band.lower.resize(curve.size());
  band.upper.resize(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    band.lower[i] = curve[i] - 2.0 * se[i];
    band.upper[i] = curve[i] + 2.0 * se[i];
  }
  return band;
}

std::vector<double> fitted_se(const Eigen::MatrixXd& design, const Eigen::MatrixXd& covariance) {
  std::vector<double> out(static_cast<std::size_t>(design.rows()));
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    const double v = design.row(r) * covariance * design.row(r).transpose();
    out[static_cast<std::size_t>(r)] = std::sqrt(std::max(v, 0.0));
  }
  return out;
}

}  // namespace covspec
