#include "covspec/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "covspec/error.hpp"
#include "covspec/trig.hpp"

namespace covspec {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool included(const std::vector<bool>& mask, std::size_t f) { return mask.empty() || mask.at(f); }

void check_mask(const std::vector<bool>& mask, std::size_t F) {
  if (!mask.empty() && mask.size() != F) throw ValidationError("frequency mask length does not match the grid");
}

// y = log(-log D) if D in (eps, 1 - eps).
std::optional<double> loglog(double d, double eps) {
  if (!(d > eps && d < 1.0 - eps)) return std::nullopt;
  return std::log(-std::log(d));
}

}  // namespace

std::vector<bool> low_frequency_mask(std::size_t F, double fraction) {
  if (!(fraction >= 0.0 && fraction < 0.5)) throw ValidationError("mask fraction must lie in [0, 0.5)");
  const auto drop = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(F) - 1e-9));
  std::vector<bool> mask(F, true);
  for (std::size_t f = 0; f < std::min(drop, F); ++f) mask[f] = false;
  return mask;
}

Eigen::MatrixXd k_design(std::span<const double> freqs, int K1) {
  if (K1 < 0) throw ValidationError("K1 must be nonnegative");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(freqs.size()), K1 + 2);
  for (std::size_t r = 0; r < freqs.size(); ++r) {
    const double tau = freqs[r];
    if (!(tau > 0.0 && tau <= 0.5)) throw ValidationError("k regression frequency outside (0, 1/2]");
    const auto row = static_cast<Eigen::Index>(r);
    X(row, 0) = 1.0;
    X(row, 1) = -std::log(std::sin(std::numbers::pi * tau));
    for (int k = 1; k <= K1; ++k) X(row, k + 1) = cos_2pi(k * tau);
  }
  return X;
}

KFit fit_k_parametric(std::span<const double> freqs, std::span<const double> kcurve, int K1,
                      const std::vector<bool>& mask) {
  if (freqs.size() != kcurve.size()) throw ValidationError("fit_k_parametric: grid and curve lengths differ");
  check_mask(mask, freqs.size());
  KFit out;
  std::vector<double> taus;
  std::vector<double> logs;
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    if (!included(mask, f)) continue;
    if (!(kcurve[f] > 0.0) || !std::isfinite(kcurve[f])) {
      throw ValidationError("fit_k_parametric: spectrum must be strictly positive on the mask");
    }
    taus.push_back(freqs[f]);
    logs.push_back(std::log(kcurve[f]));
    out.rows.push_back(f);
  }
  if (taus.empty()) throw ValidationError("fit_k_parametric: mask is empty");

  RegressionProblem problem;
  problem.X = k_design(taus, K1);
  problem.y = Eigen::Map<const Eigen::VectorXd>(logs.data(), static_cast<Eigen::Index>(logs.size()));
  problem.group.assign(taus.size(), 0);
  problem.freq_index = out.rows;
  problem.n_groups = 1;
  problem.n_freqs = freqs.size();
  out.fit = fit_linear(problem);

  const auto& b = out.fit.ols.coef;
  const auto& se = out.fit.se;
  out.beta = {b(1), se(1)};
  out.c.push_back({b(0), se(0)});
  for (int k = 1; k <= K1; ++k) out.c.push_back({b(k + 1), se(k + 1)});

  std::vector<double> c(out.c.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = out.c[k].estimate;
  out.spectrum.beta = out.beta.estimate;
  out.spectrum.cosine_part = EvenTrigPoly(c);
  if (!(out.beta.estimate >= 0.0 && out.beta.estimate < 1.0)) {
    std::ostringstream msg;
    msg << "estimated beta = " << out.beta.estimate << " lies outside [0, 1)";
    out.warnings.push_back(msg.str());
  }
  for (const auto& w : out.fit.errors.warnings) out.warnings.push_back("k fit: " + w);
  return out;
}

PGammaFit fit_p_gamma_parametric(const CoherencePhaseTable& table, int K2, const std::vector<bool>& mask,
                                 double eps) {
  if (K2 < 0) throw ValidationError("K2 must be nonnegative");
  const std::size_t F = table.n_freqs();
  const std::size_t G = table.n_groups();
  check_mask(mask, F);

  std::vector<std::size_t> groups;
  std::vector<std::size_t> freqs;
  std::vector<double> ys;
  std::set<double> radii;
  PGammaFit out;
  for (std::size_t g = 0; g < G; ++g) {
    const double r = table.groups[g].lag.norm();
    if (!(r > 0.0)) throw ValidationError("fit_p_gamma: zero lag in coherence table");
    for (std::size_t f = 0; f < F; ++f) {
      if (!included(mask, f) || !table.valid(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f))) continue;
      ++out.candidates;
      const auto y = loglog(table.modulus(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f)), eps);
      if (!y) {
        ++out.dropped;
        continue;
      }
      groups.push_back(g);
      freqs.push_back(f);
      ys.push_back(*y);
      radii.insert(r);
    }
  }
  if (out.candidates == 0) throw ValidationError("fit_p_gamma: no coherence entries survive the mask");
  if (2 * out.dropped > out.candidates) {
    std::ostringstream msg;
    msg << "fit_p_gamma: data quality too poor, " << out.dropped << " of " << out.candidates
        << " coherence entries fall outside (eps, 1 - eps)";
    throw ValidationError(msg.str());
  }
  if (radii.size() < 2) throw ValidationError("fit_p_gamma: need at least two distinct lag distances");

  RegressionProblem problem;
  const auto n = static_cast<Eigen::Index>(ys.size());
  problem.X.resize(n, K2 + 2);
  problem.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto g = groups[static_cast<std::size_t>(r)];
    const double tau = table.freqs[freqs[static_cast<std::size_t>(r)]];
    problem.X(r, 0) = std::log(table.groups[g].lag.norm());
    for (int k = 0; k <= K2; ++k) problem.X(r, k + 1) = cos_2pi(k * tau);
    problem.y(r) = ys[static_cast<std::size_t>(r)];
  }
  problem.group = groups;
  problem.freq_index = freqs;
  problem.n_groups = G;
  problem.n_freqs = F;
  out.fit = fit_linear(problem);
  out.row_group = std::move(groups);
  out.row_freq = std::move(freqs);

  const auto& coef = out.fit.ols.coef;
  const double p = coef(0);
  if (!(std::abs(p) > 0.0)) throw NumericalError("fit_p_gamma: estimated slope p is zero");
  out.p = {p, out.fit.se(0)};

  // a_k = coef_{k+1} / p; Jacobian rows (-coef_{k+1}/p^2 at p, 1/p at coef_{k+1}).
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(K2 + 1, K2 + 2);
  std::vector<double> a(static_cast<std::size_t>(K2 + 1));
  for (int k = 0; k <= K2; ++k) {
    a[static_cast<std::size_t>(k)] = coef(k + 1) / p;
    jac(k, 0) = -coef(k + 1) / (p * p);
    jac(k, k + 1) = 1.0 / p;
  }
  out.a_covariance = jac * out.fit.covariance * jac.transpose();
  for (int k = 0; k <= K2; ++k) {
    out.a.push_back({a[static_cast<std::size_t>(k)], std::sqrt(std::max(out.a_covariance(k, k), 0.0))});
  }
  out.log_gamma = EvenTrigPoly(a);
  return out;
}

PGammaNonparametric fit_p_gamma_nonparametric(const CoherencePhaseTable& table, const std::vector<bool>& mask,
                                              const KernelSmoothOptions& smoother, double eps) {
  const std::size_t F = table.n_freqs();
  const std::size_t G = table.n_groups();
  check_mask(mask, F);
  PGammaNonparametric out;

  struct Row {
    std::size_t g, f;
    double x, y;
  };
  std::vector<Row> rows;
  std::set<double> radii;
  for (std::size_t g = 0; g < G; ++g) {
    const double r = table.groups[g].lag.norm();
    for (std::size_t f = 0; f < F; ++f) {
      if (!included(mask, f) || !table.valid(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f))) continue;
      ++out.candidates;
      const auto y = loglog(table.modulus(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f)), eps);
      if (!y) {
        ++out.dropped;
        continue;
      }
      rows.push_back({g, f, std::log(r), *y});
      radii.insert(r);
    }
  }
  if (out.candidates == 0) throw ValidationError("fit_p_gamma: no coherence entries survive the mask");
  if (2 * out.dropped > out.candidates) {
    std::ostringstream msg;
    msg << "fit_p_gamma: data quality too poor, " << out.dropped << " of " << out.candidates
        << " coherence entries fall outside (eps, 1 - eps)";
    throw ValidationError(msg.str());
  }
  if (radii.size() < 2) throw ValidationError("fit_p_gamma: need at least two distinct lag distances");

  // Within-frequency demeaning gives the common slope without F dummy columns.
  std::vector<double> sx(F, 0.0), sy(F, 0.0);
  std::vector<std::size_t> cnt(F, 0);
  for (const auto& r : rows) {
    sx[r.f] += r.x;
    sy[r.f] += r.y;
    ++cnt[r.f];
  }
  RegressionProblem problem;
  const auto n = static_cast<Eigen::Index>(rows.size());
  problem.X.resize(n, 1);
  problem.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const double m = static_cast<double>(cnt[r.f]);
    problem.X(i, 0) = r.x - sx[r.f] / m;
    problem.y(i) = r.y - sy[r.f] / m;
    problem.group.push_back(r.g);
    problem.freq_index.push_back(r.f);
  }
  problem.n_groups = G;
  problem.n_freqs = F;
  const LinearFit fit = fit_linear(problem);
  const double p = fit.ols.coef(0);
  out.p = {p, fit.se(0)};

  out.intercept.assign(F, kNaN);
  out.gamma_init.assign(F, kNaN);
  std::vector<double> known_tau, known_icpt;
  for (std::size_t f = 0; f < F; ++f) {
    if (cnt[f] == 0) continue;
    const double m = static_cast<double>(cnt[f]);
    out.intercept[f] = sy[f] / m - p * sx[f] / m;
    known_tau.push_back(table.freqs[f]);
    known_icpt.push_back(out.intercept[f]);
  }
  if (known_tau.size() < 2) throw ValidationError("fit_p_gamma: fewer than two usable frequencies");
  // Interpolate intercepts at masked-in frequencies that lost all their rows.
  for (std::size_t f = 0; f < F; ++f) {
    if (!included(mask, f) || cnt[f] != 0) continue;
    const double tau = table.freqs[f];
    const auto it = std::lower_bound(known_tau.begin(), known_tau.end(), tau);
    std::size_t hi = static_cast<std::size_t>(it - known_tau.begin());
    if (hi == 0) hi = 1;
    if (hi >= known_tau.size()) hi = known_tau.size() - 1;
    const std::size_t lo = hi - 1;
    const double w = (tau - known_tau[lo]) / (known_tau[hi] - known_tau[lo]);
    out.intercept[f] = known_icpt[lo] + w * (known_icpt[hi] - known_icpt[lo]);
  }
  std::vector<double> xs, ys;
  for (std::size_t f = 0; f < F; ++f) {
    if (!std::isfinite(out.intercept[f])) continue;
    out.gamma_init[f] = std::exp(out.intercept[f] / p);
    xs.push_back(table.freqs[f]);
    ys.push_back(out.gamma_init[f]);
  }
  const NonparametricFit smooth_fit = fit_nonparametric(xs, ys, smoother);
  out.bandwidth = smooth_fit.bandwidth;
  out.gamma_np = kernel_regression(xs, ys, table.freqs, smooth_fit.bandwidth, smoother.degree);
  return out;
}

std::vector<double> fit_slopes_per_frequency(const CoherencePhaseTable& table, const std::vector<bool>& mask,
                                             double eps) {
  const std::size_t F = table.n_freqs();
  check_mask(mask, F);
  std::vector<double> slopes(F, kNaN);
  for (std::size_t f = 0; f < F; ++f) {
    if (!included(mask, f)) continue;
    std::vector<double> xs, ys;
    std::set<double> distinct;
    for (std::size_t g = 0; g < table.n_groups(); ++g) {
      if (!table.valid(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f))) continue;
      const auto y = loglog(table.modulus(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f)), eps);
      if (!y) continue;
      xs.push_back(std::log(table.groups[g].lag.norm()));
      ys.push_back(*y);
      distinct.insert(xs.back());
    }
    if (distinct.size() < 2) continue;
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    slopes[f] = sxy / sxx;
  }
  return slopes;
}

namespace {

// Frequencies at which every lag class carries a valid phase.
std::vector<bool> complete_frequencies(const PhaseTable& phase) {
  std::vector<bool> used(phase.n_freqs(), true);
  for (std::size_t f = 0; f < phase.n_freqs(); ++f) {
    for (std::size_t g = 0; g < phase.n_groups(); ++g) {
      const auto gi = static_cast<Eigen::Index>(g);
      const auto fi = static_cast<Eigen::Index>(f);
      if (!phase.valid(gi, fi) || !std::isfinite(phase.unwound(gi, fi))) {
        used[f] = false;
        break;
      }
    }
  }
  return used;
}

Eigen::VectorXd phase_moment(const PhaseTable& phase, std::size_t f) {
  const auto d = phase.groups.front().lag.size();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  for (std::size_t g = 0; g < phase.n_groups(); ++g) {
    beta += phase.unwound(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f)) * phase.groups[g].lag;
  }
  return beta;
}

Eigen::MatrixXd lag_gram(const PhaseTable& phase) {
  const auto d = phase.groups.front().lag.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (const auto& g : phase.groups) A += g.lag * g.lag.transpose();
  return A;
}

double first_half_mean(const std::vector<double>& curve) {
  const std::size_t half = std::max<std::size_t>(curve.size() / 2, 1);
  double sum = 0.0;
  for (std::size_t f = 0; f < std::min(half, curve.size()); ++f) {
    if (std::isfinite(curve[f])) sum += curve[f];
  }
  return sum / static_cast<double>(half);
}

}  // namespace

DriftEstimate estimate_drift(const PhaseTable& phase) {
  if (phase.n_groups() == 0) throw ValidationError("estimate_drift: phase table has no lag classes");
  DriftEstimate out;
  out.A = lag_gram(phase);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> a_eig(out.A);
  const double a_max = a_eig.eigenvalues().maxCoeff();
  if (!(a_max > 0.0) || a_eig.eigenvalues().minCoeff() <= 1e-10 * a_max) {
    throw NumericalError("estimate_drift: lag Gram matrix is singular (collinear station layout)");
  }
  out.freq_used = complete_frequencies(phase);
  const auto d = out.A.rows();
  out.B = Eigen::MatrixXd::Zero(d, d);
  std::size_t used = 0;
  for (std::size_t f = 0; f < phase.n_freqs(); ++f) {
    if (!out.freq_used[f]) continue;
    const Eigen::VectorXd beta = phase_moment(phase, f);
    out.B += beta * beta.transpose();
    ++used;
  }
  if (used == 0) throw ValidationError("estimate_drift: no frequency has a complete set of valid phases");

  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(out.B, out.A);
  if (solver.info() != Eigen::Success) throw NumericalError("estimate_drift: eigen solver failed");
  Eigen::Index top = 0;
  out.eigenvalue = solver.eigenvalues().maxCoeff(&top);
  out.v = solver.eigenvectors().col(top);
  const double norm = out.v.norm();
  if (!(norm > 0.0)) throw NumericalError("estimate_drift: degenerate eigenvector");
  out.v /= norm;

  const double m = first_half_mean(theta_init(phase, out.v));
  bool flip = m < 0.0;
  if (m == 0.0) {
    for (Eigen::Index i = 0; i < out.v.size(); ++i) {
      if (out.v(i) != 0.0) {
        flip = out.v(i) < 0.0;
        break;
      }
    }
  }
  if (flip) out.v = -out.v;
  return out;
}

std::vector<double> theta_init(const PhaseTable& phase, const Eigen::VectorXd& v) {
  if (phase.n_groups() == 0) throw ValidationError("theta_init: phase table has no lag classes");
  if (v.size() != phase.groups.front().lag.size()) throw ValidationError("theta_init: drift dimension mismatch");
  const double denom = v.dot(lag_gram(phase) * v);
  if (!(denom > 0.0)) throw NumericalError("theta_init: v'Av is not positive");
  const auto used = complete_frequencies(phase);
  std::vector<double> out(phase.n_freqs(), kNaN);
  for (std::size_t f = 0; f < phase.n_freqs(); ++f) {
    if (used[f]) out[f] = v.dot(phase_moment(phase, f)) / denom;
  }
  return out;
}

ThetaFit fit_theta_parametric(std::span<const double> freqs, std::span<const double> theta_init, int K3,
                              const std::vector<bool>& mask) {
  if (K3 < 1) throw ValidationError("K3 must be at least 1");
  if (freqs.size() != theta_init.size()) throw ValidationError("fit_theta: grid and curve lengths differ");
  check_mask(mask, freqs.size());
  ThetaFit out;
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    if (included(mask, f) && std::isfinite(theta_init[f])) out.rows.push_back(f);
  }
  if (out.rows.empty()) throw ValidationError("fit_theta: no usable frequencies");
  RegressionProblem problem;
  const auto n = static_cast<Eigen::Index>(out.rows.size());
  problem.X.resize(n, K3);
  problem.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto f = out.rows[static_cast<std::size_t>(r)];
    for (int k = 1; k <= K3; ++k) problem.X(r, k - 1) = sin_2pi(k * freqs[f]);
    problem.y(r) = theta_init[f];
  }
  problem.group.assign(out.rows.size(), 0);
  problem.freq_index = out.rows;
  problem.n_groups = 1;
  problem.n_freqs = freqs.size();
  out.fit = fit_linear(problem);
  std::vector<double> b(static_cast<std::size_t>(K3));
  for (int k = 0; k < K3; ++k) {
    b[static_cast<std::size_t>(k)] = out.fit.ols.coef(k);
    out.b.push_back({out.fit.ols.coef(k), out.fit.se(k)});
  }
  out.theta = OddTrigPoly(b);
  return out;
}

namespace {

Eigen::MatrixXd cosine_design(std::span<const double> freqs, int K) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(freqs.size()), K + 1);
  for (std::size_t r = 0; r < freqs.size(); ++r) {
    for (int k = 0; k <= K; ++k) X(static_cast<Eigen::Index>(r), k) = cos_2pi(k * freqs[r]);
  }
  return X;
}

Eigen::MatrixXd sine_design(std::span<const double> freqs, int K) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(freqs.size()), K);
  for (std::size_t r = 0; r < freqs.size(); ++r) {
    for (int k = 1; k <= K; ++k) X(static_cast<Eigen::Index>(r), k - 1) = sin_2pi(k * freqs[r]);
  }
  return X;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Kernel smooth of the finite entries of a curve, evaluated on the full grid.
NonparametricFit smooth_finite(std::span<const double> freqs, std::span<const double> curve,
                               const KernelSmoothOptions& opts) {
  std::vector<double> xs, ys;
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    if (std::isfinite(curve[f])) {
      xs.push_back(freqs[f]);
      ys.push_back(curve[f]);
    }
  }
  if (xs.size() < 2) return {std::vector<double>(freqs.size(), kNaN), 0.0};
  const NonparametricFit fit = fit_nonparametric(xs, ys, opts);
  return {kernel_regression(xs, ys, freqs, fit.bandwidth, opts.degree), fit.bandwidth};
}

template <class Fit>
std::vector<AicEntry> aic_trace(int lo, int hi, Fit&& fit) {
  std::vector<AicEntry> trace;
  for (int order = lo; order <= hi; ++order) {
    try {
      trace.push_back({order, fit(order)});
    } catch (const NumericalError&) {
      // rank deficient at this order; skip it
    }
  }
  if (trace.empty()) throw NumericalError("AIC search: every candidate order is rank deficient");
  return trace;
}

}  // namespace

FitReport estimate_all(const CrossSpectraTable& smoothed, const EstimationConfig& config) {
  if (!smoothed.smoothed()) throw ValidationError("estimate_all: table must be smoothed with span >= 3");
  if (config.k1_max < 0 || config.k2_max < 0 || config.k3_max < 1) {
    throw ValidationError("estimate_all: order bounds out of range");
  }
  FitReport rep;
  rep.T = smoothed.T;
  rep.n_sites = smoothed.n_sites();
  rep.span = smoothed.span;
  rep.freqs = smoothed.freqs;
  const std::size_t F = rep.freqs.size();
  const auto& freqs = rep.freqs;

  // k(tau)
  const std::vector<double> k_smoothed = to_vector(smoothed.marginal());
  rep.curves.k_smoothed = k_smoothed;
  const int k1 = config.k1 ? *config.k1 : [&] {
    rep.k_aic = aic_trace(0, config.k1_max, [&](int K) { return fit_k_parametric(freqs, k_smoothed, K).fit.aic; });
    return aic_select(rep.k_aic);
  }();
  rep.k = fit_k_parametric(freqs, k_smoothed, k1);
  for (const auto& w : rep.k.warnings) rep.warnings.push_back(w);
  {
    const Eigen::MatrixXd X = k_design(freqs, k1);
    const Eigen::VectorXd logk = X * rep.k.fit.ols.coef;
    const auto se = fitted_se(X, rep.k.fit.covariance);
    const auto band = pointwise_ci(to_vector(logk), se);
    for (std::size_t f = 0; f < F; ++f) {
      rep.curves.k_par.push_back(std::exp(logk(static_cast<Eigen::Index>(f))));
      rep.curves.k_par_lower.push_back(std::exp(band.lower[f]));
      rep.curves.k_par_upper.push_back(std::exp(band.upper[f]));
    }
  }

  // p and gamma(tau)
  const CoherencePhaseTable coh = coherence_phase(smoothed);
  rep.n_groups = coh.n_groups();
  const auto mask = low_frequency_mask(F, config.mask_fraction);
  rep.mask_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), false));
  const int k2 = config.k2 ? *config.k2 : [&] {
    rep.pgamma_aic = aic_trace(0, config.k2_max, [&](int K) {
      return fit_p_gamma_parametric(coh, K, mask, config.coherence_eps).fit.aic;
    });
    return aic_select(rep.pgamma_aic);
  }();
  rep.pgamma = fit_p_gamma_parametric(coh, k2, mask, config.coherence_eps);
  {
    const Eigen::MatrixXd X = cosine_design(freqs, k2);
    Eigen::VectorXd a(k2 + 1);
    for (int k = 0; k <= k2; ++k) a(k) = rep.pgamma.a[static_cast<std::size_t>(k)].estimate;
    const Eigen::VectorXd lg = X * a;
    const auto se = fitted_se(X, rep.pgamma.a_covariance);
    const auto band = pointwise_ci(to_vector(lg), se);
    for (std::size_t f = 0; f < F; ++f) {
      rep.curves.gamma_par.push_back(std::exp(lg(static_cast<Eigen::Index>(f))));
      rep.curves.gamma_par_lower.push_back(std::exp(band.lower[f]));
      rep.curves.gamma_par_upper.push_back(std::exp(band.upper[f]));
    }
  }
  rep.curves.slope_p = fit_slopes_per_frequency(coh, mask, config.coherence_eps);
  if (rep.pgamma.dropped > 0) {
    std::ostringstream msg;
    msg << rep.pgamma.dropped << " of " << rep.pgamma.candidates
        << " coherence entries fell outside (eps, 1 - eps) and were dropped";
    rep.warnings.push_back(msg.str());
  }
  for (const auto& w : rep.pgamma.fit.errors.warnings) rep.warnings.push_back("p/gamma fit: " + w);

  // drift and theta(tau)
  const PhaseTable phase = unwind(coh);
  for (const auto& w : phase.warnings) rep.warnings.push_back(w);
  rep.drift = estimate_drift(phase);
  rep.curves.theta_init = theta_init(phase, rep.drift.v);
  const int k3 = config.k3 ? *config.k3 : [&] {
    rep.theta_aic = aic_trace(1, config.k3_max, [&](int K) {
      return fit_theta_parametric(freqs, rep.curves.theta_init, K).fit.aic;
    });
    return aic_select(rep.theta_aic);
  }();
  rep.theta = fit_theta_parametric(freqs, rep.curves.theta_init, k3);
  for (const auto& w : rep.theta.fit.errors.warnings) rep.warnings.push_back("theta fit: " + w);
  {
    const Eigen::MatrixXd X = sine_design(freqs, k3);
    const Eigen::VectorXd th = X * rep.theta.fit.ols.coef;
    rep.curves.theta_par = to_vector(th);
    const auto band = pointwise_ci(rep.curves.theta_par, fitted_se(X, rep.theta.fit.covariance));
    rep.curves.theta_par_lower = band.lower;
    rep.curves.theta_par_upper = band.upper;
  }

  if (config.nonparametric) {
    std::vector<double> logk(F);
    for (std::size_t f = 0; f < F; ++f) logk[f] = std::log(k_smoothed[f]);
    const auto knp = smooth_finite(freqs, logk, config.smoother);
    rep.k_np_bandwidth = knp.bandwidth;
    for (double v : knp.curve) rep.curves.k_np.push_back(std::exp(v));

    rep.pgamma_np = fit_p_gamma_nonparametric(coh, mask, config.smoother, config.coherence_eps);
    rep.curves.gamma_init = rep.pgamma_np->gamma_init;
    rep.curves.gamma_np = rep.pgamma_np->gamma_np;

    const auto tnp = smooth_finite(freqs, rep.curves.theta_init, config.smoother);
    rep.theta_np_bandwidth = tnp.bandwidth;
    rep.curves.theta_np = tnp.curve;
  }

  rep.model.spectrum = rep.k.spectrum;
  rep.model.log_gamma = rep.pgamma.log_gamma;
  rep.model.theta = rep.theta.theta;
  rep.model.drift = rep.drift.v;
  rep.model.power = rep.pgamma.p.estimate;
  if (!(rep.model.power > 0.0 && rep.model.power <= 2.0)) {
    std::ostringstream msg;
    msg << "estimated p = " << rep.model.power << " clamped into (0, 2] for the fitted model";
    rep.warnings.push_back(msg.str());
    rep.model.power = std::clamp(rep.model.power, 1e-3, 2.0);
  }
  if (!(rep.model.spectrum.beta >= 0.0 && rep.model.spectrum.beta < 1.0)) {
    rep.model.spectrum.beta = std::clamp(rep.model.spectrum.beta, 0.0, 0.999);
  }
  return rep;
}

}  // namespace covspec
