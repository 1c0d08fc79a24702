#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covspec/kernel_smooth.hpp"
#include "covspec/model.hpp"
#include "covspec/regression.hpp"
#include "covspec/spectra.hpp"

namespace covspec {

struct Coefficient {
  double estimate = 0.0;
  double se = 0.0;
};

/// Inclusion mask that drops the first ceil(fraction * F) frequencies.
std::vector<bool> low_frequency_mask(std::size_t F, double fraction);

// ---------------------------------------------------------------------------
// Temporal spectrum k(tau)

/// Columns [1, -log sin(pi tau), cos(2 pi tau), ..., cos(2 pi K1 tau)].
Eigen::MatrixXd k_design(std::span<const double> freqs, int K1);

struct KFit {
  FracExpSpectrum spectrum;
  Coefficient beta;
  std::vector<Coefficient> c;  // c_0..c_K1
  LinearFit fit;
  std::vector<std::size_t> rows;  // frequency index of each regression row
  std::vector<std::string> warnings;
};

/// OLS of log k on the fractional exponential design. An empty mask keeps
/// every frequency. Warns if beta falls outside [0, 1).
KFit fit_k_parametric(std::span<const double> freqs, std::span<const double> kcurve, int K1,
                      const std::vector<bool>& mask = {});

// ---------------------------------------------------------------------------
// Coherence decay: p and gamma(tau)

struct PGammaFit {
  Coefficient p;
  std::vector<Coefficient> a;  // a_0..a_K2
  Eigen::MatrixXd a_covariance;
  EvenTrigPoly log_gamma;
  LinearFit fit;
  std::size_t candidates = 0;  // valid, unmasked entries
  std::size_t dropped = 0;     // of those, outside (eps, 1 - eps)
  std::vector<std::size_t> row_group;  // lag class of each regression row
  std::vector<std::size_t> row_freq;   // frequency index of each regression row
};

/// Regresses log(-log D) on [log|h|, cos(2 pi k tau)]; the log|h| slope is p
/// and a_k = coefficient_k / p with delta-method standard errors. Rows are
/// grouped by lag class for the structured errors. Throws ValidationError
/// when more than half the candidate entries fall outside (eps, 1 - eps).
PGammaFit fit_p_gamma_parametric(const CoherencePhaseTable& table, int K2, const std::vector<bool>& mask = {},
                                 double eps = 1e-6);

struct PGammaNonparametric {
  Coefficient p;
  std::vector<double> intercept;   // p log gamma_init(tau), NaN where masked
  std::vector<double> gamma_init;  // NaN where masked
  std::vector<double> gamma_np;    // smoothed gamma_init on the full grid
  double bandwidth = 0.0;
  std::size_t candidates = 0;
  std::size_t dropped = 0;
};

/// Parallel-lines fit (one intercept per frequency, common slope p), then
/// kernel smoothing of gamma_init = exp(intercept / p) over tau.
PGammaNonparametric fit_p_gamma_nonparametric(const CoherencePhaseTable& table, const std::vector<bool>& mask = {},
                                              const KernelSmoothOptions& smoother = {}, double eps = 1e-6);

/// Per-frequency OLS slope of log(-log D) on log|h|; NaN where fewer than two
/// distinct |h| are usable or the frequency is masked.
std::vector<double> fit_slopes_per_frequency(const CoherencePhaseTable& table, const std::vector<bool>& mask = {},
                                             double eps = 1e-6);

// ---------------------------------------------------------------------------
// Drift direction and phase function theta(tau)

struct DriftEstimate {
  Eigen::VectorXd v;
  Eigen::MatrixXd A;  // sum_h h h'
  Eigen::MatrixXd B;  // sum_tau beta(tau) beta(tau)'
  double eigenvalue = 0.0;
  std::vector<bool> freq_used;
};

/// Top generalized eigenvector of (B, A), i.e. of A^{-1} B, scaled to unit
/// length. Its sign makes the mean of theta_init over the first half of the
/// grid nonnegative. Frequencies where any lag class is invalid are skipped.
/// Throws NumericalError when A is singular (collinear stations).
DriftEstimate estimate_drift(const PhaseTable& phase);

/// theta_init(tau) = v' sum_h g_R(h, tau) h / v'Av; NaN on skipped frequencies.
std::vector<double> theta_init(const PhaseTable& phase, const Eigen::VectorXd& v);

struct ThetaFit {
  OddTrigPoly theta;
  std::vector<Coefficient> b;  // b_1..b_K3
  LinearFit fit;
  std::vector<std::size_t> rows;
};

/// OLS of theta_init on sin(2 pi k tau), k = 1..K3, without intercept.
/// Non-finite theta_init entries are skipped.
ThetaFit fit_theta_parametric(std::span<const double> freqs, std::span<const double> theta_init, int K3,
                              const std::vector<bool>& mask = {});

// ---------------------------------------------------------------------------
// Full estimation

struct EstimationConfig {
  std::optional<int> k1;  // nullopt selects by AIC
  std::optional<int> k2;
  std::optional<int> k3;
  int k1_max = 6;
  int k2_max = 6;
  int k3_max = 6;
  double mask_fraction = 300.0 / 3287.0;  // low frequencies left out of the p/gamma fit
  double coherence_eps = 1e-6;
  bool nonparametric = true;
  KernelSmoothOptions smoother;
};

struct FittedCurves {
  std::vector<double> k_smoothed, k_par, k_par_lower, k_par_upper, k_np;
  std::vector<double> gamma_init, gamma_par, gamma_par_lower, gamma_par_upper, gamma_np;
  std::vector<double> slope_p;
  std::vector<double> theta_init, theta_par, theta_par_lower, theta_par_upper, theta_np;
};

struct FitReport {
  std::size_t T = 0;
  std::size_t n_sites = 0;
  std::size_t n_groups = 0;
  int span = 0;
  std::size_t mask_count = 0;
  std::vector<double> freqs;

  KFit k;
  std::vector<AicEntry> k_aic;
  PGammaFit pgamma;
  std::vector<AicEntry> pgamma_aic;
  std::optional<PGammaNonparametric> pgamma_np;
  DriftEstimate drift;
  ThetaFit theta;
  std::vector<AicEntry> theta_aic;
  double k_np_bandwidth = 0.0;
  double theta_np_bandwidth = 0.0;

  FittedCurves curves;
  SteinModel model;
  std::vector<std::string> warnings;
};

/// Runs every estimator on a smoothed table. Orders left unset in the
/// config are chosen by AIC (k and gamma over 0..max, theta over 1..max).
FitReport estimate_all(const CrossSpectraTable& smoothed, const EstimationConfig& config = {});

}  // namespace covspec
