#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "covspec/error.hpp"
#include "covspec/estimate.hpp"
#include "covspec/simulate.hpp"
#include "test_support.hpp"

using namespace covspec;
using covspec::testing::vec2;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> grid(std::size_t T) { return fourier_grid(T); }

std::vector<LagGroup> groups_from(const std::vector<Eigen::VectorXd>& lags) {
  std::vector<LagGroup> out;
  for (std::size_t i = 0; i < lags.size(); ++i) out.push_back(LagGroup{lags[i], {i}, {false}});
  return out;
}

std::vector<Eigen::VectorXd> some_lags() {
  return {vec2(10, 0), vec2(0, 25), vec2(-30, 40), vec2(60, 15), vec2(-5, -80), vec2(100, -20)};
}

// Noiseless coherence table for exp(-(gamma(tau)|h|)^p) e^{i theta v'h}.
CoherencePhaseTable coherence_table(const std::vector<Eigen::VectorXd>& lags, const std::vector<double>& freqs,
                                    const SteinModel& m) {
  CoherencePhaseTable t;
  t.freqs = freqs;
  t.groups = groups_from(lags);
  const auto G = static_cast<Eigen::Index>(lags.size());
  const auto F = static_cast<Eigen::Index>(freqs.size());
  t.modulus.resize(G, F);
  t.angle.resize(G, F);
  t.valid.setConstant(G, F, true);
  for (Eigen::Index g = 0; g < G; ++g) {
    for (Eigen::Index f = 0; f < F; ++f) {
      const Complex c = eval_coherence(m, lags[static_cast<std::size_t>(g)], freqs[static_cast<std::size_t>(f)]);
      t.modulus(g, f) = std::abs(c);
      t.angle(g, f) = std::arg(c);
    }
  }
  return t;
}

PhaseTable phase_table(const std::vector<Eigen::VectorXd>& lags, const std::vector<double>& freqs,
                       const std::function<double(double)>& theta, const Eigen::VectorXd& v) {
  PhaseTable t;
  t.freqs = freqs;
  t.groups = groups_from(lags);
  const auto G = static_cast<Eigen::Index>(lags.size());
  const auto F = static_cast<Eigen::Index>(freqs.size());
  t.unwound.resize(G, F);
  t.valid.setConstant(G, F, true);
  for (Eigen::Index g = 0; g < G; ++g)
    for (Eigen::Index f = 0; f < F; ++f)
      t.unwound(g, f) = theta(freqs[static_cast<std::size_t>(f)]) * v.dot(lags[static_cast<std::size_t>(g)]);
  return t;
}

SteinModel truth_model() {
  SteinModel m;
  m.spectrum = {0.3, EvenTrigPoly({0.0, 0.5})};
  m.log_gamma = EvenTrigPoly({-4.5, -0.3});
  m.theta = OddTrigPoly({0.01});
  m.drift = vec2(1, 0);
  m.power = 1.2;
  return m;
}

}  // namespace

TEST(Mask, DropsLeadingFrequencies) {
  const auto m = low_frequency_mask(3287, 300.0 / 3287.0);
  EXPECT_EQ(std::count(m.begin(), m.end(), false), 300);
  EXPECT_FALSE(m[299]);
  EXPECT_TRUE(m[300]);
  const auto all = low_frequency_mask(10, 0.0);
  EXPECT_EQ(std::count(all.begin(), all.end(), true), 10);
  EXPECT_THROW(low_frequency_mask(10, 0.5), ValidationError);
}

TEST(KFit, NoiselessRecovery) {
  const auto f = grid(512);
  const FracExpSpectrum truth{0.315, EvenTrigPoly({-1.769, 0.710, 0.022, 0.033})};
  std::vector<double> k;
  for (double tau : f) k.push_back(eval_k(truth, tau));
  const KFit fit = fit_k_parametric(f, k, 3);
  EXPECT_NEAR(fit.beta.estimate, 0.315, 1e-10);
  const std::vector<double> c{-1.769, 0.710, 0.022, 0.033};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(fit.c[i].estimate, c[i], 1e-10);
  EXPECT_TRUE(fit.warnings.empty());
}

TEST(KFit, ZeroOrderAndWarnings) {
  const auto f = grid(256);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 0.1);
  std::vector<double> k;
  double mean_log = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    k.push_back(std::exp(0.4 + n(rng)));
    mean_log += std::log(k.back());
  }
  mean_log /= double(f.size());
  // beta = 0 truth with K1 = 0 and a mask that keeps the whole grid
  const KFit fit = fit_k_parametric(f, k, 0);
  EXPECT_NEAR(fit.c[0].estimate + fit.beta.estimate * 0.0, fit.c[0].estimate, 0);
  Eigen::MatrixXd X = k_design(f, 0);
  const Eigen::VectorXd fitted = X * fit.fit.ols.coef;
  EXPECT_NEAR(fitted.mean(), mean_log, 1e-12);

  std::vector<double> k2;
  for (double tau : f) k2.push_back(std::exp(-1.5 * std::log(std::sin(kPi * tau))));
  EXPECT_FALSE(fit_k_parametric(f, k2, 0).warnings.empty());
  k2[3] = -1.0;
  EXPECT_THROW(fit_k_parametric(f, k2, 0), ValidationError);
  std::vector<bool> none(f.size(), false);
  EXPECT_THROW(fit_k_parametric(f, k, 0, none), ValidationError);
  const std::vector<double> tiny_f{0.25, 0.5}, tiny_k{1.0, 2.0};
  EXPECT_THROW(fit_k_parametric(tiny_f, tiny_k, 3), NumericalError);
}

TEST(PGamma, NoiselessConstantGamma) {
  SteinModel m = truth_model();
  m.power = 1.0;
  m.log_gamma = EvenTrigPoly({std::log(0.01)});
  const auto tab = coherence_table(some_lags(), grid(256), m);
  const PGammaFit fit = fit_p_gamma_parametric(tab, 0);
  EXPECT_NEAR(fit.p.estimate, 1.0, 1e-10);
  EXPECT_NEAR(std::exp(fit.a[0].estimate), 0.01, 1e-10);
  EXPECT_EQ(fit.dropped, 0u);
}

TEST(PGamma, NoiselessTrigGamma) {
  SteinModel m = truth_model();
  m.log_gamma = EvenTrigPoly({-4.5, -0.3, 0.1});
  const auto tab = coherence_table(some_lags(), grid(256), m);
  const PGammaFit fit = fit_p_gamma_parametric(tab, 2, low_frequency_mask(128, 0.1));
  EXPECT_NEAR(fit.p.estimate, 1.2, 1e-10);
  EXPECT_NEAR(fit.a[0].estimate, -4.5, 1e-10);
  EXPECT_NEAR(fit.a[1].estimate, -0.3, 1e-10);
  EXPECT_NEAR(fit.a[2].estimate, 0.1, 1e-10);
  EXPECT_EQ(fit.a_covariance.rows(), 3);
}

TEST(PGamma, DeltaMethodMatchesNumericJacobian) {
  SteinModel m = truth_model();
  auto tab = coherence_table(some_lags(), grid(256), m);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 0.01);
  for (Eigen::Index i = 0; i < tab.modulus.size(); ++i) tab.modulus.data()[i] *= std::exp(n(rng));
  tab.modulus = tab.modulus.cwiseMin(0.999);
  const PGammaFit fit = fit_p_gamma_parametric(tab, 1);
  const auto& b = fit.fit.ols.coef;
  // a_k = b_{k+1} / b_0
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, 3);
  const double h = 1e-7;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd bp = b, bm = b;
    bp(c) += h;
    bm(c) -= h;
    for (int k = 0; k < 2; ++k) J(k, c) = (bp(k + 1) / bp(0) - bm(k + 1) / bm(0)) / (2 * h);
  }
  const Eigen::MatrixXd want = J * fit.fit.covariance * J.transpose();
  EXPECT_LT((want - fit.a_covariance).norm(), 1e-6 * want.norm());
  EXPECT_NEAR(fit.a[1].se, std::sqrt(want(1, 1)), 1e-6 * std::sqrt(want(1, 1)));
}

TEST(PGamma, DataQualityAbortAndDistinctLags) {
  SteinModel m = truth_model();
  auto tab = coherence_table(some_lags(), grid(64), m);
  for (Eigen::Index g = 0; g < 4; ++g) tab.modulus.row(g).setConstant(1.0);
  EXPECT_THROW(fit_p_gamma_parametric(tab, 1), ValidationError);
  EXPECT_THROW(fit_p_gamma_nonparametric(tab), ValidationError);
  for (Eigen::Index g = 0; g < 2; ++g) tab.modulus.row(g).setConstant(1.0);
  auto ok = coherence_table(some_lags(), grid(64), m);
  ok.modulus.row(0).setConstant(0.0);
  const PGammaFit fit = fit_p_gamma_parametric(ok, 1);
  EXPECT_EQ(fit.dropped, 32u);
  EXPECT_EQ(fit.candidates, 6u * 32u);
  const auto same = coherence_table({vec2(10, 0), vec2(0, 10), vec2(-10, 0)}, grid(64), m);
  EXPECT_THROW(fit_p_gamma_parametric(same, 1), ValidationError);
}

TEST(PGamma, NonparametricNoiseless) {
  SteinModel m = truth_model();
  const auto f = grid(512);
  const auto tab = coherence_table(some_lags(), f, m);
  const auto mask = low_frequency_mask(f.size(), 0.05);
  const auto np = fit_p_gamma_nonparametric(tab, mask);
  EXPECT_NEAR(np.p.estimate, 1.2, 1e-10);
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (!mask[j]) {
      EXPECT_TRUE(std::isnan(np.gamma_init[j]));
      continue;
    }
    EXPECT_NEAR(np.gamma_init[j], eval_gamma(m, f[j]), 1e-10 * eval_gamma(m, f[j]));
    EXPECT_NEAR(np.gamma_np[j], eval_gamma(m, f[j]), 0.02 * eval_gamma(m, f[j]));
  }
}

TEST(PGamma, SlopesPerFrequency) {
  SteinModel m = truth_model();
  const auto f = grid(128);
  auto tab = coherence_table(some_lags(), f, m);
  auto mask = low_frequency_mask(f.size(), 0.1);
  const auto s = fit_slopes_per_frequency(tab, mask);
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (mask[j]) {
      EXPECT_NEAR(s[j], 1.2, 1e-10);
    } else {
      EXPECT_TRUE(std::isnan(s[j]));
    }
  }
  // p varying with tau: slopes follow it
  for (Eigen::Index j = 0; j < tab.modulus.cols(); ++j) {
    const double p = 0.8 + f[static_cast<std::size_t>(j)];
    for (Eigen::Index g = 0; g < tab.modulus.rows(); ++g) {
      const double r = tab.groups[static_cast<std::size_t>(g)].lag.norm();
      tab.modulus(g, j) = std::exp(-std::pow(0.01 * r, p));
    }
  }
  const auto s2 = fit_slopes_per_frequency(tab);
  for (std::size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(s2[j], 0.8 + f[j], 1e-10);
}

TEST(Drift, NoiselessRecoveryAndInvariances) {
  const auto f = grid(256);
  const auto lags = some_lags();
  const auto theta = [](double tau) { return 0.01 * std::sin(2 * kPi * tau); };
  const DriftEstimate d = estimate_drift(phase_table(lags, f, theta, vec2(1, 0)));
  EXPECT_NEAR(d.v(0), 1.0, 1e-8);
  EXPECT_NEAR(d.v(1), 0.0, 1e-8);

  // positive scaling of the phases leaves v unchanged; negation flips the
  // reported v but not the product theta v'h
  const auto scaled = phase_table(lags, f, [&](double t) { return 3.0 * theta(t); }, vec2(1, 0));
  EXPECT_LT((estimate_drift(scaled).v - d.v).norm(), 1e-10);
  const auto neg = phase_table(lags, f, [&](double t) { return -theta(t); }, vec2(1, 0));
  const DriftEstimate dn = estimate_drift(neg);
  EXPECT_LT((dn.v + d.v).norm(), 1e-10);
  const auto th = theta_init(neg, dn.v);
  for (std::size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(th[j] * dn.v.dot(lags[0]), -theta(f[j]) * lags[0](0), 1e-12);
  EXPECT_GE(th[f.size() / 4], 0.0);

  // rotating the sites rotates v
  const double a = 0.7;
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  std::vector<Eigen::VectorXd> rot;
  for (const auto& h : lags) rot.push_back(R * h);
  const Eigen::VectorXd rv = R * Eigen::Vector2d(1, 0);
  const auto dr = estimate_drift(phase_table(rot, f, theta, rv));
  EXPECT_LT((dr.v - R * d.v).norm(), 1e-8);
}

TEST(Drift, CollinearSitesRejected) {
  const std::vector<Eigen::VectorXd> lags{vec2(10, 0), vec2(20, 0), vec2(-5, 0)};
  const auto t = phase_table(lags, grid(64), [](double x) { return x; }, vec2(1, 0));
  EXPECT_THROW(estimate_drift(t), NumericalError);
}

TEST(Drift, IncompleteFrequenciesSkipped) {
  const auto f = grid(64);
  auto t = phase_table(some_lags(), f, [](double x) { return 0.02 * std::sin(2 * kPi * x); }, vec2(0.6, 0.8));
  t.valid(2, 5) = false;
  t.unwound(2, 5) = 1e6;
  const auto d = estimate_drift(t);
  EXPECT_FALSE(d.freq_used[5]);
  EXPECT_NEAR(d.v(0), 0.6, 1e-8);
  EXPECT_TRUE(std::isnan(theta_init(t, d.v)[5]));
}

TEST(ThetaInit, ExactZeroAndOdd) {
  const auto f = grid(128);
  const auto lags = some_lags();
  const auto theta = [](double tau) { return 0.01 * std::sin(2 * kPi * tau); };
  const auto t = phase_table(lags, f, theta, vec2(1, 0));
  const auto th = theta_init(t, vec2(1, 0));
  for (std::size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(th[j], theta(f[j]), 1e-14);
  const auto zero = theta_init(phase_table(lags, f, [](double) { return 0.0; }, vec2(1, 0)), vec2(1, 0));
  for (double v : zero) EXPECT_EQ(v, 0.0);

  // extend the table oddly onto negative frequencies
  std::vector<double> sym;
  for (auto it = f.rbegin(); it != f.rend(); ++it) sym.push_back(-*it);
  sym.insert(sym.end(), f.begin(), f.end());
  const auto ts = theta_init(phase_table(lags, sym, [](double x) { return 0.3 * x + std::sin(7 * x); }, vec2(0, 1)),
                             vec2(0, 1));
  const std::size_t F = f.size();
  for (std::size_t j = 0; j < F; ++j) EXPECT_NEAR(ts[F - 1 - j], -ts[F + j], 1e-13);
}

TEST(ThetaFit, Recovery) {
  const auto f = grid(512);
  std::vector<double> th;
  for (double tau : f) th.push_back(0.02 * std::sin(2 * kPi * tau) - 0.005 * std::sin(4 * kPi * tau));
  const ThetaFit fit = fit_theta_parametric(f, th, 2);
  EXPECT_NEAR(fit.b[0].estimate, 0.02, 1e-12);
  EXPECT_NEAR(fit.b[1].estimate, -0.005, 1e-12);
  const std::vector<double> zero(f.size(), 0.0);
  const ThetaFit z = fit_theta_parametric(f, zero, 3);
  for (const auto& b : z.b) {
    EXPECT_EQ(b.estimate, 0.0);
    EXPECT_TRUE(std::isfinite(b.se));
  }
  EXPECT_THROW(fit_theta_parametric(f, th, 0), ValidationError);
  std::vector<double> gaps = th;
  gaps[10] = NAN;
  EXPECT_EQ(fit_theta_parametric(f, gaps, 2).rows.size(), f.size() - 1);
}

TEST(AicOrder, FracExpCurveWithNoise) {
  // truth K1 = 3 with noise sd 0.05 on n = 3287 frequencies
  const std::size_t T = 6574;
  const auto f = grid(T);
  const FracExpSpectrum truth{0.315, EvenTrigPoly({-1.769, 0.710, 0.022, 0.033})};
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0, 0.05);
  std::vector<int> counts(7, 0);
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> k;
    for (double tau : f) k.push_back(eval_k(truth, tau) * std::exp(n(rng)));
    std::vector<AicEntry> trace;
    for (int K = 0; K <= 6; ++K) trace.push_back({K, fit_k_parametric(f, k, K).fit.aic});
    ++counts[static_cast<std::size_t>(aic_select(trace))];
  }
  // never underfits; overfitting follows the nested-AIC rate (about 0.16 per
  // spare term), so order 3 wins in roughly 70% of replicates
  EXPECT_EQ(counts[0] + counts[1] + counts[2], 0);
  EXPECT_GE(counts[3], 55);
  RecordProperty("order3_share", counts[3]);
  std::cout << "AIC picks order 3 in " << counts[3] << " of " << reps << " replicates\n";
}

TEST(EstimateAll, SimulatedRecovery) {
  std::mt19937_64 rng(31);
  const SiteLayout l = covspec::testing::random_sites(rng, 8, 300.0);
  SteinModel m = truth_model();
  m.log_gamma = EvenTrigPoly({-6.0, -0.3});
  const auto s = sample_field(m, l, 2048, 17);
  const auto table = smooth(raw_cross_spectra(half_fft(center(s.values)), l), 65);
  EstimationConfig cfg;
  cfg.k1 = 1;
  cfg.k2 = 1;
  cfg.k3 = 1;
  const FitReport r = estimate_all(table, cfg);
  EXPECT_NEAR(r.pgamma.p.estimate, 1.2, 0.1);
  EXPECT_NEAR(r.k.beta.estimate, 0.3, 0.1);
  EXPECT_GT(r.drift.v(0), 0.99);
  EXPECT_NEAR(r.theta.b[0].estimate, 0.01, 0.003);
  EXPECT_EQ(r.curves.k_par.size(), table.n_freqs());
  EXPECT_EQ(r.curves.theta_np.size(), table.n_freqs());
  EXPECT_TRUE(r.k_aic.empty());
  EXPECT_NO_THROW(r.model.validate());
  for (std::size_t j = 0; j < table.n_freqs(); ++j) {
    EXPECT_LE(r.curves.k_par_lower[j], r.curves.k_par[j]);
    EXPECT_GE(r.curves.k_par_upper[j], r.curves.k_par[j]);
  }
  EXPECT_THROW(estimate_all(raw_cross_spectra(half_fft(center(s.values)), l), cfg), ValidationError);
}

TEST(EstimateAll, PowerRecoveryOverReplicates) {
  SteinModel m = truth_model();
  m.power = 1.5;
  m.log_gamma = EvenTrigPoly({-5.0, -0.5});
  std::mt19937_64 rng(8);
  const SiteLayout l = covspec::testing::random_sites(rng, 10, 200.0);
  std::vector<double> err;
  for (int r = 0; r < 20; ++r) {
    const auto s = sample_field(m, l, 4096, 900 + r);
    const auto tab = coherence_phase(smooth(raw_cross_spectra(half_fft(center(s.values)), l), 129));
    const auto fit = fit_p_gamma_parametric(tab, 1, low_frequency_mask(tab.n_freqs(), 300.0 / 3287.0));
    err.push_back(std::abs(fit.p.estimate - 1.5));
  }
  for (double e : err) EXPECT_LT(e, 0.1);
}

TEST(EstimateAll, ParametricApproachesNonparametricGamma) {
  SteinModel m = truth_model();
  m.log_gamma = EvenTrigPoly({-6.0, -0.3});
  std::mt19937_64 rng(12);
  const SiteLayout l = covspec::testing::random_sites(rng, 10, 300.0);
  const auto s = sample_field(m, l, 4096, 5);
  const auto tab = coherence_phase(smooth(raw_cross_spectra(half_fft(center(s.values)), l), 129));
  const auto mask = low_frequency_mask(tab.n_freqs(), 300.0 / 3287.0);
  const auto par = fit_p_gamma_parametric(tab, 8, mask);
  const auto np = fit_p_gamma_nonparametric(tab, mask);
  double worst = 0, total = 0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < tab.n_freqs(); ++j) {
    if (!mask[j]) continue;
    const double g = std::exp(par.log_gamma(tab.freqs[j]));
    const double rel = std::abs(g - np.gamma_np[j]) / np.gamma_np[j];
    worst = std::max(worst, rel);
    total += rel;
    ++n;
  }
  // the two curves part mostly at the ends of the grid
  EXPECT_LT(total / double(n), 0.05);
  EXPECT_LT(worst, 0.2);
}

TEST(EstimateAll, KCurveIntervalCoverage) {
  SteinModel m = truth_model();
  const SiteLayout one({vec2(0, 0)});
  const double truth = eval_k(m, 0.25);
  int covered = 0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const auto s = sample_field(m, one, 4096, 4000 + r);
    const auto tab = smooth(raw_cross_spectra(half_fft(center(s.values)), one), 65);
    const Eigen::VectorXd kc = tab.marginal();
    const std::vector<double> k(kc.data(), kc.data() + kc.size());
    const KFit fit = fit_k_parametric(tab.freqs, k, 1);
    const std::vector<double> at{0.25};
    const Eigen::MatrixXd X = k_design(at, 1);
    const double est = (X * fit.fit.ols.coef)(0);
    const double se = fitted_se(X, fit.fit.covariance)[0];
    covered += std::abs(est - std::log(truth)) <= 2 * se;
  }
  std::cout << "k interval covers the truth in " << covered << " of " << reps << " replicates\n";
  EXPECT_GE(covered, 43);
}
