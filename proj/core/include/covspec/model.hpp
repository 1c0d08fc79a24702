#pragma once

#include <complex>
#include <concepts>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covspec/trig.hpp"

namespace covspec {

using Complex = std::complex<double>;

/// Fractional exponential temporal spectrum
///   log k(tau) = -beta log sin(pi |tau|) + sum_k c_k cos(2 pi k tau).
/// beta in [0, 1) keeps k integrable; beta > 0 puts a pole at tau = 0.
struct FracExpSpectrum {
  double beta = 0.0;
  EvenTrigPoly cosine_part;

  void validate() const;
};

/// Stein's covariance-spectral model
///   H(h, tau) = k(tau) exp(-(gamma(tau) |h|)^p) exp(i theta(tau) v'h)
/// with log gamma an even trig polynomial and theta an odd one.
struct SteinModel {
  FracExpSpectrum spectrum;
  EvenTrigPoly log_gamma;
  OddTrigPoly theta;
  Eigen::VectorXd drift;
  double power = 1.0;

  /// Throws ValidationError unless |v| = 1, 0 < p <= 2 and beta in [0, 1).
  void validate() const;
  int dim() const { return static_cast<int>(drift.size()); }

  Complex H(const Eigen::VectorXd& lag, double tau) const;
};

/// Temporal frozen field H(h, tau) = k(tau) exp(i * scale * tau * v'h).
/// The coherence has unit modulus at every lag, which puts it outside the
/// exp(-|h|^p) family; it exists as a reference evaluator.
struct FrozenField {
  FracExpSpectrum spectrum;
  Eigen::VectorXd drift;
  double scale = 1.0;

  int dim() const { return static_cast<int>(drift.size()); }
  Complex coherence(const Eigen::VectorXd& lag, double tau) const;
  Complex H(const Eigen::VectorXd& lag, double tau) const;
};

/// Anything that evaluates a covariance-spectral function at (lag, tau).
template <class M>
concept CovarianceSpectral = requires(const M& m, const Eigen::VectorXd& h, double tau) {
  { m.H(h, tau) } -> std::convertible_to<Complex>;
  { m.dim() } -> std::convertible_to<int>;
};

/// Planar station coordinates (km) and the lags they induce.
class SiteLayout {
 public:
  SiteLayout() = default;
  /// Sites must share a dimension, be finite and pairwise distinct.
  explicit SiteLayout(std::vector<Eigen::VectorXd> sites, std::vector<std::string> ids = {});

  std::size_t size() const { return sites_.size(); }
  int dim() const { return sites_.empty() ? 0 : static_cast<int>(sites_.front().size()); }
  const Eigen::VectorXd& site(std::size_t i) const { return sites_.at(i); }
  const std::vector<Eigen::VectorXd>& sites() const { return sites_; }
  const std::vector<std::string>& ids() const { return ids_; }

  Eigen::VectorXd lag(std::size_t i, std::size_t j) const { return sites_.at(i) - sites_.at(j); }
  /// All S*S ordered lags s_i - s_j, including the S zero lags.
  std::vector<Eigen::VectorXd> lags() const;

 private:
  std::vector<Eigen::VectorXd> sites_;
  std::vector<std::string> ids_;
};

// Evaluators. Frequencies are in cycles per time step. k and H accept
// 0 < |tau| <= 1/2; gamma and theta accept |tau| <= 1/2.
double eval_k(const FracExpSpectrum& spectrum, double tau);
double eval_k(const SteinModel& model, double tau);
double eval_gamma(const SteinModel& model, double tau);
double eval_theta(const SteinModel& model, double tau);
Complex eval_coherence(const SteinModel& model, const Eigen::VectorXd& lag, double tau);
Complex eval_H(const SteinModel& model, const Eigen::VectorXd& lag, double tau);

/// Space-time covariance C(h, u) by Fourier synthesis of H over the grid
/// {j/F}, with the tau = 0 term carrying no power. Requires F >= 2|u| + 2.
/// Throws NumericalError if the synthesized value has a relative imaginary
/// residue above 1e-8.
template <CovarianceSpectral M>
double eval_covariance(const M& model, const Eigen::VectorXd& lag, long u, long grid_size);

double eval_covariance(const SteinModel& model, const Eigen::VectorXd& lag, long u, long grid_size);

/// Spatial factor of a separable model: C_S(h) = exp(-(decay |h|)^p).
struct SpatialPowerExponential {
  double power = 1.0;
  double decay = 1.0;
};

/// theta = 0 and gamma = decay constant, so H(h, tau) = C_S(h) k(tau).
SteinModel make_separable(const SpatialPowerExponential& spatial, const FracExpSpectrum& spectrum,
                          int dim = 2);

FrozenField make_frozen(const FracExpSpectrum& spectrum, const Eigen::VectorXd& drift,
                        double scale);

}  // namespace covspec

#include "covspec/detail/covariance_synthesis.hpp"
