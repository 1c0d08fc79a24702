#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covspec/model.hpp"

namespace covspec {

/// Subtracts each row's sample mean.
Eigen::MatrixXd center(const Eigen::MatrixXd& data);

/// Half-Fourier transform J(s_i, tau_j) = sum_{t=1}^{T} Z(s_i, t) e^{-2 pi i t tau_j}
/// on the grid tau_j = j/T, j = 1..[T/2].
struct HalfTransform {
  Eigen::MatrixXcd J;  // S x F
  std::vector<double> freqs;
  std::size_t T = 0;

  std::size_t n_sites() const { return static_cast<std::size_t>(J.rows()); }
  std::size_t n_freqs() const { return freqs.size(); }
};

/// Rejects T < 4. Input is expected to be centered.
HalfTransform half_fft(const Eigen::MatrixXd& data);

/// (1/T) sum over the full circle of |J|^2 reconstructed from the half grid;
/// equals sum_t Z(s_i, t)^2 for centered data.
double parseval_energy(const HalfTransform& transform, std::size_t site);

/// The Fourier grid j/T, j = 1..[T/2].
std::vector<double> fourier_grid(std::size_t T);

struct SitePair {
  std::size_t i = 0;
  std::size_t j = 0;
  Eigen::VectorXd lag;  // s_i - s_j
};

/// Empirical covariance-spectral function, raw (span 1) or smoothed.
/// Pairs are stored once with i < j; the (j, i) entry is the conjugate.
struct CrossSpectraTable {
  std::vector<double> freqs;
  std::size_t T = 0;
  std::vector<SitePair> pairs;
  Eigen::MatrixXcd cross;  // pairs x F, (1/T) J_i conj(J_j)
  Eigen::MatrixXd autos;   // S x F, (1/T) |J_i|^2
  int span = 1;

  std::size_t n_sites() const { return static_cast<std::size_t>(autos.rows()); }
  std::size_t n_freqs() const { return freqs.size(); }
  bool smoothed() const { return span > 1; }

  /// k(tau): mean of the auto entries over sites.
  Eigen::VectorXd marginal() const;
  /// Entry for the ordered site pair (i, j); i == j gives the auto entry.
  Complex entry(std::size_t i, std::size_t j, std::size_t f) const;
  /// Complex coherence of sites (i, j) at frequency index f (NaN if undefined).
  Complex coherence(std::size_t i, std::size_t j, std::size_t f) const;
  std::size_t pair_index(std::size_t i, std::size_t j) const;
};

CrossSpectraTable raw_cross_spectra(const HalfTransform& transform, const SiteLayout& layout);

/// Modified Daniell weights for an odd span: 1/(span-1) inside, half that at
/// the two ends. span = 1 gives {1}.
std::vector<double> daniell_weights(int span);

/// Convolves with the modified Daniell kernel, reflecting the series about
/// each end (x[-k] = x[k]). Requires odd span <= series length.
std::vector<Complex> daniell_smooth(std::span<const Complex> series, int span);
std::vector<double> daniell_smooth(std::span<const double> series, int span);

/// Smooths every cross and auto entry of a raw table.
CrossSpectraTable smooth(const CrossSpectraTable& raw, int span);

/// Lag class: pairs whose lag vectors agree within tolerance (a pair whose
/// lag is the negation of the class lag enters conjugated).
struct LagGroup {
  Eigen::VectorXd lag;
  std::vector<std::size_t> pairs;
  std::vector<bool> flipped;
};

/// Smoothed coherence modulus and principal phase per lag class.
struct CoherencePhaseTable {
  std::vector<double> freqs;
  std::vector<LagGroup> groups;
  Eigen::MatrixXd modulus;  // groups x F
  Eigen::MatrixXd angle;    // groups x F, in (-pi, pi]
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
  std::size_t flagged = 0;

  std::size_t n_groups() const { return groups.size(); }
  std::size_t n_freqs() const { return freqs.size(); }
};

/// Requires a table smoothed with span >= 3. Pairs with coinciding lags
/// (within lag_tolerance km) are merged by averaging the complex coherence.
/// Frequencies with a zero auto spectrum are flagged invalid.
CoherencePhaseTable coherence_phase(const CrossSpectraTable& smoothed, double lag_tolerance = 1e-9);

/// Sequential unwinding: the first value is kept, each next value is shifted
/// by the multiple of 2 pi closest to the previous output (ties toward the
/// smaller shift). NaN entries stay NaN and are stepped over. Appends a
/// message to `warnings` for steps above pi/2.
std::vector<double> unwind(std::span<const double> angles, std::vector<std::string>* warnings = nullptr);

/// Unwound real-valued phase per lag class.
struct PhaseTable {
  std::vector<double> freqs;
  std::vector<LagGroup> groups;
  Eigen::MatrixXd unwound;  // groups x F
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
  std::vector<std::string> warnings;

  std::size_t n_groups() const { return groups.size(); }
  std::size_t n_freqs() const { return freqs.size(); }
};

/// Invalid entries are skipped and carry the previous unwound value.
PhaseTable unwind(const CoherencePhaseTable& table);

}  // namespace covspec
