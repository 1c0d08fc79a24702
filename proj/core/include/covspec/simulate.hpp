#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "covspec/model.hpp"

namespace covspec {

/// S x T realization of a Gaussian spatiotemporal field.
struct FieldSample {
  Eigen::MatrixXd values;  // row i is the series at layout.site(i)
  SiteLayout layout;
  std::uint64_t seed = 0;
};

/// [H(s_i - s_j, tau)]_{ij}: Hermitian, and PSD for every valid model.
template <CovarianceSpectral M>
Eigen::MatrixXcd cross_spectral_matrix(const M& model, const SiteLayout& layout, double tau) {
  const auto S = static_cast<Eigen::Index>(layout.size());
  Eigen::MatrixXcd m(S, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    for (Eigen::Index j = 0; j < S; ++j) {
      m(i, j) = model.H(layout.lag(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), tau);
    }
  }
  return m;
}

/// Square root L with L L^* = m for a Hermitian PSD matrix. Throws
/// NumericalError if an eigenvalue is below -1e-10 * trace(m).
Eigen::MatrixXcd psd_square_root(const Eigen::MatrixXcd& m);

using SpectralMatrixFn = std::function<Eigen::MatrixXcd(double tau)>;

/// Circulant frequency-domain sampler. For j = 1..T/2-1 draws a
/// circularly-symmetric complex normal vector with covariance T * M(j/T),
/// at j = T/2 a real normal vector with covariance T * Re M(1/2), puts no
/// power at j = 0, and inverts the Hermitian-completed spectrum. Each
/// frequency has its own generator derived from (seed, j), so the result
/// does not depend on evaluation order.
FieldSample sample_from_spectra(const SpectralMatrixFn& spectral_matrix, const SiteLayout& layout,
                                std::size_t T, std::uint64_t seed);

template <CovarianceSpectral M>
FieldSample sample_field(const M& model, const SiteLayout& layout, std::size_t T, std::uint64_t seed) {
  if (model.dim() != layout.dim()) {
    throw ValidationError("model and site layout dimensions differ");
  }
  return sample_from_spectra(
      [&](double tau) { return cross_spectral_matrix(model, layout, tau); }, layout, T, seed);
}

FieldSample sample_field(const SteinModel& model, const SiteLayout& layout, std::size_t T,
                         std::uint64_t seed);

}  // namespace covspec
