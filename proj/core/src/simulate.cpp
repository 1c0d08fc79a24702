#include "covspec/simulate.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "covspec/error.hpp"
#include "fft.hpp"

namespace covspec {

Eigen::MatrixXcd psd_square_root(const Eigen::MatrixXcd& m) {
  const double trace = m.diagonal().real().sum();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of spectral matrix failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  if (lambda.size() > 0 && lambda.minCoeff() < -1e-10 * std::abs(trace)) {
    std::ostringstream msg;
    msg << "spectral matrix is not positive semi-definite (min eigenvalue " << lambda.minCoeff()
        << ", trace " << trace << ")";
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd root = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

namespace {

Eigen::MatrixXd real_psd_square_root(const Eigen::MatrixXd& m) {
  const double trace = m.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of spectral matrix failed");
  if (eig.eigenvalues().size() > 0 && eig.eigenvalues().minCoeff() < -1e-10 * std::abs(trace)) {
    throw NumericalError("real part of the Nyquist spectral matrix is not positive semi-definite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

FieldSample sample_from_spectra(const SpectralMatrixFn& spectral_matrix, const SiteLayout& layout,
                                std::size_t T, std::uint64_t seed) {
  if (T < 4 || T % 2 != 0) throw ValidationError("sample length T must be even and at least 4");
  const auto S = static_cast<Eigen::Index>(layout.size());
  const std::size_t half = T / 2;
  const double Td = static_cast<double>(T);

  // spectrum(i, j) holds J(s_i, j/T) for j = 0..T/2.
  Eigen::MatrixXcd spectrum = Eigen::MatrixXcd::Zero(S, static_cast<Eigen::Index>(half + 1));
  for (std::size_t j = 1; j <= half; ++j) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(j)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    const double tau = static_cast<double>(j) / Td;
    const Eigen::MatrixXcd m = spectral_matrix(tau);
    if (j < half) {
      const Eigen::MatrixXcd root = psd_square_root(m);
      Eigen::VectorXcd xi(S);
      for (Eigen::Index i = 0; i < S; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        xi(i) = Complex(re, im) * std::sqrt(0.5);
      }
      spectrum.col(static_cast<Eigen::Index>(j)) = std::sqrt(Td) * (root * xi);
    } else {
      const Eigen::MatrixXd real_root = real_psd_square_root(m.real());
      Eigen::VectorXd x(S);
      for (Eigen::Index i = 0; i < S; ++i) x(i) = normal(rng);
      spectrum.col(static_cast<Eigen::Index>(j)) = (std::sqrt(Td) * (real_root * x)).cast<Complex>();
    }
  }

  detail::ComplexFft inverse(T, +1);
  std::vector<Complex> buffer(T);
  Eigen::MatrixXd values(S, static_cast<Eigen::Index>(T));
  for (Eigen::Index i = 0; i < S; ++i) {
    buffer[0] = Complex(0.0, 0.0);
    for (std::size_t j = 1; j < half; ++j) {
      buffer[j] = spectrum(i, static_cast<Eigen::Index>(j));
      buffer[T - j] = std::conj(buffer[j]);
    }
    buffer[half] = spectrum(i, static_cast<Eigen::Index>(half));
    inverse.execute(buffer);
    double max_re = 0.0;
    double max_im = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      max_re = std::max(max_re, std::abs(buffer[t].real()));
      max_im = std::max(max_im, std::abs(buffer[t].imag()));
      values(i, static_cast<Eigen::Index>(t)) = buffer[t].real() / Td;
    }
    if (max_im > 1e-12 * std::max(1.0, max_re)) {
      throw NumericalError("inverse transform left an imaginary residue; Hermitian pairing broken");
    }
  }
  return FieldSample{std::move(values), layout, seed};
}

FieldSample sample_field(const SteinModel& model, const SiteLayout& layout, std::size_t T,
                         std::uint64_t seed) {
  model.validate();
  return sample_field<SteinModel>(model, layout, T, seed);
}

}  // namespace covspec
