#include "covspec/spectra.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "covspec/error.hpp"
#include "fft.hpp"

namespace covspec {

Eigen::MatrixXd center(const Eigen::MatrixXd& data) {
  Eigen::MatrixXd out = data;
  if (data.cols() == 0) return out;
  out.colwise() -= data.rowwise().mean();
  return out;
}

std::vector<double> fourier_grid(std::size_t T) {
  std::vector<double> freqs(T / 2);
  for (std::size_t j = 1; j <= T / 2; ++j) freqs[j - 1] = static_cast<double>(j) / static_cast<double>(T);
  return freqs;
}

HalfTransform half_fft(const Eigen::MatrixXd& data) {
  const auto T = static_cast<std::size_t>(data.cols());
  if (T < 4) throw ValidationError("half_fft: series length must be at least 4");
  if (!data.allFinite()) throw ValidationError("half_fft: data contain non-finite values");
  const std::size_t F = T / 2;
  HalfTransform out;
  out.T = T;
  out.freqs = fourier_grid(T);
  out.J.resize(data.rows(), static_cast<Eigen::Index>(F));

  detail::ComplexFft forward(T, -1);
  std::vector<Complex> buffer(T);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (std::size_t t = 0; t < T; ++t) buffer[t] = Complex(data(i, static_cast<Eigen::Index>(t)), 0.0);
    forward.execute(buffer);
    // The transform counts time from t = 1, hence the extra e^{-2 pi i tau}.
    for (std::size_t j = 1; j <= F; ++j) {
      const double shift = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(T);
      out.J(i, static_cast<Eigen::Index>(j - 1)) = buffer[j] * std::polar(1.0, shift);
    }
  }
  return out;
}

double parseval_energy(const HalfTransform& transform, std::size_t site) {
  const auto i = static_cast<Eigen::Index>(site);
  const std::size_t T = transform.T;
  const std::size_t F = transform.n_freqs();
  double sum = 0.0;
  for (std::size_t j = 1; j <= F; ++j) {
    const double power = std::norm(transform.J(i, static_cast<Eigen::Index>(j - 1)));
    const bool nyquist = (T % 2 == 0) && j == F;
    sum += nyquist ? power : 2.0 * power;
  }
  return sum / static_cast<double>(T);
}

Eigen::VectorXd CrossSpectraTable::marginal() const { return autos.colwise().mean().transpose(); }

std::size_t CrossSpectraTable::pair_index(std::size_t i, std::size_t j) const {
  const std::size_t a = std::min(i, j);
  const std::size_t b = std::max(i, j);
  const std::size_t S = n_sites();
  if (a == b || b >= S) throw ValidationError("pair_index: invalid site pair");
  // Pairs are laid out row by row: (0,1), (0,2), ..., (1,2), ...
  return a * S - a * (a + 1) / 2 + (b - a - 1);
}

Complex CrossSpectraTable::entry(std::size_t i, std::size_t j, std::size_t f) const {
  const auto fi = static_cast<Eigen::Index>(f);
  if (i == j) return Complex(autos(static_cast<Eigen::Index>(i), fi), 0.0);
  const Complex c = cross(static_cast<Eigen::Index>(pair_index(i, j)), fi);
  return i < j ? c : std::conj(c);
}

Complex CrossSpectraTable::coherence(std::size_t i, std::size_t j, std::size_t f) const {
  const auto fi = static_cast<Eigen::Index>(f);
  const double denom = std::sqrt(autos(static_cast<Eigen::Index>(i), fi) * autos(static_cast<Eigen::Index>(j), fi));
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return Complex(nan, nan);
  }
  return entry(i, j, f) / denom;
}

CrossSpectraTable raw_cross_spectra(const HalfTransform& transform, const SiteLayout& layout) {
  const std::size_t S = transform.n_sites();
  if (layout.size() != S) throw ValidationError("raw_cross_spectra: layout and transform disagree on site count");
  const double T = static_cast<double>(transform.T);
  CrossSpectraTable table;
  table.freqs = transform.freqs;
  table.T = transform.T;
  table.span = 1;
  table.autos = transform.J.cwiseAbs2() / T;
  const auto P = static_cast<Eigen::Index>(S * (S - 1) / 2);
  table.cross.resize(P, transform.J.cols());
  table.pairs.reserve(static_cast<std::size_t>(P));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = i + 1; j < S; ++j, ++row) {
      table.pairs.push_back(SitePair{i, j, layout.lag(i, j)});
      table.cross.row(row) = transform.J.row(static_cast<Eigen::Index>(i)).cwiseProduct(
                                 transform.J.row(static_cast<Eigen::Index>(j)).conjugate()) /
                             T;
    }
  }
  return table;
}

std::vector<double> daniell_weights(int span) {
  if (span < 1 || span % 2 == 0) throw ValidationError("Daniell span must be a positive odd integer");
  if (span == 1) return {1.0};
  const int m = (span - 1) / 2;
  std::vector<double> w(static_cast<std::size_t>(span), 1.0 / (2.0 * m));
  w.front() = w.back() = 1.0 / (4.0 * m);
  return w;
}

namespace {

template <class T>
std::vector<T> daniell_apply(std::span<const T> x, int span) {
  const auto w = daniell_weights(span);
  const auto n = static_cast<long>(x.size());
  if (span > n) throw ValidationError("Daniell span exceeds series length");
  if (span == 1) return std::vector<T>(x.begin(), x.end());
  const long m = (span - 1) / 2;
  auto reflect = [n](long idx) {
    if (idx < 0) return -idx;
    if (idx >= n) return 2 * (n - 1) - idx;
    return idx;
  };
  std::vector<T> out(x.size());
  for (long t = 0; t < n; ++t) {
    T acc{};
    for (long k = -m; k <= m; ++k) acc += w[static_cast<std::size_t>(k + m)] * x[static_cast<std::size_t>(reflect(t + k))];
    out[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

}  // namespace

std::vector<Complex> daniell_smooth(std::span<const Complex> series, int span) {
  return daniell_apply<Complex>(series, span);
}

std::vector<double> daniell_smooth(std::span<const double> series, int span) {
  return daniell_apply<double>(series, span);
}

CrossSpectraTable smooth(const CrossSpectraTable& raw, int span) {
  if (raw.smoothed()) throw ValidationError("smooth: table is already smoothed");
  CrossSpectraTable out = raw;
  out.span = span;
  const auto F = static_cast<Eigen::Index>(raw.n_freqs());
  std::vector<double> real_row(static_cast<std::size_t>(F));
  std::vector<Complex> complex_row(static_cast<std::size_t>(F));
  for (Eigen::Index i = 0; i < raw.autos.rows(); ++i) {
    for (Eigen::Index f = 0; f < F; ++f) real_row[static_cast<std::size_t>(f)] = raw.autos(i, f);
    const auto s = daniell_smooth(std::span<const double>(real_row), span);
    for (Eigen::Index f = 0; f < F; ++f) out.autos(i, f) = s[static_cast<std::size_t>(f)];
  }
  for (Eigen::Index p = 0; p < raw.cross.rows(); ++p) {
    for (Eigen::Index f = 0; f < F; ++f) complex_row[static_cast<std::size_t>(f)] = raw.cross(p, f);
    const auto s = daniell_smooth(std::span<const Complex>(complex_row), span);
    for (Eigen::Index f = 0; f < F; ++f) out.cross(p, f) = s[static_cast<std::size_t>(f)];
  }
  return out;
}

namespace {

double principal(double angle) { return angle <= -std::numbers::pi ? angle + 2.0 * std::numbers::pi : angle; }

}  // namespace

CoherencePhaseTable coherence_phase(const CrossSpectraTable& smoothed, double lag_tolerance) {
  if (smoothed.span < 3) {
    throw ValidationError("coherence_phase: table must be smoothed with span >= 3");
  }
  CoherencePhaseTable out;
  out.freqs = smoothed.freqs;

  for (std::size_t p = 0; p < smoothed.pairs.size(); ++p) {
    const Eigen::VectorXd& lag = smoothed.pairs[p].lag;
    bool placed = false;
    for (auto& group : out.groups) {
      if ((group.lag - lag).norm() <= lag_tolerance) {
        group.pairs.push_back(p);
        group.flipped.push_back(false);
        placed = true;
      } else if ((group.lag + lag).norm() <= lag_tolerance) {
        group.pairs.push_back(p);
        group.flipped.push_back(true);
        placed = true;
      }
      if (placed) break;
    }
    if (!placed) out.groups.push_back(LagGroup{lag, {p}, {false}});
  }

  const auto G = static_cast<Eigen::Index>(out.groups.size());
  const auto F = static_cast<Eigen::Index>(smoothed.n_freqs());
  out.modulus.setZero(G, F);
  out.angle.setZero(G, F);
  out.valid.setConstant(G, F, true);
  for (Eigen::Index g = 0; g < G; ++g) {
    const LagGroup& group = out.groups[static_cast<std::size_t>(g)];
    for (Eigen::Index f = 0; f < F; ++f) {
      Complex sum{0.0, 0.0};
      int count = 0;
      for (std::size_t m = 0; m < group.pairs.size(); ++m) {
        const SitePair& pair = smoothed.pairs[group.pairs[m]];
        const Complex rho = smoothed.coherence(pair.i, pair.j, static_cast<std::size_t>(f));
        if (!std::isfinite(rho.real()) || !std::isfinite(rho.imag())) continue;
        sum += group.flipped[m] ? std::conj(rho) : rho;
        ++count;
      }
      if (count == 0) {
        out.valid(g, f) = false;
        ++out.flagged;
        continue;
      }
      const Complex rho = sum / static_cast<double>(count);
      out.modulus(g, f) = std::abs(rho);
      out.angle(g, f) = principal(std::arg(rho));
    }
  }
  return out;
}

std::vector<double> unwind(std::span<const double> angles, std::vector<std::string>* warnings) {
  std::vector<double> out(angles.size());
  if (angles.empty()) return out;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  // non-finite angles stay NaN and the walk resumes from the last finite value
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t j = 0; j < angles.size(); ++j) {
    const double g = angles[j];
    if (!std::isfinite(g)) {
      out[j] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (std::isnan(prev)) {
      out[j] = prev = g;
      continue;
    }
    const double lo = std::floor((prev - g) / two_pi);
    double best = lo;
    double best_dist = std::abs(g + two_pi * lo - prev);
    const double dist_hi = std::abs(g + two_pi * (lo + 1.0) - prev);
    if (dist_hi < best_dist || (dist_hi == best_dist && std::abs(lo + 1.0) < std::abs(lo))) {
      best = lo + 1.0;
      best_dist = dist_hi;
    }
    out[j] = prev = g + two_pi * best;
    if (warnings != nullptr && best_dist > std::numbers::pi / 2.0) {
      std::ostringstream msg;
      msg << "phase step of " << best_dist << " rad at index " << j << " exceeds pi/2";
      warnings->push_back(msg.str());
    }
  }
  return out;
}

PhaseTable unwind(const CoherencePhaseTable& table) {
  PhaseTable out;
  out.freqs = table.freqs;
  out.groups = table.groups;
  out.valid = table.valid;
  const auto G = static_cast<Eigen::Index>(table.n_groups());
  const auto F = static_cast<Eigen::Index>(table.n_freqs());
  out.unwound.setConstant(G, F, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index g = 0; g < G; ++g) {
    std::vector<double> angles;
    std::vector<Eigen::Index> where;
    for (Eigen::Index f = 0; f < F; ++f) {
      if (!table.valid(g, f)) continue;
      angles.push_back(table.angle(g, f));
      where.push_back(f);
    }
    std::vector<std::string> local;
    const auto unwound = unwind(std::span<const double>(angles), &local);
    for (std::size_t m = 0; m < where.size(); ++m) out.unwound(g, where[m]) = unwound[m];
    for (auto& w : local) out.warnings.push_back("lag class " + std::to_string(g) + ": " + w);
  }
  return out;
}

}  // namespace covspec
