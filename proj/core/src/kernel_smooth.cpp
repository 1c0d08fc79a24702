#include "covspec/kernel_smooth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "covspec/error.hpp"

namespace covspec {

namespace {

// Kernel weights below exp(-32) are dropped.
constexpr double kCutoff = 8.0;

struct Sorted {
  std::vector<double> x;
  std::vector<double> y;
};

Sorted sort_by_x(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("kernel regression: x and y lengths differ");
  if (x.size() < 2) throw ValidationError("kernel regression needs at least two points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ValidationError("kernel regression: non-finite input");
  }
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  Sorted s;
  s.x.reserve(x.size());
  s.y.reserve(x.size());
  for (auto i : order) {
    s.x.push_back(x[i]);
    s.y.push_back(y[i]);
  }
  if (s.x.front() == s.x.back()) throw ValidationError("kernel regression: all x values are equal");
  return s;
}

struct Moments {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
};

Moments local_moments(const Sorted& data, double x0, double h) {
  Moments m;
  const auto lo = std::lower_bound(data.x.begin(), data.x.end(), x0 - kCutoff * h);
  const auto hi = std::upper_bound(data.x.begin(), data.x.end(), x0 + kCutoff * h);
  for (auto it = lo; it != hi; ++it) {
    const auto i = static_cast<std::size_t>(it - data.x.begin());
    const double d = data.x[i] - x0;
    const double u = d / h;
    const double w = std::exp(-0.5 * u * u);
    m.s0 += w;
    m.s1 += w * d;
    m.s2 += w * d * d;
    m.t0 += w * data.y[i];
    m.t1 += w * d * data.y[i];
  }
  return m;
}

double combine(const Moments& m, int degree) {
  if (!(m.s0 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (degree >= 1) {
    const double det = m.s0 * m.s2 - m.s1 * m.s1;
    if (det > 1e-10 * m.s0 * m.s2 && det > 0.0) return (m.s2 * m.t0 - m.s1 * m.t1) / det;
  }
  return m.t0 / m.s0;
}

double nearest_value(const Sorted& data, double x0) {
  const auto it = std::lower_bound(data.x.begin(), data.x.end(), x0);
  std::size_t i = static_cast<std::size_t>(it - data.x.begin());
  if (i == data.x.size()) return data.y.back();
  if (i > 0 && std::abs(data.x[i - 1] - x0) <= std::abs(data.x[i] - x0)) --i;
  return data.y[i];
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> x) {
  const auto n = x.size();
  if (n < 2) throw ValidationError("bandwidth rule needs at least two points");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> copy(x.begin(), x.end());
  const double iqr = quantile(copy, 0.75) - quantile(copy, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) throw ValidationError("bandwidth rule: all x values are equal");
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double cv_bandwidth(std::span<const double> x, std::span<const double> y, int degree) {
  const Sorted data = sort_by_x(x, y);
  const auto n = data.x.size();
  const double range = data.x.back() - data.x.front();
  double min_gap = range;
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = data.x[i] - data.x[i - 1];
    if (gap > 0.0) min_gap = std::min(min_gap, gap);
  }
  const double h_lo = std::max(min_gap, range / static_cast<double>(n));
  const double h_hi = range / 4.0;
  constexpr int kCandidates = 30;

  double best_h = h_hi;
  double best_score = std::numeric_limits<double>::infinity();
  for (int c = 0; c < kCandidates; ++c) {
    const double h = h_lo * std::pow(h_hi / h_lo, static_cast<double>(c) / (kCandidates - 1));
    double score = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Moments m = local_moments(data, data.x[i], h);
      // Remove observation i itself (weight 1, offset 0).
      m.s0 -= 1.0;
      m.t0 -= data.y[i];
      const double pred = combine(m, degree);
      if (!std::isfinite(pred)) continue;
      score += (data.y[i] - pred) * (data.y[i] - pred);
      ++used;
    }
    if (used < n / 2) continue;
    score /= static_cast<double>(used);
    if (score < best_score) {
      best_score = score;
      best_h = h;
    }
  }
  return best_h;
}

std::vector<double> kernel_regression(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> eval_x, double bandwidth, int degree) {
  if (!(bandwidth > 0.0)) throw ValidationError("kernel regression: bandwidth must be positive");
  if (degree < 0 || degree > 1) throw ValidationError("kernel regression: degree must be 0 or 1");
  const Sorted data = sort_by_x(x, y);
  std::vector<double> out(eval_x.size());
  for (std::size_t k = 0; k < eval_x.size(); ++k) {
    const double v = combine(local_moments(data, eval_x[k], bandwidth), degree);
    out[k] = std::isfinite(v) ? v : nearest_value(data, eval_x[k]);
  }
  return out;
}

NonparametricFit fit_nonparametric(std::span<const double> x, std::span<const double> y,
                                   const KernelSmoothOptions& options) {
  NonparametricFit fit;
  if (options.bandwidth > 0.0) {
    fit.bandwidth = options.bandwidth;
  } else if (options.rule == BandwidthRule::Silverman) {
    fit.bandwidth = silverman_bandwidth(x);
  } else {
    fit.bandwidth = cv_bandwidth(x, y, options.degree);
  }
  fit.curve = kernel_regression(x, y, x, fit.bandwidth, options.degree);
  return fit;
}

}  // namespace covspec
