#include "covspec/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "covspec/error.hpp"

namespace covspec {

namespace {

void check_open_half(double tau, const char* what) {
  if (!(std::abs(tau) > 0.0 && std::abs(tau) <= 0.5)) {
    std::ostringstream msg;
    msg << what << ": frequency " << tau << " outside 0 < |tau| <= 1/2";
    throw ValidationError(msg.str());
  }
}

void check_closed_half(double tau, const char* what) {
  if (!(std::abs(tau) <= 0.5)) {
    std::ostringstream msg;
    msg << what << ": frequency " << tau << " outside |tau| <= 1/2";
    throw ValidationError(msg.str());
  }
}

void check_lag(const Eigen::VectorXd& lag, int dim) {
  if (lag.size() != dim) {
    throw ValidationError("lag dimension does not match the model drift dimension");
  }
}

}  // namespace

void FracExpSpectrum::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw ValidationError("long-memory exponent beta must lie in [0, 1)");
  }
}

void SteinModel::validate() const {
  spectrum.validate();
  if (drift.size() < 1) throw ValidationError("drift vector is empty");
  if (!drift.allFinite() || std::abs(drift.norm() - 1.0) > 1e-9) {
    throw ValidationError("drift vector must have unit length");
  }
  if (!(power > 0.0 && power <= 2.0)) throw ValidationError("power p must satisfy 0 < p <= 2");
}

Complex SteinModel::H(const Eigen::VectorXd& lag, double tau) const { return eval_H(*this, lag, tau); }

Complex FrozenField::coherence(const Eigen::VectorXd& lag, double tau) const {
  check_closed_half(tau, "frozen coherence");
  check_lag(lag, dim());
  return std::polar(1.0, scale * tau * drift.dot(lag));
}

Complex FrozenField::H(const Eigen::VectorXd& lag, double tau) const {
  return eval_k(spectrum, tau) * coherence(lag, tau);
}

SiteLayout::SiteLayout(std::vector<Eigen::VectorXd> sites, std::vector<std::string> ids)
    : sites_(std::move(sites)), ids_(std::move(ids)) {
  if (sites_.empty()) throw ValidationError("site layout is empty");
  if (ids_.empty()) {
    for (std::size_t i = 0; i < sites_.size(); ++i) ids_.push_back(std::to_string(i));
  }
  if (ids_.size() != sites_.size()) throw ValidationError("site ids and coordinates differ in count");
  const auto d = sites_.front().size();
  if (d < 1) throw ValidationError("site coordinates have zero dimension");
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (sites_[i].size() != d) throw ValidationError("sites have inconsistent dimensions");
    if (!sites_[i].allFinite()) throw ValidationError("site " + ids_[i] + " has non-finite coordinates");
    for (std::size_t j = 0; j < i; ++j) {
      if ((sites_[i] - sites_[j]).norm() <= 1e-9) {
        throw ValidationError("sites " + ids_[j] + " and " + ids_[i] + " coincide");
      }
    }
  }
}

std::vector<Eigen::VectorXd> SiteLayout::lags() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(sites_.size() * sites_.size());
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    for (std::size_t j = 0; j < sites_.size(); ++j) out.push_back(sites_[i] - sites_[j]);
  }
  return out;
}

double eval_k(const FracExpSpectrum& spectrum, double tau) {
  check_open_half(tau, "eval_k");
  const double a = std::abs(tau);
  const double log_k = -spectrum.beta * std::log(std::sin(std::numbers::pi * a)) + spectrum.cosine_part(a);
  return std::exp(log_k);
}

double eval_k(const SteinModel& model, double tau) { return eval_k(model.spectrum, tau); }

double eval_gamma(const SteinModel& model, double tau) {
  check_closed_half(tau, "eval_gamma");
  return std::exp(model.log_gamma(tau));
}

double eval_theta(const SteinModel& model, double tau) {
  check_closed_half(tau, "eval_theta");
  return model.theta(tau);
}

Complex eval_coherence(const SteinModel& model, const Eigen::VectorXd& lag, double tau) {
  check_closed_half(tau, "eval_coherence");
  check_lag(lag, model.dim());
  const double r = lag.norm();
  const double modulus = (r == 0.0) ? 1.0 : std::exp(-std::pow(eval_gamma(model, tau) * r, model.power));
  const double phase = model.theta(tau) * model.drift.dot(lag);
  return std::polar(modulus, phase);
}

Complex eval_H(const SteinModel& model, const Eigen::VectorXd& lag, double tau) {
  const double k = eval_k(model, tau);
  return k * eval_coherence(model, lag, tau);
}

double eval_covariance(const SteinModel& model, const Eigen::VectorXd& lag, long u, long grid_size) {
  return eval_covariance<SteinModel>(model, lag, u, grid_size);
}

SteinModel make_separable(const SpatialPowerExponential& spatial, const FracExpSpectrum& spectrum,
                          int dim) {
  if (!(spatial.decay > 0.0)) throw ValidationError("separable decay must be positive");
  if (dim < 1) throw ValidationError("dimension must be positive");
  SteinModel model;
  model.spectrum = spectrum;
  model.log_gamma = EvenTrigPoly({std::log(spatial.decay)});
  model.theta = OddTrigPoly({0.0});
  model.drift = Eigen::VectorXd::Unit(dim, 0);
  model.power = spatial.power;
  model.validate();
  return model;
}

FrozenField make_frozen(const FracExpSpectrum& spectrum, const Eigen::VectorXd& drift, double scale) {
  spectrum.validate();
  if (drift.size() < 1 || std::abs(drift.norm() - 1.0) > 1e-9) {
    throw ValidationError("frozen-field drift must be a unit vector");
  }
  if (!std::isfinite(scale)) throw ValidationError("frozen-field scale must be finite");
  return FrozenField{spectrum, drift, scale};
}

}  // namespace covspec
