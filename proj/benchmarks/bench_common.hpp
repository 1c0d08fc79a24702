#pragma once

#include <random>

#include "covspec/model.hpp"

namespace covspec::bench {

inline SteinModel model() {
  SteinModel m;
  m.spectrum = {0.3, EvenTrigPoly({0.0, 0.5})};
  m.log_gamma = EvenTrigPoly({-6.5, -0.3});
  m.theta = OddTrigPoly({0.01});
  m.drift = Eigen::Vector2d(1.0, 0.0);
  m.power = 1.2;
  return m;
}

inline SiteLayout layout(std::size_t S, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 400.0);
  std::vector<Eigen::VectorXd> sites;
  for (std::size_t i = 0; i < S; ++i) sites.push_back(Eigen::Vector2d(u(rng), u(rng)));
  return SiteLayout(sites);
}

}  // namespace covspec::bench
