#pragma once

#include "builders.hpp"
#include "esilc/ilc.hpp"

namespace esilc::testing {

// x+ = (1 + da) x + u, |da| <= 0.1, X = U = [-1, 1].
inline Scenario scalar_scenario(double truth_da = 0.05) {
  Scenario s;
  s.name = "scalar";
  s.plant = scalar_plant(1.0, 1.0);
  s.truth = Uncertainty::zero(1, 1);
  s.truth.dA(0, 0) = truth_da;
  s.ell_a = 0.1;
  s.ell_b = 0.0;
  s.X = Polytope::box(1, 1.0);
  s.U = Polytope::box(1, 1.0);
  s.tuning = tuning(mat({{0.5}}), mat({{1.0}}), mat({{1.0}}), 5);
  s.reference = {{0, vec({0.5})}, {15, vec({-0.5})}, {30, vec({0.3})}};
  s.x0 = vec({0.0});
  s.learning.trial_length = 45;
  s.learning.budget = 60;
  return s;
}

// Stable two-state plant with the (2,2) entries of dA and dB unknown.
inline Scenario tracking_scenario(double truth_a22 = 0.0123, double truth_b2 = 0.0183) {
  Scenario s;
  s.name = "tracking";
  s.plant = {mat({{0.7, 0.2}, {0.0, 0.8}}), mat({{0.0}, {1.0}}), mat({{1.0, 0.0}}), mat({{0.0}})};
  s.truth = Uncertainty::zero(2, 1);
  s.truth.dA(1, 1) = truth_a22;
  s.truth.dB(1, 0) = truth_b2;
  s.ell_a = 0.02;
  s.ell_b = 0.04;
  s.mask = vec({0, 0, 0, 1, 0, 1});
  s.X = Polytope::box(2, 5.0);
  s.U = Polytope::box(1, 1.0);
  s.tuning = tuning(Mat::Identity(2, 2), mat({{1.0}}), mat({{100.0}}), 10);
  s.reference = {{0, vec({2.0})},  {10, vec({-1.0})}, {20, vec({1.5})}, {30, vec({-0.5})},
                 {40, vec({2.5})}, {50, vec({0.0})},  {60, vec({-2.0})}};
  s.x0 = Vec::Zero(2);
  s.learning.trial_length = 120;
  s.learning.budget = 200;
  return s;
}

}  // namespace esilc::testing
