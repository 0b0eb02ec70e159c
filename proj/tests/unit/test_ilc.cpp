#include <doctest.h>

#include <cmath>

#include "esilc/ilc.hpp"
#include "support/scenarios.hpp"

using namespace esilc;
using namespace esilc::testing;

namespace {

Uncertainty scalar_estimate(double da) {
  Uncertainty u = Uncertainty::zero(1, 1);
  u.dA(0, 0) = da;
  return u;
}

// Sum of squared output residuals of the estimated model driven by the
// recorded inputs.
double replay_cost(const TrialRecord& rec, const Scenario& s, const Mat& a_hat, const Mat& b_hat) {
  Vec x = s.x0;
  double q = 0.0;
  for (int k = 0; k < rec.steps; ++k) {
    const Vec u = rec.u.col(k);
    q += (rec.y_meas.col(k) - (s.plant.C * x + s.plant.D * u)).squaredNorm();
    x = a_hat * x + b_hat * u;
  }
  return q;
}

}  // namespace

TEST_CASE("reference_at holds each value until the next step") {
  const Scenario s = scalar_scenario();
  CHECK(s.reference_at(0)(0) == 0.5);
  CHECK(s.reference_at(14)(0) == 0.5);
  CHECK(s.reference_at(15)(0) == -0.5);
  CHECK(s.reference_at(29)(0) == -0.5);
  CHECK(s.reference_at(1000)(0) == 0.3);
}

TEST_CASE("cost kind names round-trip") {
  for (CostKind k : {CostKind::Identification, CostKind::Performance}) CHECK(parse_cost_kind(to_string(k)) == k);
  CHECK_FALSE(parse_cost_kind("tracking").has_value());
}

TEST_CASE("scenario validation") {
  auto rejects = [](const Scenario& s) {
    try {
      s.validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidArgument;
    }
    return false;
  };
  CHECK_NOTHROW(scalar_scenario().validate());
  CHECK_NOTHROW(tracking_scenario().validate());
  CHECK(rejects(scalar_scenario(0.2)));
  Scenario s = scalar_scenario();
  s.reference.front().start = 1;
  CHECK(rejects(s));
  s = scalar_scenario();
  std::swap(s.reference[1], s.reference[2]);
  CHECK(rejects(s));
  s = scalar_scenario();
  s.x0 = vec({1.5});
  CHECK(rejects(s));
  s = scalar_scenario();
  s.mask = vec({1.0, 1.0, 1.0});
  CHECK(rejects(s));
  s = scalar_scenario();
  s.learning.budget = 0;
  CHECK(rejects(s));
  s = scalar_scenario();
  s.ell_a = -0.1;
  CHECK(rejects(s));
  s = scalar_scenario();
  s.reference[1].value = vec({0.1, 0.2});
  CHECK(rejects(s));
}

TEST_CASE("certain model: no model error means no tube error") {
  Scenario s = scalar_scenario(0.0);
  s.ell_a = 0.0;
  const TrialRecord rec = run_trial(s, scalar_estimate(0.0));
  REQUIRE(rec.feasible);
  CHECK(rec.steps == s.learning.trial_length);
  CHECK(rec.controller->tube_is_trivial());
  for (int k = 0; k < rec.steps; ++k) CHECK(std::abs(rec.e(0, k)) <= 1e-12);
  CHECK(rec.tube_violations() == 0);
  CHECK(rec.constraint_violations() == 0);
  CHECK(rec.cost <= 1e-20);
}

TEST_CASE("exact estimate: the true trajectory follows the estimated model") {
  const Scenario s = tracking_scenario();
  const TrialRecord rec = run_trial(s, s.truth);
  REQUIRE(rec.feasible);
  const Mat a_hat = s.plant.A + s.truth.dA;
  const Mat b_hat = s.plant.B + s.truth.dB;
  for (int k = 0; k + 1 < rec.steps; ++k) {
    const Vec next = a_hat * rec.x.col(k) + b_hat * rec.u.col(k);
    CHECK((rec.x.col(k + 1) - next).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(rec.cost <= 1e-20);
  CHECK(rec.tube_violations() == 0);
}

TEST_CASE("wrong estimate: tube error stays in the tube and constraints hold") {
  for (double truth : {-0.1, -0.03, 0.0, 0.07, 0.1}) {
    for (double est : {-0.1, -0.05, 0.0, 0.05, 0.1}) {
      CAPTURE(truth);
      CAPTURE(est);
      const Scenario s = scalar_scenario(truth);
      const TrialRecord rec = run_trial(s, scalar_estimate(est));
      REQUIRE(rec.feasible);
      CHECK(rec.tube_violations() == 0);
      CHECK(rec.constraint_violations() == 0);
      CHECK(rec.max_tube_error() <= max_abs_coordinate(rec.controller->tube()) + 1e-9);
    }
  }
}

TEST_CASE("identification cost matches an independent replay") {
  const Scenario s = scalar_scenario(0.05);
  const TrialRecord rec = run_trial(s, scalar_estimate(-0.05));
  REQUIRE(rec.feasible);
  const double oracle = replay_cost(rec, s, mat({{0.95}}), mat({{1.0}}));
  CHECK(oracle > 1e-4);
  CHECK(rec.cost == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(learning_cost(rec, s) == rec.cost);
}

TEST_CASE("performance cost vanishes under perfect tracking") {
  Scenario s = scalar_scenario(0.0);
  s.ell_a = 0.0;
  s.learning.kind = CostKind::Performance;
  s.reference = {{0, vec({0.5})}};
  s.x0 = vec({0.5});
  const TrialRecord rec = run_trial(s, scalar_estimate(0.0));
  REQUIRE(rec.feasible);
  CHECK(rec.cost <= 1e-18);
  CHECK(tail_tracking_error(rec) <= 1e-9);
}

TEST_CASE("performance cost sums squared tracking errors") {
  Scenario s = scalar_scenario(0.05);
  s.learning.kind = CostKind::Performance;
  const TrialRecord rec = run_trial(s, scalar_estimate(0.0));
  REQUIRE(rec.feasible);
  double q = 0.0;
  for (int k = 0; k < rec.steps; ++k) q += std::pow(rec.y(0, k) - s.reference_at(k)(0), 2);
  CHECK(rec.cost == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("infeasible trials get the penalty cost") {
  Scenario s = scalar_scenario();
  CHECK(penalty_cost(s) == 1e6 * 46.0);

  s.x0 = vec({3.0});
  TrialRecord rec = run_trial(s, scalar_estimate(0.0));
  CHECK_FALSE(rec.feasible);
  CHECK(rec.synthesized);
  REQUIRE(rec.infeasible_step.has_value());
  CHECK(*rec.infeasible_step == 0);
  CHECK(rec.failure_code == ErrorCode::Infeasible);
  CHECK(rec.cost == penalty_cost(s));
  CHECK(std::isinf(tail_tracking_error(rec)));

  s = scalar_scenario();
  s.ell_a = 0.6;
  rec = run_trial(s, scalar_estimate(0.0));
  CHECK_FALSE(rec.synthesized);
  CHECK_FALSE(rec.feasible);
  CHECK(rec.failure_code == ErrorCode::EmptyDifference);
  CHECK(rec.cost == penalty_cost(s));
}

TEST_CASE("output noise is reproducible per seed and iteration") {
  Scenario s = scalar_scenario();
  s.learning.noise = 0.01;
  const TrialRecord a = run_trial(s, scalar_estimate(0.0), 3, 7);
  const TrialRecord b = run_trial(s, scalar_estimate(0.0), 3, 7);
  const TrialRecord c = run_trial(s, scalar_estimate(0.0), 4, 7);
  CHECK(a.cost == b.cost);
  CHECK(a.cost != c.cost);
  CHECK((a.y_meas - a.y).cwiseAbs().maxCoeff() <= 0.01);
  CHECK((a.y_meas - a.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("synthesis cache reuses controllers per estimate") {
  const Scenario s = scalar_scenario();
  SynthesisCache cache;
  const TrialRecord a = run_trial(s, scalar_estimate(0.02), 1, 0, &cache);
  const TrialRecord b = run_trial(s, scalar_estimate(0.02), 2, 0, &cache);
  run_trial(s, scalar_estimate(-0.02), 3, 0, &cache);
  CHECK(cache.size() == 2);
  CHECK(a.controller == b.controller);
}

TEST_CASE("tail error averages the last quarter") {
  TrialRecord rec;
  rec.feasible = true;
  rec.steps = 8;
  rec.y = mat({{0, 0, 0, 0, 0, 0, 1, 3}});
  rec.ys = Mat::Zero(1, 8);
  CHECK(tail_tracking_error(rec) == 2.0);
}

TEST_CASE("uncontrollable search domains are rejected before learning") {
  Scenario s = scalar_scenario(0.0);
  s.plant = scalar_plant(1.0, 0.1);
  s.ell_a = 0.0;
  s.ell_b = 0.1;
  s.U = Polytope::box(1, 20.0);
  CHECK_THROWS_AS(check_search_domain_controllability(s), Error);
  try {
    run_learning(s);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Uncontrollable);
  }
}

TEST_CASE("zero uncertainty bounds give a single trial") {
  Scenario s = scalar_scenario(0.0);
  s.ell_a = 0.0;
  const LearningReport rep = run_learning(s);
  REQUIRE(rep.iterations.size() == 1);
  CHECK(rep.best_iteration == 1);
  CHECK(rep.best_estimate.dA(0, 0) == 0.0);
  CHECK(rep.domain_width == 0.0);
}

TEST_CASE("scalar learning recovers the model error") {
  for (double truth : {-0.073, 0.05, 0.0912}) {
    CAPTURE(truth);
    const Scenario s = scalar_scenario(truth);
    const LearningReport rep = run_learning(s);
    CHECK(rep.domain_width == doctest::Approx(0.2));
    CHECK(std::abs(rep.best_estimate.dA(0, 0) - truth) <= 0.01 * rep.domain_width);
    CHECK(static_cast<int>(rep.iterations.size()) <= s.learning.budget);
    for (std::size_t i = 1; i < rep.iterations.size(); ++i) {
      CHECK(rep.iterations[i].best_cost <= rep.iterations[i - 1].best_cost);
      CHECK(rep.iterations[i].best_cost == std::min(rep.iterations[i - 1].best_cost, rep.iterations[i].cost));
    }
  }
}

TEST_CASE("learning report bookkeeping") {
  const Scenario s = scalar_scenario(0.05);
  int calls = 0;
  LearningOptions opt;
  opt.on_iteration = [&](const IterationSummary& it) { CHECK(it.t == ++calls); };
  const LearningReport rep = run_learning(s, opt);
  CHECK(calls == static_cast<int>(rep.iterations.size()));
  CHECK(rep.first_trial.iteration == 1);
  CHECK(rep.best_trial.iteration == rep.best_iteration);
  CHECK(rep.best_cost == rep.iterations[static_cast<std::size_t>(rep.best_iteration - 1)].cost);
  CHECK(rep.best_cost == rep.iterations.back().best_cost);
  CHECK(rep.iterations.front().estimate(0) == 0.0);
  CHECK(rep.syntheses <= rep.iterations.size());
}

TEST_CASE("learning is deterministic and independent of the thread count") {
  Scenario s = tracking_scenario();
  s.learning.budget = 40;
  s.learning.noise = 0.005;
  LearningOptions one;
  one.seed = 11;
  LearningOptions many = one;
  many.jobs = 4;
  const LearningReport a = run_learning(s, one);
  const LearningReport b = run_learning(s, one);
  const LearningReport c = run_learning(s, many);
  REQUIRE(a.iterations.size() == b.iterations.size());
  REQUIRE(a.iterations.size() == c.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    CHECK(a.iterations[i].cost == b.iterations[i].cost);
    CHECK(a.iterations[i].cost == c.iterations[i].cost);
    CHECK(a.iterations[i].estimate == c.iterations[i].estimate);
  }
  CHECK(a.best_estimate.flatten() == c.best_estimate.flatten());
}

TEST_CASE("two-state learning improves tracking") {
  const Scenario s = tracking_scenario();
  CHECK(certain_settling_time(s) * 5 <= s.learning.trial_length);
  const LearningReport rep = run_learning(s, {4, 0, {}});
  const double err = (rep.best_estimate.flatten() - s.truth.flatten()).cwiseAbs().maxCoeff();
  CHECK(err <= 0.05 * rep.domain_width);
  CHECK(tail_tracking_error(rep.best_trial) <= 0.1 * tail_tracking_error(rep.first_trial));
}
