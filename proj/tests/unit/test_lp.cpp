#include <doctest.h>

#include <random>

#include "esilc/error.hpp"
#include "esilc/lp.hpp"
#include "support/generators.hpp"
#include "support/rational_simplex.hpp"

using namespace esilc;

namespace {

LpProblem make(Vec c, Mat g, Vec h) {
  LpProblem p;
  p.c = std::move(c);
  p.G = std::move(g);
  p.h = std::move(h);
  p.E.resize(0, p.c.size());
  p.f.resize(0);
  return p;
}

}  // namespace

TEST_CASE("lp_solve: maximize x + y over the unit box") {
  Mat g(4, 2);
  g << 1, 0, -1, 0, 0, 1, 0, -1;
  const LpResult r = lp_solve(make(Vec::Constant(2, -1.0), g, Vec::Ones(4)));
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(-r.value == doctest::Approx(2.0));
  CHECK(r.z(0) == doctest::Approx(1.0));
  CHECK(r.z(1) == doctest::Approx(1.0));
}

TEST_CASE("lp_solve: contradictory bounds are infeasible") {
  Mat g(2, 1);
  g << -1, 1;
  Vec h(2);
  h << -1, 0;
  CHECK(lp_solve(make(Vec::Ones(1), g, h)).status == LpStatus::Infeasible);
}

TEST_CASE("lp_solve: minimize -x over x >= 0 is unbounded") {
  Mat g(1, 1);
  g << -1;
  CHECK(lp_solve(make(-Vec::Ones(1), g, Vec::Zero(1))).status == LpStatus::Unbounded);
}

TEST_CASE("lp_solve: equality constraints and standard form") {
  // min x + 2y  s.t. x + y = 1, x, y >= 0  ->  (1, 0), value 1
  LpProblem p;
  p.c = Vec(2);
  p.c << 1, 2;
  p.G.resize(0, 2);
  p.h.resize(0);
  p.E = Mat::Ones(1, 2);
  p.f = Vec::Ones(1);
  p.nonnegative = true;
  const LpResult r = lp_solve(p);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.z(0) == doctest::Approx(1.0));
}

TEST_CASE("lp_solve: degenerate vertex does not cycle") {
  // Beale-style degenerate problem that cycles under the textbook rule.
  LpProblem p;
  p.c = Vec(4);
  p.c << -0.75, 150, -0.02, 6;
  p.G = Mat(3, 4);
  p.G << 0.25, -60, -0.04, 9, 0.5, -90, -0.02, 3, 0, 0, 1, 0;
  p.h = Vec(3);
  p.h << 0, 0, 1;
  p.E.resize(0, 4);
  p.f.resize(0);
  p.nonnegative = true;
  const LpResult r = lp_solve(p);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == doctest::Approx(-0.05));
}

TEST_CASE("lp_solve: dimension mismatch and non-finite data are rejected") {
  LpProblem p = make(Vec::Ones(2), Mat::Ones(1, 3), Vec::Ones(1));
  CHECK_THROWS_AS(lp_solve(p), Error);
  p = make(Vec::Ones(1), Mat::Ones(1, 1), Vec::Constant(1, std::numeric_limits<double>::infinity()));
  CHECK_THROWS_AS(lp_solve(p), Error);
}

TEST_CASE("lp_solve agrees with the exact rational reference and is deterministic") {
  std::mt19937 rng(2024);
  int optimal = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const LpProblem p = testing::random_lp(rng);
    const LpResult r = lp_solve(p);
    const auto ref = testing::rational_lp(p);
    REQUIRE(r.status == ref.status);
    if (r.status == LpStatus::Optimal) {
      ++optimal;
      CHECK(r.value == doctest::Approx(ref.value.get_d()).epsilon(1e-9));
      const double viol = std::max(p.G.rows() ? (p.G * r.z - p.h).maxCoeff() : 0.0,
                                   p.E.rows() ? (p.E * r.z - p.f).cwiseAbs().maxCoeff() : 0.0);
      CHECK(viol <= 1e-9);
      const LpResult again = lp_solve(p);
      CHECK(again.value == r.value);
      CHECK((again.z.array() == r.z.array()).all());
    }
  }
  CHECK(optimal > 20);
}
