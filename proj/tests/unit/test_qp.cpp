#include <doctest.h>

#include <random>

#include "esilc/error.hpp"
#include "esilc/qp.hpp"
#include "support/generators.hpp"

using namespace esilc;

namespace {

void check_kkt(const QpProblem& p, const QpResult& r) {
  const KktResiduals k = kkt_residuals(p, r);
  CHECK(k.stationarity <= 1e-8);
  CHECK(k.primal <= 1e-8);
  CHECK(k.complementarity <= 1e-8);
  CHECK(k.dual <= 1e-12);
}

}  // namespace

TEST_CASE("qp_solve: active upper bound") {
  // (z - 1)^2 = z^2 - 2z + 1; drop the constant, report it separately.
  Mat g(2, 1);
  g << 1, -1;
  Vec h(2);
  h << 0.5, 0.0;
  const QpProblem p(Mat::Constant(1, 1, 2.0), Vec::Constant(1, -2.0), g, h, Mat(0, 1), Vec(0));
  const QpResult r = qp_solve(p);
  REQUIRE(r.status == QpStatus::Optimal);
  CHECK(r.z(0) == doctest::Approx(0.5));
  CHECK(r.value + 1.0 == doctest::Approx(0.25));
  check_kkt(p, r);
}

TEST_CASE("qp_solve: symmetric equality-constrained problem") {
  const QpProblem p(2.0 * Mat::Identity(2, 2), Vec::Zero(2), Mat(0, 2), Vec(0), Mat::Ones(1, 2),
                    Vec::Constant(1, 2.0));
  const QpResult r = qp_solve(p);
  REQUIRE(r.status == QpStatus::Optimal);
  CHECK(r.z(0) == doctest::Approx(1.0));
  CHECK(r.z(1) == doctest::Approx(1.0));
  CHECK(r.value == doctest::Approx(2.0));
  check_kkt(p, r);
}

TEST_CASE("qp_solve: inconsistent inequalities are infeasible") {
  Mat g(2, 1);
  g << 1, -1;
  Vec h(2);
  h << -1.0, -1.0;  // z <= -1 and z >= 1
  const QpProblem p(Mat::Identity(1, 1), Vec::Zero(1), g, h, Mat(0, 1), Vec(0));
  CHECK(qp_solve(p).status == QpStatus::Infeasible);
}

TEST_CASE("qp_solve: Hessian is symmetrized on construction") {
  Mat h(2, 2);
  h << 2, 1, 0, 2;
  const QpProblem p(h, Vec::Ones(2), Mat(0, 2), Vec(0), Mat(0, 2), Vec(0));
  CHECK((p.H - p.H.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("qp_solve: random 5-variable QP with 3 box rows matches active-set enumeration") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat l(5, 5);
  for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = u(rng);
  const Mat hess = l * l.transpose() + 0.2 * Mat::Identity(5, 5);
  Vec q(5);
  for (int i = 0; i < 5; ++i) q(i) = 4.0 * u(rng);
  Mat g = Mat::Zero(3, 5);
  g(0, 0) = 1;
  g(1, 2) = 1;
  g(2, 4) = -1;
  const Vec h = Vec::Constant(3, 0.1);
  const QpProblem p(hess, q, g, h, Mat(0, 5), Vec(0));
  const QpResult r = qp_solve(p);
  const auto oracle = testing::brute_force_qp(p);
  REQUIRE(r.status == QpStatus::Optimal);
  REQUIRE(oracle.feasible);
  CHECK(r.value == doctest::Approx(oracle.value).epsilon(1e-9));
  CHECK((r.z - oracle.z).cwiseAbs().maxCoeff() < 1e-6);
  check_kkt(p, r);
}

TEST_CASE("qp_solve property: random problems match enumeration and beat feasible samples") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 120; ++trial) {
    const QpProblem p = testing::random_qp(rng);
    const QpResult r = qp_solve(p);
    const auto oracle = testing::brute_force_qp(p);
    REQUIRE(oracle.feasible);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(std::abs(r.value - oracle.value) <= 1e-6 * std::max(1.0, std::abs(oracle.value)));
    check_kkt(p, r);
    // Any feasible point found by sampling is no better than the optimum.
    for (int s = 0; s < 20; ++s) {
      Vec z = oracle.z;
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += 0.3 * u(rng);
      if (p.E.rows() > 0) continue;
      if ((p.G * z - p.h).maxCoeff() > 0.0) continue;
      CHECK(r.value <= 0.5 * z.dot(p.H * z) + p.q.dot(z) + 1e-6);
    }
    const QpResult again = qp_solve(p);
    CHECK((again.z.array() == r.z.array()).all());
  }
}
