#include <doctest.h>

#include <cmath>
#include <random>

#include "esilc/error.hpp"
#include "esilc/mpc.hpp"
#include "support/builders.hpp"

using namespace esilc;
using esilc::testing::double_integrator;
using esilc::testing::mat;
using esilc::testing::scalar_plant;
using esilc::testing::tuning;
using esilc::testing::vec;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an esilc::Error");
  return ErrorCode::InvalidArgument;
}

void check_controller_invariants(const MpcController& c) {
  const Mat a_k = c.A_hat() + c.B_hat() * c.K();
  const Mat a_kbar = c.A_hat() + c.B_hat() * c.K_bar();
  CHECK(is_schur(a_k));
  CHECK(is_schur(a_kbar));
  const Mat q = c.tuning().Q + c.K_bar().transpose() * c.tuning().R * c.K_bar();
  CHECK(norm_inf(c.P() - a_kbar.transpose() * c.P() * a_kbar - q) <= 1e-8);
  CHECK(is_subset(c.X1(), c.X()));
  CHECK(is_subset(c.U1(), c.U()));
  CHECK(is_robust_invariant(a_k, c.tube(), c.W()));
}

// Sparse multiple-shooting form of P_N over v = (x(0..N), u(0..N-1), theta).
// Rows listed in `active` (indices into the stacked inequality list) are
// imposed as equalities and the KKT system is solved directly.
struct SparseOracle {
  Mat h;
  Vec g;
  double constant = 0.0;
  Mat e;
  Vec f;
  Mat gi;
  Vec hi;
};

SparseOracle sparse_problem(const MpcController& c, const Vec& x, const Vec& y) {
  const Eigen::Index n = c.model().states();
  const Eigen::Index m = c.model().inputs();
  const Eigen::Index big_n = c.tuning().horizon;
  const Eigen::Index nv = n * (big_n + 1) + m * big_n + m;
  auto xi = [&](Eigen::Index k) { return n * k; };
  auto ui = [&](Eigen::Index k) { return n * (big_n + 1) + m * k; };
  const Eigen::Index ti = nv - m;
  const Mat mx = c.M_x();
  const Mat mu = c.M_u();

  SparseOracle o;
  o.h = Mat::Zero(nv, nv);
  o.g = Vec::Zero(nv);
  auto add_term = [&](const Mat& s, const Vec& r, const Mat& w) {
    o.h += 2.0 * s.transpose() * w * s;
    o.g += -2.0 * s.transpose() * w * r;
    o.constant += r.dot(w * r);
  };
  for (Eigen::Index k = 0; k <= big_n; ++k) {
    Mat s = Mat::Zero(n, nv);
    s.block(0, xi(k), n, n).setIdentity();
    s.block(0, ti, n, m) = -mx;
    add_term(s, Vec::Zero(n), k < big_n ? c.tuning().Q : c.P());
  }
  for (Eigen::Index k = 0; k < big_n; ++k) {
    Mat s = Mat::Zero(m, nv);
    s.block(0, ui(k), m, m).setIdentity();
    s.block(0, ti, m, m) = -mu;
    add_term(s, Vec::Zero(m), c.tuning().R);
  }
  {
    Mat s = Mat::Zero(c.model().outputs(), nv);
    s.block(0, ti, c.model().outputs(), m) = c.basis().N;
    add_term(s, y, c.tuning().T);
  }

  const bool trivial = c.tube_is_trivial();
  o.e = Mat::Zero(n * big_n + (trivial ? n : 0), nv);
  o.f = Vec::Zero(o.e.rows());
  for (Eigen::Index k = 0; k < big_n; ++k) {
    o.e.block(n * k, xi(k + 1), n, n) = Mat::Identity(n, n);
    o.e.block(n * k, xi(k), n, n) = -c.A_hat();
    o.e.block(n * k, ui(k), n, m) = -c.B_hat();
  }
  if (trivial) {
    o.e.block(n * big_n, xi(0), n, n).setIdentity();
    o.f.tail(n) = x;
  }

  std::vector<std::pair<Mat, Vec>> blocks;
  if (!trivial) {
    Mat gb = Mat::Zero(c.tube().num_facets(), nv);
    gb.block(0, xi(0), gb.rows(), n) = -c.tube().normals();
    blocks.emplace_back(gb, c.tube().offsets() - c.tube().normals() * x);
  }
  for (Eigen::Index k = 0; k < big_n; ++k) {
    Mat gx = Mat::Zero(c.X1().num_facets(), nv);
    gx.block(0, xi(k), gx.rows(), n) = c.X1().normals();
    blocks.emplace_back(gx, c.X1().offsets());
    Mat gu = Mat::Zero(c.U1().num_facets(), nv);
    gu.block(0, ui(k), gu.rows(), m) = c.U1().normals();
    blocks.emplace_back(gu, c.U1().offsets());
  }
  {
    const Polytope& om = c.terminal_set();
    Mat gt = Mat::Zero(om.num_facets(), nv);
    gt.block(0, xi(big_n), gt.rows(), n) = om.normals().leftCols(n);
    gt.block(0, ti, gt.rows(), m) = om.normals().rightCols(m);
    blocks.emplace_back(gt, om.offsets());
  }
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.first.rows();
  o.gi.resize(rows, nv);
  o.hi.resize(rows);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    o.gi.middleRows(r, b.first.rows()) = b.first;
    o.hi.segment(r, b.first.rows()) = b.second;
    r += b.first.rows();
  }
  return o;
}

struct OracleSolution {
  Vec v;
  Vec active_multipliers;
  double value = 0.0;
};

OracleSolution solve_with_active_set(const SparseOracle& o, const std::vector<Eigen::Index>& active) {
  const Eigen::Index nv = o.h.cols();
  const Eigen::Index ne = o.e.rows();
  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  Mat kkt = Mat::Zero(nv + ne + na, nv + ne + na);
  Vec rhs = Vec::Zero(kkt.rows());
  kkt.topLeftCorner(nv, nv) = o.h;
  kkt.block(0, nv, nv, ne) = o.e.transpose();
  kkt.block(nv, 0, ne, nv) = o.e;
  rhs.head(nv) = -o.g;
  rhs.segment(nv, ne) = o.f;
  for (Eigen::Index i = 0; i < na; ++i) {
    const Eigen::Index row = active[static_cast<std::size_t>(i)];
    kkt.block(0, nv + ne + i, nv, 1) = o.gi.row(row).transpose();
    kkt.block(nv + ne + i, 0, 1, nv) = o.gi.row(row);
    rhs(nv + ne + i) = o.hi(row);
  }
  const Vec sol = kkt.fullPivLu().solve(rhs);
  OracleSolution s;
  s.v = sol.head(nv);
  s.active_multipliers = sol.tail(na);
  s.value = 0.5 * s.v.dot(o.h * s.v) + o.g.dot(s.v) + o.constant;
  return s;
}

void compare_with_sparse_oracle(const MpcController& c, const Vec& x, const Vec& y) {
  const PnSolution pn = c.solve_pn(x, y);
  const SparseOracle o = sparse_problem(c, x, y);
  const Eigen::Index n = c.model().states();
  const Eigen::Index m = c.model().inputs();
  const Eigen::Index big_n = c.tuning().horizon;

  Vec v_qp(o.h.cols());
  for (Eigen::Index k = 0; k <= big_n; ++k) v_qp.segment(n * k, n) = pn.states.col(k);
  for (Eigen::Index k = 0; k < big_n; ++k) v_qp.segment(n * (big_n + 1) + m * k, m) = pn.inputs.col(k);
  v_qp.tail(m) = pn.theta;

  std::vector<Eigen::Index> active;
  const Vec slack = o.hi - o.gi * v_qp;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    if (slack(i) <= 1e-9 * std::max(1.0, std::abs(o.hi(i)))) active.push_back(i);
  }
  // Keep a linearly independent subset so the KKT matrix stays regular.
  std::vector<Eigen::Index> independent;
  Mat stacked(0, o.h.cols());
  for (Eigen::Index row : active) {
    Mat trial(stacked.rows() + 1, stacked.cols());
    trial << stacked, o.gi.row(row);
    Mat with_eq(trial.rows() + o.e.rows(), trial.cols());
    with_eq << o.e, trial;
    if (with_eq.fullPivLu().rank() == with_eq.rows()) {
      stacked = trial;
      independent.push_back(row);
    }
  }

  const OracleSolution s = solve_with_active_set(o, independent);
  CHECK((s.v - v_qp).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(s.value - pn.value) <= 1e-6 * std::max(1.0, std::abs(s.value)));
  // The oracle point is itself optimal: feasible and dual-sign correct.
  CHECK((o.gi * s.v - o.hi).maxCoeff() <= 1e-8);
  CHECK((o.e * s.v - o.f).cwiseAbs().maxCoeff() <= 1e-8);
  if (s.active_multipliers.size() > 0) CHECK(s.active_multipliers.minCoeff() >= -1e-8);
  CHECK(pn.kkt.stationarity <= 1e-8);
  CHECK(pn.kkt.primal <= 1e-8);
}

MpcController certain_double_integrator(int horizon = 10) {
  return synthesize(double_integrator(), Uncertainty::zero(2, 1), Polytope::box(2, 5.0),
                    Polytope::box(1, 1.0),
                    tuning(Mat::Identity(2, 2), mat({{1.0}}), mat({{100.0}}), horizon), 0.0, 0.0);
}

}  // namespace

TEST_CASE("uncertainty flattening is row-major dA then dB") {
  Uncertainty u = Uncertainty::zero(2, 1);
  u.dA << 1, 2, 3, 4;
  u.dB << 5, 6;
  CHECK(u.flatten() == vec({1, 2, 3, 4, 5, 6}));
  const Uncertainty back = Uncertainty::unflatten(u.flatten(), 2, 1);
  CHECK(back.dA == u.dA);
  CHECK(back.dB == u.dB);
  CHECK(code_of([] { Uncertainty::unflatten(Vec::Zero(5), 2, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("steady_state_basis: scalar plant") {
  const SteadyStateBasis b = steady_state_basis(scalar_plant(0.5, 1.0), Uncertainty::zero(1, 1));
  const Vec expected = vec({1.0, 0.5}) / std::sqrt(1.25);
  CHECK((b.M.col(0) - expected).norm() < 1e-12);
  CHECK(b.N(0, 0) == doctest::Approx(1.0 / std::sqrt(1.25)).epsilon(1e-12));
}

TEST_CASE("steady_state_basis: double integrator steady states are (y_s, 0), u_s = 0") {
  const SteadyStateBasis b = steady_state_basis(double_integrator(), Uncertainty::zero(2, 1));
  CHECK((b.M.col(0) - vec({1.0, 0.0, 0.0})).norm() < 1e-12);
  CHECK(b.N(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("steady_state_basis: orthonormal null-space basis with estimate applied") {
  PlantModel pm{mat({{0.3, 0.2}, {-0.1, 0.6}}), mat({{1.0, 0.0}, {0.5, 1.0}}),
                mat({{1.0, 0.0}, {0.0, 1.0}}), mat({{0.0, 0.0}, {0.0, 0.0}})};
  Uncertainty est = Uncertainty::zero(2, 2);
  est.dA(0, 1) = 0.05;
  est.dB(1, 0) = -0.1;
  const SteadyStateBasis b = steady_state_basis(pm, est);
  Mat s(2, 4);
  s << pm.A + est.dA - Mat::Identity(2, 2), pm.B + est.dB;
  CHECK(norm_inf(s * b.M) < 1e-12);
  CHECK(norm_inf(b.M.transpose() * b.M - Mat::Identity(2, 2)) < 1e-12);
  Mat cd(2, 4);
  cd << pm.C, pm.D;
  CHECK(norm_inf(b.N - cd * b.M) == 0.0);
}

TEST_CASE("steady_state_basis: structural cases") {
  // A = I, B = I: every state is a steady state with u = 0, dimension n = m.
  PlantModel identity{Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Zero(2, 2)};
  const SteadyStateBasis b = steady_state_basis(identity, Uncertainty::zero(2, 2));
  CHECK(b.M.cols() == 2);
  CHECK(norm_inf(b.M.bottomRows(2)) < 1e-12);
  // A = I with one input: the steady-state space has dimension 2 != m.
  PlantModel under{Mat::Identity(2, 2), mat({{1.0}, {0.0}}), mat({{1.0, 0.0}}), mat({{0.0}})};
  CHECK(code_of([&] { steady_state_basis(under, Uncertainty::zero(2, 1)); }) ==
        ErrorCode::DegenerateSteadySpace);
}

TEST_CASE("disturbance_box examples") {
  const Uncertainty zero = Uncertainty::zero(2, 1);
  CHECK(disturbance_radius(0.1, 0.0, zero, Polytope::box(2, 1.0), Polytope::box(1, 1.0)) ==
        doctest::Approx(0.1).epsilon(1e-12));
  const Polytope w0 = disturbance_box(0.0, 0.0, zero, Polytope::box(2, 1.0), Polytope::box(1, 1.0));
  CHECK(support(w0, vec({1.0, 0.0})) == 0.0);
  CHECK(support(w0, vec({-1.0, 1.0})) == 0.0);

  Uncertainty est = zero;
  est.dA = 0.05 * Mat::Identity(2, 2);
  const Polytope x2 = Polytope::box(vec({-1.0, -2.0}), vec({1.5, 0.5}));
  CHECK(max_abs_coordinate(x2) == doctest::Approx(2.0));
  CHECK(disturbance_radius(0.1, 0.0, est, x2, Polytope::box(1, 3.0)) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(disturbance_radius(0.1, 0.2, zero, Polytope::box(2, 1.0), Polytope::box(1, 3.0)) ==
        doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("disturbance box bounds the model-error term for sampled admissible errors") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double ell_a = 0.1;
  const double ell_b = 0.05;
  Uncertainty est = Uncertainty::zero(2, 1);
  est.dA(1, 0) = 0.03;
  const Polytope x = Polytope::box(2, 2.0);
  const Polytope uset = Polytope::box(1, 1.0);
  const double rho = disturbance_radius(ell_a, ell_b, est, x, uset);
  for (int i = 0; i < 500; ++i) {
    Mat da(2, 2);
    for (Eigen::Index k = 0; k < 4; ++k) da.data()[k] = u(rng);
    da *= ell_a / norm_inf(da);
    Mat db(2, 1);
    db << u(rng), u(rng);
    db *= ell_b / norm_inf(db);
    const Vec xs = 2.0 * vec({u(rng), u(rng)});
    const Vec us = vec({u(rng)});
    const Vec w = (da - est.dA) * xs + (db - est.dB) * us;
    CHECK(w.cwiseAbs().maxCoeff() <= rho + 1e-12);
  }
}

TEST_CASE("synthesize: certain model collapses the tube") {
  const MpcController c = certain_double_integrator();
  CHECK(c.tube_is_trivial());
  CHECK(support(c.tube(), vec({1.0, 1.0})) == 0.0);
  CHECK(is_subset(c.X1(), c.X()));
  CHECK(is_subset(c.X(), c.X1()));
  CHECK(is_subset(c.U(), c.U1()));
  CHECK(norm_inf(c.K() - c.K_bar()) == 0.0);
  check_controller_invariants(c);
  CHECK(c.terminal_determinedness() >= 1);
}

TEST_CASE("synthesize: scalar plant tightening uses the radius-0.2 tube") {
  // a = b = 1 with Q = 0.5, R = 1 gives P = 1, K = -0.5 and a_K = 0.5.
  const MpcController c =
      synthesize(scalar_plant(1.0, 1.0), Uncertainty::zero(1, 1), Polytope::box(1, 1.0),
                 Polytope::box(1, 1.0), tuning(mat({{0.5}}), mat({{1.0}}), mat({{1.0}}), 5), 0.1, 0.0);
  CHECK(c.K()(0, 0) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(c.disturbance_radius() == doctest::Approx(0.1));
  CHECK(support(c.tube(), vec({1.0})) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(support(c.tube(), vec({-1.0})) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(support(c.X1(), vec({1.0})) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(support(c.X1(), vec({-1.0})) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(support(c.U1(), vec({1.0})) == doctest::Approx(0.9).epsilon(1e-12));
  check_controller_invariants(c);

  SUBCASE("target projection clamps to lambda times the admissible outputs") {
    const TargetState t = c.target_projection(vec({2.0}));
    CHECK(t.ys(0) == doctest::Approx(0.8 * 0.99).epsilon(1e-9));
    CHECK(norm_inf(t.xs - c.M_x() * t.theta) == 0.0);
    CHECK(norm_inf(t.ys - c.basis().N * t.theta) == 0.0);
    const TargetState inside = c.target_projection(vec({0.3}));
    CHECK(inside.ys(0) == doctest::Approx(0.3).epsilon(1e-8));
    const TargetState zero = c.target_projection(vec({0.0}));
    CHECK(std::abs(zero.theta(0)) <= 1e-12);
    CHECK(std::abs(zero.xs(0)) <= 1e-12);
  }
}

TEST_CASE("synthesize: oversized uncertainty empties the tightened sets") {
  CHECK(code_of([] {
          synthesize(double_integrator(), Uncertainty::zero(2, 1), Polytope::box(2, 5.0),
                     Polytope::box(1, 1.0), tuning(Mat::Identity(2, 2), mat({{1.0}}), mat({{100.0}}), 10),
                     0.5, 0.0);
        }) == ErrorCode::EmptyDifference);
}

TEST_CASE("synthesize: validation errors") {
  CHECK(code_of([] {
          synthesize(double_integrator(), Uncertainty::zero(2, 1), Polytope::box(2, 5.0),
                     Polytope::box(1, 1.0), tuning(-Mat::Identity(2, 2), mat({{1.0}}), mat({{1.0}}), 10),
                     0.0, 0.0);
        }) == ErrorCode::InvalidArgument);
  PlantModel bad = double_integrator();
  bad.B = mat({{1.0}, {0.0}});
  CHECK(code_of([&] {
          synthesize(bad, Uncertainty::zero(2, 1), Polytope::box(2, 5.0), Polytope::box(1, 1.0),
                     tuning(Mat::Identity(2, 2), mat({{1.0}}), mat({{1.0}}), 10), 0.0, 0.0);
        }) == ErrorCode::Uncontrollable);
}

TEST_CASE("solve_pn: at the target the cost vanishes") {
  const MpcController c = certain_double_integrator();
  const TargetState t = c.target_projection(vec({2.0}));
  CHECK(t.ys(0) == doctest::Approx(2.0).epsilon(1e-8));
  const PnSolution s = c.solve_pn(t.xs, vec({2.0}));
  CHECK(s.value <= 1e-10);
  for (Eigen::Index k = 0; k < s.inputs.cols(); ++k) CHECK(std::abs(s.inputs(0, k) - t.us(0)) <= 1e-7);
  CHECK((s.xbar0 - t.xs).norm() <= 1e-12);
}

TEST_CASE("solve_pn: states far outside the feasible region are infeasible") {
  const MpcController c = certain_double_integrator();
  CHECK(code_of([&] { c.solve_pn(vec({40.0, 0.0}), vec({1.0})); }) == ErrorCode::Infeasible);
  CHECK(code_of([&] { c.solve_pn(vec({4.9, 4.9}), vec({1.0})); }) == ErrorCode::Infeasible);
}

TEST_CASE("solve_pn agrees with an independent sparse multiple-shooting solve") {
  SUBCASE("certain double integrator, N = 5, y_t = 0.5") {
    const MpcController c = certain_double_integrator(5);
    compare_with_sparse_oracle(c, vec({0.0, 0.0}), vec({0.5}));
    compare_with_sparse_oracle(c, vec({-3.0, 1.5}), vec({0.5}));
    compare_with_sparse_oracle(c, vec({-4.5, 0.0}), vec({4.0}));
  }
  SUBCASE("uncertain double integrator keeps x_bar(0) free inside the tube") {
    const MpcController c =
        synthesize(double_integrator(), Uncertainty::zero(2, 1), Polytope::box(2, 5.0),
                   Polytope::box(1, 1.0), tuning(Mat::Identity(2, 2), mat({{1.0}}), mat({{100.0}}), 5),
                   0.02, 0.0);
    CHECK_FALSE(c.tube_is_trivial());
    compare_with_sparse_oracle(c, vec({0.1, -0.05}), vec({0.5}));
    compare_with_sparse_oracle(c, vec({-2.0, 1.0}), vec({2.5}));
  }
}

TEST_CASE("control_law arithmetic") {
  // a = b = 1, Q = 0.9, R = 1 gives K = -0.6 exactly.
  const MpcController c =
      synthesize(scalar_plant(1.0, 1.0), Uncertainty::zero(1, 1), Polytope::box(1, 1.0),
                 Polytope::box(1, 1.0), tuning(mat({{0.9}}), mat({{1.0}}), mat({{1.0}}), 3), 0.05, 0.0);
  CHECK(c.K()(0, 0) == doctest::Approx(-0.6).epsilon(1e-9));
  PnSolution s;
  s.xbar0 = vec({0.3});
  s.inputs = mat({{0.2, 0.0, 0.0}});
  CHECK(c.control_law(vec({0.4}), s)(0) == doctest::Approx(0.14).epsilon(1e-9));
  CHECK(c.control_law(vec({0.3}), s)(0) == doctest::Approx(0.2).epsilon(1e-15));

  const MpcController certain = certain_double_integrator();
  const Vec x = vec({1.0, -0.5});
  const PnSolution pn = certain.solve_pn(x, vec({3.0}));
  CHECK((pn.xbar0 - x).norm() <= 1e-10);
  CHECK(std::abs(certain.control_law(x, pn)(0) - pn.inputs(0, 0)) <= 1e-10);
}

TEST_CASE("certain double integrator tracks an admissible target exactly with monotone cost") {
  const MpcController c = certain_double_integrator();
  const PlantModel pm = double_integrator();
  const Vec y = vec({3.0});
  Vec x = Vec::Zero(2);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 60; ++k) {
    const PnSolution s = c.solve_pn(x, y);
    CHECK(s.value <= prev + 1e-9);
    prev = s.value;
    const Vec u = c.control_law(x, s);
    CHECK(contains(c.U(), u));
    CHECK(contains(c.X(), x));
    if (k >= 40) CHECK(std::abs((pm.C * x)(0) - 3.0) <= 1e-6);
    x = pm.A * x + pm.B * u;
  }
}

TEST_CASE("inadmissible target converges to the projected steady output") {
  const MpcController c = certain_double_integrator();
  const PlantModel pm = double_integrator();
  const Vec y = vec({8.0});
  const double ys = c.target_projection(y).ys(0);
  CHECK(ys == doctest::Approx(0.99 * 5.0).epsilon(1e-9));
  Vec x = Vec::Zero(2);
  for (int k = 0; k < 80; ++k) x = pm.A * x + pm.B * c.control_law(x, y);
  CHECK(std::abs((pm.C * x)(0) - ys) <= 1e-6);
}

TEST_CASE("tube containment and constraint satisfaction under admissible true model errors") {
  SUBCASE("scalar") {
    const MpcController c =
        synthesize(scalar_plant(1.0, 1.0), Uncertainty::zero(1, 1), Polytope::box(1, 1.0),
                   Polytope::box(1, 1.0), tuning(mat({{0.5}}), mat({{1.0}}), mat({{1.0}}), 5), 0.1, 0.0);
    for (double da : {-0.1, 0.0, 0.1}) {
      Vec x = vec({-0.6});
      for (int k = 0; k < 100; ++k) {
        const Vec y = vec({k < 50 ? 0.7 : -0.7});
        const PnSolution s = c.solve_pn(x, y);
        CHECK(contains(c.tube(), Vec(x - s.xbar0)));
        const Vec u = c.control_law(x, s);
        CHECK(contains(c.U(), u));
        CHECK(contains(c.X(), x));
        x = (c.model().A + mat({{da}})) * x + c.model().B * u;
      }
    }
  }
  SUBCASE("double integrator, corners of the dA box") {
    const double ell = 0.04;
    const MpcController c =
        synthesize(double_integrator(), Uncertainty::zero(2, 1), Polytope::box(2, 5.0),
                   Polytope::box(1, 1.0), tuning(Mat::Identity(2, 2), mat({{1.0}}), mat({{100.0}}), 8),
                   ell, 0.0);
    check_controller_invariants(c);
    for (int corner = 0; corner < 4; ++corner) {
      Mat da = Mat::Zero(2, 2);
      da(0, 0) = (corner & 1 ? 1.0 : -1.0) * ell / 2;
      da(1, 0) = (corner & 2 ? 1.0 : -1.0) * ell;
      da(0, 1) = (corner & 1 ? -1.0 : 1.0) * ell / 2;
      Vec x = vec({0.0, 0.0});
      for (int k = 0; k < 60; ++k) {
        const PnSolution s = c.solve_pn(x, vec({2.0}));
        CHECK(contains(c.tube(), Vec(x - s.xbar0)));
        const Vec u = c.control_law(x, s);
        CHECK(contains(c.U(), u));
        CHECK(contains(c.X(), x));
        x = (c.model().A + da) * x + c.model().B * u;
      }
    }
  }
}
