#include "esilc/mpc.hpp"

#include <cmath>

#include <fmt/format.h>

#include "esilc/error.hpp"

namespace esilc {

void PlantModel::validate() const {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  const Eigen::Index p = C.rows();
  if (n == 0 || m == 0 || p == 0 || A.cols() != n || B.rows() != n || C.cols() != n ||
      D.rows() != p || D.cols() != m) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("plant dimensions inconsistent: A {}x{}, B {}x{}, C {}x{}, D {}x{}", A.rows(),
                            A.cols(), B.rows(), B.cols(), C.rows(), C.cols(), D.rows(), D.cols()));
  }
  require_finite(A, "A");
  require_finite(B, "B");
  require_finite(C, "C");
  require_finite(D, "D");
}

Uncertainty Uncertainty::zero(Eigen::Index n, Eigen::Index m) {
  return {Mat::Zero(n, n), Mat::Zero(n, m)};
}

Uncertainty Uncertainty::unflatten(const Vec& flat, Eigen::Index n, Eigen::Index m) {
  if (flat.size() != n * (n + m)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("uncertainty vector has {} entries, expected {}", flat.size(), n * (n + m)));
  }
  Uncertainty u = zero(n, m);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) u.dA(i, j) = flat(k++);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) u.dB(i, j) = flat(k++);
  return u;
}

Vec Uncertainty::flatten() const {
  const Eigen::Index n = dA.rows();
  const Eigen::Index m = dB.cols();
  Vec flat(n * (n + m));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) flat(k++) = dA(i, j);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) flat(k++) = dB(i, j);
  return flat;
}

void Tuning::validate(Eigen::Index n, Eigen::Index m, Eigen::Index p) const {
  if (Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m || T.rows() != p ||
      T.cols() != p) {
    throw Error(ErrorCode::InvalidArgument, "tuning weight dimensions do not match the plant");
  }
  if (!is_positive_definite(Q)) throw Error(ErrorCode::InvalidArgument, "tuning: Q must be positive definite");
  if (!is_positive_definite(R)) throw Error(ErrorCode::InvalidArgument, "tuning: R must be positive definite");
  if (!is_positive_definite(T)) throw Error(ErrorCode::InvalidArgument, "tuning: T must be positive definite");
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "tuning: horizon must be >= 1");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "tuning: lambda must lie in (0, 1)");
  }
}

SteadyStateBasis steady_state_basis(const PlantModel& model, const Uncertainty& estimate) {
  const Eigen::Index n = model.states();
  const Eigen::Index m = model.inputs();
  Mat s(n, n + m);
  s << model.A + estimate.dA - Mat::Identity(n, n), model.B + estimate.dB;
  Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > thresh ? 1 : 0;
  const Eigen::Index nullity = n + m - rank;
  if (nullity != m) {
    throw Error(ErrorCode::DegenerateSteadySpace,
                fmt::format("steady-state space has dimension {}, expected {}", nullity, m));
  }
  Mat basis = svd.matrixV().rightCols(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index idx = 0;
    basis.col(j).cwiseAbs().maxCoeff(&idx);
    if (basis(idx, j) < 0.0) basis.col(j) *= -1.0;
  }
  Mat cd(model.outputs(), n + m);
  cd << model.C, model.D;
  return {basis, cd * basis};
}

double max_abs_coordinate(const Polytope& set) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < set.dim(); ++i) {
    const Vec e = Vec::Unit(set.dim(), i);
    best = std::max({best, std::abs(support(set, e)), std::abs(support(set, Vec(-e)))});
  }
  return best;
}

double disturbance_radius(double ell_a, double ell_b, const Uncertainty& estimate,
                          const Polytope& state_set, const Polytope& input_set) {
  if (ell_a < 0.0 || ell_b < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "uncertainty bounds must be nonnegative");
  }
  const double x_star = max_abs_coordinate(state_set);
  const double u_star = max_abs_coordinate(input_set);
  double rho = 0.0;
  if (ell_a > 0.0 || norm_inf(estimate.dA) > 0.0) rho += (ell_a + norm_inf(estimate.dA)) * x_star;
  if (ell_b > 0.0 || norm_inf(estimate.dB) > 0.0) rho += (ell_b + norm_inf(estimate.dB)) * u_star;
  return rho;
}

Polytope disturbance_box(double ell_a, double ell_b, const Uncertainty& estimate,
                         const Polytope& state_set, const Polytope& input_set) {
  return Polytope::box(state_set.dim(),
                       disturbance_radius(ell_a, ell_b, estimate, state_set, input_set));
}

MpcController synthesize(const PlantModel& model, const Uncertainty& estimate,
                         const Polytope& state_set, const Polytope& input_set,
                         const Tuning& tuning, double ell_a, double ell_b,
                         const SynthesisOptions& options) {
  model.validate();
  const Eigen::Index n = model.states();
  const Eigen::Index m = model.inputs();
  tuning.validate(n, m, model.outputs());
  if (estimate.dA.rows() != n || estimate.dA.cols() != n || estimate.dB.rows() != n ||
      estimate.dB.cols() != m) {
    throw Error(ErrorCode::InvalidArgument, "estimate dimensions do not match the plant");
  }
  if (state_set.dim() != n || input_set.dim() != m) {
    throw Error(ErrorCode::InvalidArgument, "constraint set dimensions do not match the plant");
  }

  MpcController c;
  c.model_ = model;
  c.estimate_ = estimate;
  c.tuning_ = tuning;
  c.x_ = state_set;
  c.u_ = input_set;
  c.a_hat_ = model.A + estimate.dA;
  c.b_hat_ = model.B + estimate.dB;
  if (!is_controllable(c.a_hat_, c.b_hat_)) {
    throw Error(ErrorCode::Uncontrollable, "estimated model (A + dA, B + dB) is not controllable");
  }

  // Tube and terminal gains share one LQR design.
  const LqrResult lqr = dlqr(c.a_hat_, c.b_hat_, tuning.Q, tuning.R);
  c.k_ = lqr.gain;
  c.k_bar_ = lqr.gain;
  const Mat a_kbar = c.a_hat_ + c.b_hat_ * c.k_bar_;
  const Mat a_k = c.a_hat_ + c.b_hat_ * c.k_;
  c.p_ = solve_dlyap(a_kbar, tuning.Q + c.k_bar_.transpose() * tuning.R * c.k_bar_);

  c.rho_ = disturbance_radius(ell_a, ell_b, estimate, state_set, input_set);
  c.w_ = Polytope::box(n, c.rho_);
  if (c.rho_ == 0.0) {
    c.phi_ = Polytope::origin(n);
  } else {
    RpiResult rpi = construct_rpi(a_k, c.w_, default_template(n, state_set), options.rpi);
    c.phi_ = std::move(rpi.set);
    c.rpi_steps_ = rpi.steps;
    c.rpi_alpha_ = rpi.alpha;
    c.rpi_rounds_ = rpi.enrichment_rounds;
  }

  c.x1_ = pontryagin_diff(state_set, c.phi_);
  SupportOracle k_phi(m);
  k_phi.add(c.k_, c.phi_);
  c.u1_ = pontryagin_diff(input_set, k_phi);

  c.basis_ = steady_state_basis(model, estimate);
  const Mat mx = c.M_x();
  const Mat mu = c.M_u();
  c.l_ = -c.k_bar_ * mx + mu;

  {
    Mat d(c.x1_.num_facets() + c.u1_.num_facets(), m);
    Vec off(d.rows());
    d << c.x1_.normals() * mx, c.u1_.normals() * mu;
    off << tuning.lambda * c.x1_.offsets(), tuning.lambda * c.u1_.offsets();
    c.theta_set_ = Polytope(std::move(d), std::move(off));
  }

  // Terminal set for tracking on w = (x_bar, theta).
  Mat a_aug = Mat::Zero(n + m, n + m);
  a_aug.topLeftCorner(n, n) = a_kbar;
  a_aug.topRightCorner(n, m) = c.b_hat_ * c.l_;
  a_aug.bottomRightCorner(m, m).setIdentity();
  const Eigen::Index rx = c.x1_.num_facets();
  const Eigen::Index ru = c.u1_.num_facets();
  const Eigen::Index rt = c.theta_set_.num_facets();
  Mat cons = Mat::Zero(rx + ru + rt, n + m);
  Vec coff(cons.rows());
  cons.block(0, 0, rx, n) = c.x1_.normals();
  coff.head(rx) = c.x1_.offsets();
  cons.block(rx, 0, ru, n) = c.u1_.normals() * c.k_bar_;
  cons.block(rx, n, ru, m) = c.u1_.normals() * c.l_;
  coff.segment(rx, ru) = c.u1_.offsets();
  cons.block(rx + ru, n, rt, m) = c.theta_set_.normals();
  coff.tail(rt) = c.theta_set_.offsets();
  InvariantSetResult omega =
      max_invariant_set(a_aug, Polytope(cons, coff), n, options.invariant_cap);
  c.omega_ = std::move(omega.set);
  c.omega_k_ = omega.determinedness_index;

  c.build_qp_template();
  return c;
}

void MpcController::build_qp_template() {
  const Eigen::Index n = model_.states();
  const Eigen::Index m = model_.inputs();
  const Eigen::Index horizon = tuning_.horizon;
  const Eigen::Index nz = n + m + horizon * m;
  const Eigen::Index th = n;
  auto u_index = [&](Eigen::Index k) { return n + m + k * m; };

  std::vector<Mat> s(static_cast<std::size_t>(horizon + 1), Mat::Zero(n, nz));
  s[0].block(0, 0, n, n).setIdentity();
  for (Eigen::Index k = 0; k < horizon; ++k) {
    Mat next = a_hat_ * s[static_cast<std::size_t>(k)];
    next.block(0, u_index(k), n, m) += b_hat_;
    s[static_cast<std::size_t>(k + 1)] = std::move(next);
  }
  Mat tx = Mat::Zero(n, nz);
  tx.block(0, th, n, m) = M_x();
  Mat tu = Mat::Zero(m, nz);
  tu.block(0, th, m, m) = M_u();
  qp_ny_ = Mat::Zero(model_.outputs(), nz);
  qp_ny_.block(0, th, model_.outputs(), m) = basis_.N;

  Mat h = Mat::Zero(nz, nz);
  for (Eigen::Index k = 0; k < horizon; ++k) {
    const Mat ex = s[static_cast<std::size_t>(k)] - tx;
    Mat eu = -tu;
    eu.block(0, u_index(k), m, m) += Mat::Identity(m, m);
    h += ex.transpose() * tuning_.Q * ex + eu.transpose() * tuning_.R * eu;
  }
  const Mat exn = s[static_cast<std::size_t>(horizon)] - tx;
  h += exn.transpose() * p_ * exn + qp_ny_.transpose() * tuning_.T * qp_ny_;
  qp_h_ = 2.0 * 0.5 * (h + h.transpose());

  const bool trivial = tube_is_trivial();
  const Eigen::Index r_tube = trivial ? 0 : phi_.num_facets();
  const Eigen::Index r_x = x1_.num_facets();
  const Eigen::Index r_u = u1_.num_facets();
  const Eigen::Index r_t = omega_.num_facets();
  const Eigen::Index rows = r_tube + horizon * (r_x + r_u) + r_t;
  qp_g_ = Mat::Zero(rows, nz);
  qp_h0_ = Vec::Zero(rows);
  qp_hx_ = Mat::Zero(rows, n);
  Eigen::Index r = 0;
  if (!trivial) {
    // x - x_bar(0) in Phi  <=>  -D x_bar(0) <= c - D x
    qp_g_.block(r, 0, r_tube, nz) = -phi_.normals() * s[0];
    qp_h0_.segment(r, r_tube) = phi_.offsets();
    qp_hx_.block(r, 0, r_tube, n) = -phi_.normals();
    r += r_tube;
  }
  for (Eigen::Index k = 0; k < horizon; ++k) {
    qp_g_.block(r, 0, r_x, nz) = x1_.normals() * s[static_cast<std::size_t>(k)];
    qp_h0_.segment(r, r_x) = x1_.offsets();
    r += r_x;
    qp_g_.block(r, u_index(k), r_u, m) = u1_.normals();
    qp_h0_.segment(r, r_u) = u1_.offsets();
    r += r_u;
  }
  Mat terminal_map = Mat::Zero(n + m, nz);
  terminal_map.topRows(n) = s[static_cast<std::size_t>(horizon)];
  terminal_map.block(n, th, m, m).setIdentity();
  qp_g_.block(r, 0, r_t, nz) = omega_.normals() * terminal_map;
  qp_h0_.segment(r, r_t) = omega_.offsets();

  qp_eq_ = trivial ? Mat(s[0]) : Mat(0, nz);
}

QpProblem MpcController::build_qp(const Vec& x, const Vec& y_target, double* constant) const {
  if (x.size() != model_.states() || y_target.size() != model_.outputs()) {
    throw Error(ErrorCode::InvalidArgument, "solve_pn: state or target dimension mismatch");
  }
  require_finite(x, "state");
  require_finite(y_target, "target");
  const Vec ty = tuning_.T * y_target;
  Vec q = -2.0 * qp_ny_.transpose() * ty;
  if (constant) *constant = y_target.dot(ty);
  const Vec f = qp_eq_.rows() > 0 ? Vec(x) : Vec(0);
  return QpProblem(qp_h_, std::move(q), qp_g_, qp_h0_ + qp_hx_ * x, qp_eq_, f);
}

PnSolution MpcController::solve_pn(const Vec& x, const Vec& y_target) const {
  double constant = 0.0;
  const QpProblem qp = build_qp(x, y_target, &constant);
  const QpResult r = qp_solve(qp);
  if (r.status == QpStatus::Infeasible) {
    throw Error(ErrorCode::Infeasible, "P_N(x, y_t) has no feasible point for this state");
  }
  if (r.status == QpStatus::MaxIter) {
    throw Error(ErrorCode::MaxIter, "P_N(x, y_t) QP iteration budget exhausted");
  }
  const Eigen::Index n = model_.states();
  const Eigen::Index m = model_.inputs();
  const Eigen::Index horizon = tuning_.horizon;
  PnSolution s;
  s.xbar0 = r.z.head(n);
  s.theta = r.z.segment(n, m);
  s.inputs.resize(m, horizon);
  for (Eigen::Index k = 0; k < horizon; ++k) s.inputs.col(k) = r.z.segment(n + m + k * m, m);
  s.states.resize(n, horizon + 1);
  s.states.col(0) = s.xbar0;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    s.states.col(k + 1) = a_hat_ * s.states.col(k) + b_hat_ * s.inputs.col(k);
  }
  s.xs = M_x() * s.theta;
  s.us = M_u() * s.theta;
  s.ys = basis_.N * s.theta;
  s.value = std::max(0.0, r.value + constant);
  s.kkt = kkt_residuals(qp, r);
  return s;
}

Vec MpcController::control_law(const Vec& x, const PnSolution& solution) const {
  return k_ * (x - solution.xbar0) + solution.inputs.col(0);
}

Vec MpcController::control_law(const Vec& x, const Vec& y_target) const {
  return control_law(x, solve_pn(x, y_target));
}

TargetState MpcController::target_projection(const Vec& y_target) const {
  if (y_target.size() != model_.outputs()) {
    throw Error(ErrorCode::InvalidArgument, "target_projection: target dimension mismatch");
  }
  const Eigen::Index m = model_.inputs();
  const Mat& nt = basis_.N;
  const QpProblem qp(2.0 * (nt.transpose() * nt + 1e-9 * Mat::Identity(m, m)),
                     -2.0 * nt.transpose() * y_target, theta_set_.normals(), theta_set_.offsets(),
                     Mat(0, m), Vec(0));
  const QpResult r = qp_solve(qp);
  if (r.status != QpStatus::Optimal) {
    throw Error(ErrorCode::Infeasible, "target projection QP failed");
  }
  TargetState t;
  t.target = y_target;
  t.theta = r.z;
  t.xs = M_x() * r.z;
  t.us = M_u() * r.z;
  t.ys = nt * r.z;
  return t;
}

}  // namespace esilc
