#pragma once

#include "esilc/linalg.hpp"

namespace esilc {

/// minimize 1/2 z'Hz + q'z  subject to  G z <= h,  E z = f.
struct QpProblem {
  Mat H;
  Vec q;
  Mat G;
  Vec h;
  Mat E;
  Vec f;

  QpProblem() = default;
  QpProblem(Mat hessian, Vec linear, Mat g, Vec h_rhs, Mat e, Vec f_rhs);

  Eigen::Index num_vars() const { return q.size(); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct QpResult {
  QpStatus status = QpStatus::Infeasible;
  Vec z;
  double value = 0.0;
  Vec ineq_multipliers;  // >= 0, one per row of G
  Vec eq_multipliers;    // one per row of E
  int iterations = 0;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;  // most negative inequality multiplier, as a positive number
};

/// Goldfarb-Idnani dual active-set method. The active-set KKT systems are
/// re-solved from a fresh Cholesky factorization at every step. A Hessian that
/// is only semidefinite gets a 1e-10 relative ridge.
QpResult qp_solve(const QpProblem& problem, const Tolerances& tol = kTol);

KktResiduals kkt_residuals(const QpProblem& problem, const QpResult& result);

}  // namespace esilc
