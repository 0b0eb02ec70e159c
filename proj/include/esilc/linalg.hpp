#pragma once

#include <Eigen/Dense>

#include "esilc/tolerances.hpp"

namespace esilc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Throws InvalidArgument if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Mat>& m, const char* what);

/// Induced infinity norm (maximum absolute row sum).
double norm_inf(const Eigen::Ref<const Mat>& m);

/// True when `m` is symmetric and admits a Cholesky factorization.
bool is_positive_definite(const Eigen::Ref<const Mat>& m);

/// Solves P - A_cl' P A_cl = Q by Kronecker vectorization.
/// Throws SingularSystem when (I - A_cl' (x) A_cl') is numerically singular.
Mat solve_dlyap(const Eigen::Ref<const Mat>& a_cl, const Eigen::Ref<const Mat>& q,
                const Tolerances& tol = kTol);

/// Schur stability test without eigenvalues: solve the Lyapunov equation with
/// Q = I for A_cl scaled by 1/(1 - margin) and check the solution is positive
/// definite. A spectral radius within `tol.schur_margin` of one reports false.
bool is_schur(const Eigen::Ref<const Mat>& a_cl, const Tolerances& tol = kTol);

struct LqrResult {
  Mat gain;      // u = K x (sign included)
  Mat riccati;   // stabilizing DARE solution
};

/// Discrete LQR by fixed-point Riccati iteration.
/// Throws NoConvergence when the iteration does not settle or the resulting
/// closed loop is not Schur.
LqrResult dlqr(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b,
               const Eigen::Ref<const Mat>& q, const Eigen::Ref<const Mat>& r,
               const Tolerances& tol = kTol);

/// Rank of the controllability matrix [B, AB, ..., A^{n-1}B] equals n.
bool is_controllable(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b);

}  // namespace esilc
