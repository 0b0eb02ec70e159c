#include "esilc/linalg.hpp"

#include <cmath>

#include <fmt/format.h>

#include "esilc/error.hpp"

namespace esilc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::CycleLimit: return "CycleLimit";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::EmptyDifference: return "EmptyDifference";
    case ErrorCode::NotContractive: return "NotContractive";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::NotFinitelyDetermined: return "NotFinitelyDetermined";
    case ErrorCode::DegenerateSteadySpace: return "DegenerateSteadySpace";
    case ErrorCode::Uncontrollable: return "Uncontrollable";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::UnknownPoint: return "UnknownPoint";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

void require_finite(const Eigen::Ref<const Mat>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("{} has non-finite entries", what));
  }
}

double norm_inf(const Eigen::Ref<const Mat>& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

bool is_positive_definite(const Eigen::Ref<const Mat>& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, norm_inf(m))) {
    return false;
  }
  Eigen::LLT<Mat> llt(m);
  return llt.info() == Eigen::Success;
}

Mat solve_dlyap(const Eigen::Ref<const Mat>& a_cl, const Eigen::Ref<const Mat>& q,
                const Tolerances& tol) {
  const Eigen::Index n = a_cl.rows();
  if (a_cl.cols() != n || q.rows() != n || q.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "solve_dlyap: dimension mismatch");
  }
  require_finite(a_cl, "A_cl");
  require_finite(q, "Q");

  // vec(A' P A) = (A' (x) A') vec(P) for column-major vec.
  const Eigen::Index nn = n * n;
  Mat kron = Mat::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) -= a_cl(j, i) * a_cl.transpose();
    }
  }
  Eigen::FullPivLU<Mat> lu(kron);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw Error(ErrorCode::SingularSystem,
                "Lyapunov operator is singular (closed loop has a unit-modulus eigenvalue pair)");
  }
  const Mat qs = 0.5 * (q + q.transpose());
  const Vec rhs = Eigen::Map<const Vec>(qs.data(), nn);
  Vec sol = lu.solve(rhs);
  // One refinement pass keeps the residual at the contract level for
  // moderately conditioned operators.
  sol += lu.solve(rhs - kron * sol);

  Mat p = Eigen::Map<Mat>(sol.data(), n, n);
  p = 0.5 * (p + p.transpose());
  if (!p.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "Lyapunov solution is not finite");
  }
  const double residual = norm_inf(p - a_cl.transpose() * p * a_cl - qs);
  if (residual > tol.lyapunov_residual * std::max(1.0, norm_inf(qs)) * std::max(1.0, norm_inf(p))) {
    throw Error(ErrorCode::SingularSystem,
                fmt::format("Lyapunov residual {:.3e} above tolerance", residual));
  }
  return p;
}

bool is_schur(const Eigen::Ref<const Mat>& a_cl, const Tolerances& tol) {
  if (a_cl.rows() != a_cl.cols() || a_cl.rows() == 0 || !a_cl.allFinite()) return false;
  const Mat scaled = a_cl / (1.0 - tol.schur_margin);
  try {
    const Mat p = solve_dlyap(scaled, Mat::Identity(a_cl.rows(), a_cl.cols()), tol);
    Eigen::LLT<Mat> llt(p);
    return llt.info() == Eigen::Success;
  } catch (const Error&) {
    return false;
  }
}

LqrResult dlqr(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b,
               const Eigen::Ref<const Mat>& q, const Eigen::Ref<const Mat>& r,
               const Tolerances& tol) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m ||
      r.cols() != m) {
    throw Error(ErrorCode::InvalidArgument, "dlqr: dimension mismatch");
  }
  require_finite(a, "A");
  require_finite(b, "B");
  require_finite(q, "Q");
  require_finite(r, "R");
  if (!is_positive_definite(r)) {
    throw Error(ErrorCode::InvalidArgument, "dlqr: R must be positive definite");
  }
  const Mat qs = 0.5 * (q + q.transpose());

  Mat p = qs;
  bool converged = false;
  for (int it = 0; it < tol.riccati_max_iter; ++it) {
    const Mat bp = b.transpose() * p;
    const Mat s = r + bp * b;
    const Mat gain_part = s.ldlt().solve(bp * a);
    Mat next = qs + a.transpose() * p * a - (bp * a).transpose() * gain_part;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double step = norm_inf(next - p);
    p = std::move(next);
    if (step < tol.riccati_step * std::max(1.0, norm_inf(p))) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NoConvergence, "Riccati iteration did not converge");
  }
  const Mat bp = b.transpose() * p;
  Mat k = -(r + bp * b).ldlt().solve(bp * a);
  if (!is_schur(a + b * k, tol)) {
    throw Error(ErrorCode::NoConvergence, "Riccati fixed point does not stabilize (A, B)");
  }
  return {std::move(k), std::move(p)};
}

bool is_controllable(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  Mat ctrb(n, n * m);
  Mat block = b;
  for (Eigen::Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * m, m) = block;
    block = a * block;
  }
  Eigen::JacobiSVD<Mat> svd(ctrb);
  const auto& sv = svd.singularValues();
  if (sv.size() < n) return false;
  return sv(n - 1) > 1e-10 * std::max(1.0, sv(0));
}

}  // namespace esilc
