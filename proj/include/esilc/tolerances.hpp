#pragma once

namespace esilc {

// Numerical thresholds shared by every module. Defaults are the documented
// contract values; tests pin against these.
struct Tolerances {
  double symmetry = 1e-10;
  double lyapunov_residual = 1e-8;     // relative to max(1, |Q|_inf)
  double riccati_step = 1e-10;         // successive-iterate difference
  int riccati_max_iter = 10000;
  double schur_margin = 1e-9;          // rho >= 1 - margin reports false
  double lp_feasibility = 1e-9;
  double lp_pivot = 1e-11;
  double qp_kkt = 1e-8;
  double contains = 1e-9;
  double redundancy = 1e-9;
  double invariance = 1e-9;
};

inline constexpr Tolerances kTol{};

}  // namespace esilc
