#pragma once

#include "esilc/linalg.hpp"

namespace esilc {

/// minimize c'z  subject to  G z <= h,  E z = f  (and z >= 0 if `nonnegative`).
///
/// Either system may be empty (zero rows). Variables are free unless
/// `nonnegative` is set, which lets callers hand over standard-form problems
/// without paying for the free-variable split.
struct LpProblem {
  Vec c;
  Mat G;
  Vec h;
  Mat E;
  Vec f;
  bool nonnegative = false;

  Eigen::Index num_vars() const { return c.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec z;
  double value = 0.0;
};

/// Dense two-phase simplex with Bland's anti-cycling rule. Throws CycleLimit if
/// the pivot budget is exhausted and InvalidArgument on inconsistent sizes or
/// non-finite data.
LpResult lp_solve(const LpProblem& problem, const Tolerances& tol = kTol);

}  // namespace esilc
