#include "esilc/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "esilc/error.hpp"

namespace esilc {
namespace {

// Dense simplex tableau over the standard form  A x = b, x >= 0, b >= 0.
// Row `rows_` holds reduced costs; column `cols_` holds the right-hand side.
class Tableau {
 public:
  Tableau(Mat a, const Vec& b, std::vector<Eigen::Index> basis, Eigen::Index num_structural)
      : rows_(a.rows()), cols_(a.cols()), structural_(num_structural), basis_(std::move(basis)) {
    t_ = Mat::Zero(rows_ + 1, cols_ + 1);
    t_.topLeftCorner(rows_, cols_) = a;
    t_.col(cols_).head(rows_) = b;
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double factor = t_(i, c);
      if (factor != 0.0) t_.row(i) -= factor * t_.row(r);
    }
    t_.col(c).setZero();
    t_(r, c) = 1.0;
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Installs reduced costs for `cost` (length cols_) given the current basis.
  void set_cost(const Vec& cost) {
    t_.row(rows_).setZero();
    t_.row(rows_).head(cols_) = cost.transpose();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = cost(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(rows_) -= cb * t_.row(i);
    }
  }

  enum class Outcome { Optimal, Unbounded };

  // Bland's rule: lowest-index improving column enters; among tied ratios the
  // lowest-index basic variable leaves.
  Outcome run(Eigen::Index allowed_cols, long& pivots, long pivot_budget, const Tolerances& tol) {
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (t_(rows_, j) < -1e-10) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return Outcome::Optimal;

      Eigen::Index leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double coef = t_(i, enter);
        if (coef <= tol.lp_pivot) continue;
        const double ratio = t_(i, cols_) / coef;
        if (leave < 0 || ratio < best_ratio - 1e-13) {
          best_ratio = ratio;
          leave = i;
        } else if (ratio <= best_ratio + 1e-13 &&
                   basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
          leave = i;
        }
      }
      if (leave < 0) return Outcome::Unbounded;
      if (++pivots > pivot_budget) {
        throw Error(ErrorCode::CycleLimit, fmt::format("simplex exceeded {} pivots", pivot_budget));
      }
      pivot(leave, enter);
      // Clamp roundoff on the right-hand side; feasibility is maintained by
      // the ratio test.
      for (Eigen::Index i = 0; i < rows_; ++i) {
        if (t_(i, cols_) < 0.0 && t_(i, cols_) > -1e-12) t_(i, cols_) = 0.0;
      }
    }
  }

  double objective() const { return -t_(rows_, cols_); }
  double rhs(Eigen::Index i) const { return t_(i, cols_); }
  double at(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index structural() const { return structural_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  Eigen::Index structural_;
  std::vector<Eigen::Index> basis_;
  Mat t_;
};

}  // namespace

LpResult lp_solve(const LpProblem& p, const Tolerances& tol) {
  const Eigen::Index n = p.c.size();
  const Eigen::Index mi = p.G.rows();
  const Eigen::Index me = p.E.rows();
  if ((mi > 0 && p.G.cols() != n) || p.h.size() != mi || (me > 0 && p.E.cols() != n) ||
      p.f.size() != me) {
    throw Error(ErrorCode::InvalidArgument, "lp_solve: inconsistent dimensions");
  }
  require_finite(p.c, "c");
  require_finite(p.G, "G");
  require_finite(p.h, "h");
  require_finite(p.E, "E");
  require_finite(p.f, "f");

  const Eigen::Index nstruct = p.nonnegative ? n : 2 * n;
  const Eigen::Index rows = mi + me;
  const Eigen::Index ncols_real = nstruct + mi;

  Mat a = Mat::Zero(rows, ncols_real);
  Vec b(rows);
  if (mi > 0) {
    a.block(0, 0, mi, n) = p.G;
    if (!p.nonnegative) a.block(0, n, mi, n) = -p.G;
    a.block(0, nstruct, mi, mi).setIdentity();
    b.head(mi) = p.h;
  }
  if (me > 0) {
    a.block(mi, 0, me, n) = p.E;
    if (!p.nonnegative) a.block(mi, n, me, n) = -p.E;
    b.tail(me) = p.f;
  }

  // Rows whose slack can start in the basis need no artificial variable.
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows), -1);
  std::vector<Eigen::Index> art_rows;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (b(i) < 0.0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
    }
    if (i < mi && a(i, nstruct + i) > 0.0) {
      basis[static_cast<std::size_t>(i)] = nstruct + i;
    } else {
      art_rows.push_back(i);
    }
  }
  const Eigen::Index nart = static_cast<Eigen::Index>(art_rows.size());
  Mat full(rows, ncols_real + nart);
  full << a, Mat::Zero(rows, nart);
  for (Eigen::Index k = 0; k < nart; ++k) {
    const Eigen::Index i = art_rows[static_cast<std::size_t>(k)];
    full(i, ncols_real + k) = 1.0;
    basis[static_cast<std::size_t>(i)] = ncols_real + k;
  }

  Tableau tab(std::move(full), b, std::move(basis), nstruct);
  long pivots = 0;
  const long budget = 50 * (rows + ncols_real + nart) + 1000;

  if (nart > 0) {
    Vec phase1 = Vec::Zero(ncols_real + nart);
    phase1.tail(nart).setOnes();
    tab.set_cost(phase1);
    tab.run(ncols_real + nart, pivots, budget, tol);
    if (tab.objective() > tol.lp_feasibility * std::max(1.0, b.cwiseAbs().maxCoeff())) {
      return {LpStatus::Infeasible, Vec(), 0.0};
    }
    // Drive remaining zero-level artificials out of the basis; rows where that
    // is impossible are linearly dependent and stay inert.
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < ncols_real) continue;
      for (Eigen::Index j = 0; j < ncols_real; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }

  Vec cost = Vec::Zero(ncols_real + nart);
  cost.head(n) = p.c;
  if (!p.nonnegative) cost.segment(n, n) = -p.c;
  tab.set_cost(cost);
  if (tab.run(ncols_real, pivots, budget, tol) == Tableau::Outcome::Unbounded) {
    return {LpStatus::Unbounded, Vec(), -std::numeric_limits<double>::infinity()};
  }

  // Recover the basic solution from the original data for accuracy.
  Vec x = Vec::Zero(ncols_real);
  std::vector<Eigen::Index> kept_rows;
  std::vector<Eigen::Index> basic_cols;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index col = tab.basis()[static_cast<std::size_t>(i)];
    if (col < ncols_real) {
      x(col) = std::max(0.0, tab.rhs(i));
      kept_rows.push_back(i);
      basic_cols.push_back(col);
    }
  }
  if (!basic_cols.empty()) {
    const auto nb = static_cast<Eigen::Index>(basic_cols.size());
    Mat sub(nb, nb);
    Vec rhs(nb);
    for (Eigen::Index r = 0; r < nb; ++r) {
      for (Eigen::Index c = 0; c < nb; ++c) {
        sub(r, c) = a(kept_rows[static_cast<std::size_t>(r)], basic_cols[static_cast<std::size_t>(c)]);
      }
      rhs(r) = b(kept_rows[static_cast<std::size_t>(r)]);
    }
    Eigen::PartialPivLU<Mat> lu(sub);
    const Vec refined = lu.solve(rhs);
    if (refined.allFinite() && (sub * refined - rhs).cwiseAbs().maxCoeff() < 1e-9) {
      for (Eigen::Index c = 0; c < nb; ++c) {
        x(basic_cols[static_cast<std::size_t>(c)]) = std::max(0.0, refined(c));
      }
    }
  }

  LpResult result;
  result.status = LpStatus::Optimal;
  result.z = p.nonnegative ? Vec(x.head(n)) : Vec(x.head(n) - x.segment(n, n));
  result.value = p.c.dot(result.z);
  return result;
}

}  // namespace esilc
