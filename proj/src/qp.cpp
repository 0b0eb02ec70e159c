#include "esilc/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "esilc/error.hpp"

namespace esilc {

QpProblem::QpProblem(Mat hessian, Vec linear, Mat g, Vec h_rhs, Mat e, Vec f_rhs)
    : H(0.5 * (hessian + hessian.transpose())),
      q(std::move(linear)),
      G(std::move(g)),
      h(std::move(h_rhs)),
      E(std::move(e)),
      f(std::move(f_rhs)) {}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Active constraints are kept as indices into the stacked list
// [equalities; inequalities]. Normals use the ">=" convention n'z >= b:
// equality k -> (E_k', f_k), inequality i -> (-G_i', -h_i).
struct ActiveSet {
  std::vector<Eigen::Index> index;
  std::vector<double> multiplier;
};

class Solver {
 public:
  Solver(const QpProblem& p, const Tolerances& tol) : p_(p), tol_(tol) {
    n_ = p.q.size();
    me_ = p.E.rows();
    mi_ = p.G.rows();
    h_ = 0.5 * (p.H + p.H.transpose());
    llt_.compute(h_);
    if (llt_.info() != Eigen::Success) {
      const double ridge = 1e-10 * std::max(1.0, norm_inf(h_));
      h_ += ridge * Mat::Identity(n_, n_);
      llt_.compute(h_);
      if (llt_.info() != Eigen::Success) {
        throw Error(ErrorCode::InvalidArgument, "qp_solve: Hessian is not positive semidefinite");
      }
    }
  }

  Vec normal(Eigen::Index c) const {
    if (c < me_) return p_.E.row(c).transpose();
    return -p_.G.row(c - me_).transpose();
  }
  double offset(Eigen::Index c) const { return c < me_ ? p_.f(c) : -p_.h(c - me_); }

  Mat normals(const ActiveSet& a) const {
    Mat n(n_, static_cast<Eigen::Index>(a.index.size()));
    for (std::size_t j = 0; j < a.index.size(); ++j) n.col(static_cast<Eigen::Index>(j)) = normal(a.index[j]);
    return n;
  }

  // Solves [H N; N' 0][s; r] = [v; 0].
  bool step(const ActiveSet& a, const Vec& v, Vec& s, Vec& r) const {
    const Vec hv = llt_.solve(v);
    if (a.index.empty()) {
      s = hv;
      r.resize(0);
      return true;
    }
    const Mat n = normals(a);
    const Mat hn = llt_.solve(n);
    const Mat m = n.transpose() * hn;
    Eigen::LLT<Mat> mllt(m);
    if (mllt.info() != Eigen::Success) return false;
    r = mllt.solve(n.transpose() * hv);
    s = hv - hn * r;
    return true;
  }

  // Equality-constrained minimizer on the active set: returns z and the ">="
  // multipliers u with H z + q = N u.
  bool solve_active(const ActiveSet& a, Vec& z, Vec& u) const {
    const Vec z0 = llt_.solve(-p_.q);
    if (a.index.empty()) {
      z = z0;
      u.resize(0);
      return true;
    }
    const Mat n = normals(a);
    const Mat hn = llt_.solve(n);
    const Mat m = n.transpose() * hn;
    Eigen::LLT<Mat> mllt(m);
    if (mllt.info() != Eigen::Success) return false;
    Vec b(n.cols());
    for (Eigen::Index j = 0; j < n.cols(); ++j) b(j) = offset(a.index[static_cast<std::size_t>(j)]);
    u = mllt.solve(b - n.transpose() * z0);
    z = z0 + hn * u;
    return z.allFinite() && u.allFinite();
  }

  double primal_violation(const Vec& z) const {
    double v = 0.0;
    if (mi_ > 0) v = std::max(v, (p_.G * z - p_.h).maxCoeff());
    if (me_ > 0) v = std::max(v, (p_.E * z - p_.f).cwiseAbs().maxCoeff());
    return v;
  }

  QpResult run() {
    QpResult out;
    const int budget = 10 * static_cast<int>(mi_ + me_ + n_) + 100;
    ActiveSet active;
    Vec z;
    Vec u;

    for (Eigen::Index k = 0; k < me_; ++k) {
      active.index.push_back(k);
      active.multiplier.push_back(0.0);
    }
    if (!solve_active(active, z, u)) {
      throw Error(ErrorCode::InvalidArgument, "qp_solve: equality constraints are linearly dependent");
    }
    for (std::size_t j = 0; j < active.index.size(); ++j) active.multiplier[j] = u(static_cast<Eigen::Index>(j));
    if (me_ > 0 && (p_.E * z - p_.f).cwiseAbs().maxCoeff() > tol_.qp_kkt) {
      out.status = QpStatus::Infeasible;
      return out;
    }

    std::vector<char> is_active(static_cast<std::size_t>(mi_), 0);
    int iterations = 0;
    for (;;) {
      // Most violated inactive inequality.
      Eigen::Index pick = -1;
      double worst = -1e-11;
      for (Eigen::Index i = 0; i < mi_; ++i) {
        if (is_active[static_cast<std::size_t>(i)]) continue;
        const double slack = p_.h(i) - p_.G.row(i).dot(z);
        const double scale = std::max(1.0, std::abs(p_.h(i)));
        if (slack / scale < worst) {
          worst = slack / scale;
          pick = i;
        }
      }
      if (pick < 0) break;

      const Eigen::Index cidx = me_ + pick;
      const Vec np = normal(cidx);
      double u_new = 0.0;
      bool added = false;
      while (!added) {
        if (++iterations > budget) {
          out.status = QpStatus::MaxIter;
          out.z = z;
          out.iterations = iterations;
          return out;
        }
        Vec s;
        Vec r;
        if (!step(active, np, s, r)) {
          throw Error(ErrorCode::SingularSystem, "qp_solve: active normals became dependent");
        }
        // Dual step bound from active inequalities.
        double t1 = kInf;
        std::size_t drop = 0;
        for (std::size_t j = 0; j < active.index.size(); ++j) {
          if (active.index[j] < me_) continue;
          const double rj = r(static_cast<Eigen::Index>(j));
          if (rj > 1e-12) {
            const double ratio = active.multiplier[j] / rj;
            if (ratio < t1) {
              t1 = ratio;
              drop = j;
            }
          }
        }
        // Primal step to make the picked constraint active.
        const double curvature = s.dot(np);
        const double scale = llt_.solve(np).dot(np);
        double t2 = kInf;
        if (curvature > 1e-10 * scale) {
          t2 = (offset(cidx) - np.dot(z)) / curvature;
        }
        if (t1 == kInf && t2 == kInf) {
          out.status = QpStatus::Infeasible;
          out.iterations = iterations;
          return out;
        }
        const double t = std::min(t1, t2);
        if (t2 < kInf) z += t * s;
        for (std::size_t j = 0; j < active.index.size(); ++j) {
          active.multiplier[j] -= t * r(static_cast<Eigen::Index>(j));
        }
        u_new += t;
        if (t2 <= t1) {
          active.index.push_back(cidx);
          active.multiplier.push_back(u_new);
          is_active[static_cast<std::size_t>(pick)] = 1;
          added = true;
        } else {
          is_active[static_cast<std::size_t>(active.index[drop] - me_)] = 0;
          active.index.erase(active.index.begin() + static_cast<std::ptrdiff_t>(drop));
          active.multiplier.erase(active.multiplier.begin() + static_cast<std::ptrdiff_t>(drop));
        }
      }
    }

    // Polish: re-solve the final active-set KKT system from scratch.
    Vec zp;
    Vec up;
    if (solve_active(active, zp, up)) {
      bool ok = primal_violation(zp) <= std::max(primal_violation(z), 1e-12);
      for (std::size_t j = 0; j < active.index.size() && ok; ++j) {
        if (active.index[j] >= me_ && up(static_cast<Eigen::Index>(j)) < -1e-12) ok = false;
      }
      if (ok) {
        z = zp;
        for (std::size_t j = 0; j < active.index.size(); ++j) active.multiplier[j] = up(static_cast<Eigen::Index>(j));
      }
    }

    out.status = QpStatus::Optimal;
    out.z = z;
    out.iterations = iterations;
    out.ineq_multipliers = Vec::Zero(mi_);
    out.eq_multipliers = Vec::Zero(me_);
    for (std::size_t j = 0; j < active.index.size(); ++j) {
      const Eigen::Index c = active.index[j];
      // Convert to the convention  H z + q + G'lambda + E'mu = 0.
      if (c < me_) {
        out.eq_multipliers(c) = -active.multiplier[j];
      } else {
        out.ineq_multipliers(c - me_) = std::max(0.0, active.multiplier[j]);
      }
    }
    out.value = 0.5 * z.dot(p_.H * z) + p_.q.dot(z);
    return out;
  }

 private:
  const QpProblem& p_;
  const Tolerances& tol_;
  Eigen::Index n_ = 0;
  Eigen::Index me_ = 0;
  Eigen::Index mi_ = 0;
  Mat h_;
  Eigen::LLT<Mat> llt_;
};

}  // namespace

QpResult qp_solve(const QpProblem& problem, const Tolerances& tol) {
  const Eigen::Index n = problem.q.size();
  if (problem.H.rows() != n || problem.H.cols() != n ||
      (problem.G.rows() > 0 && problem.G.cols() != n) || problem.h.size() != problem.G.rows() ||
      (problem.E.rows() > 0 && problem.E.cols() != n) || problem.f.size() != problem.E.rows()) {
    throw Error(ErrorCode::InvalidArgument, "qp_solve: inconsistent dimensions");
  }
  require_finite(problem.H, "H");
  require_finite(problem.q, "q");
  require_finite(problem.G, "G");
  require_finite(problem.h, "h");
  require_finite(problem.E, "E");
  require_finite(problem.f, "f");
  Solver solver(problem, tol);
  return solver.run();
}

KktResiduals kkt_residuals(const QpProblem& p, const QpResult& r) {
  KktResiduals k;
  Vec grad = p.H * r.z + p.q;
  if (p.G.rows() > 0) grad += p.G.transpose() * r.ineq_multipliers;
  if (p.E.rows() > 0) grad += p.E.transpose() * r.eq_multipliers;
  k.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (p.G.rows() > 0) {
    const Vec slack = p.h - p.G * r.z;
    k.primal = std::max(0.0, (-slack).maxCoeff());
    k.complementarity = r.ineq_multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff();
    k.dual = std::max(0.0, (-r.ineq_multipliers).maxCoeff());
  }
  if (p.E.rows() > 0) {
    k.primal = std::max(k.primal, (p.E * r.z - p.f).cwiseAbs().maxCoeff());
  }
  return k;
}

}  // namespace esilc
