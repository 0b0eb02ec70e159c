#include "esilc/polytope.hpp"

#include <cmath>

#include <fmt/format.h>

#include "esilc/error.hpp"
#include "esilc/lp.hpp"

namespace esilc {

namespace {

constexpr double kZeroRow = 1e-14;
constexpr double kSameNormal = 1e-12;

bool same_direction(const Vec& a, const Vec& b) {
  return (a - b).cwiseAbs().maxCoeff() <= kSameNormal;
}

}  // namespace

Polytope::Polytope(Mat normals, Vec offsets) : dim_(normals.cols()) {
  if (normals.rows() != offsets.size()) {
    throw Error(ErrorCode::InvalidArgument, "Polytope: normals/offsets row mismatch");
  }
  require_finite(normals, "polytope normals");
  require_finite(offsets, "polytope offsets");

  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(normals.rows()));
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const double scale = normals.row(i).cwiseAbs().maxCoeff();
    if (scale <= kZeroRow) {
      if (offsets(i) < -1e-12) empty_ = true;
      continue;
    }
    normals.row(i) /= scale;
    offsets(i) /= scale;
    bool duplicate = false;
    for (Eigen::Index k : keep) {
      if (same_direction(normals.row(k).transpose(), normals.row(i).transpose())) {
        offsets(k) = std::min(offsets(k), offsets(i));
        duplicate = true;
        break;
      }
    }
    if (!duplicate) keep.push_back(i);
  }
  normals_.resize(static_cast<Eigen::Index>(keep.size()), dim_);
  offsets_.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    normals_.row(static_cast<Eigen::Index>(r)) = normals.row(keep[r]);
    offsets_(static_cast<Eigen::Index>(r)) = offsets(keep[r]);
  }
}

Polytope Polytope::box(const Vec& lower, const Vec& upper) {
  const Eigen::Index n = lower.size();
  if (upper.size() != n) throw Error(ErrorCode::InvalidArgument, "box: bound size mismatch");
  Mat d(2 * n, n);
  Vec c(2 * n);
  d << Mat::Identity(n, n), -Mat::Identity(n, n);
  c << upper, -lower;
  Polytope p(std::move(d), std::move(c));
  if ((upper - lower).minCoeff() < 0.0) p.empty_ = true;
  return p;
}

Polytope Polytope::box(Eigen::Index dim, double radius) {
  return box(Vec::Constant(dim, -radius), Vec::Constant(dim, radius));
}

Polytope Polytope::origin(Eigen::Index dim) { return box(dim, 0.0); }

Polytope Polytope::empty(Eigen::Index dim) {
  Polytope p = box(dim, 0.0);
  p.empty_ = true;
  return p;
}

Polytope Polytope::scaled(double s) const {
  Polytope p = *this;
  p.offsets_ *= s;
  return p;
}

Polytope Polytope::intersect(const Polytope& other) const {
  if (other.dim_ != dim_) throw Error(ErrorCode::InvalidArgument, "intersect: dimension mismatch");
  Mat d(num_facets() + other.num_facets(), dim_);
  Vec c(d.rows());
  d << normals_, other.normals_;
  c << offsets_, other.offsets_;
  Polytope p(std::move(d), std::move(c));
  p.empty_ = p.empty_ || empty_ || other.empty_;
  return p;
}

SupportOracle& SupportOracle::add(const Polytope& set) {
  return add(Mat::Identity(dim_, set.dim()), set);
}

SupportOracle& SupportOracle::add(const Mat& map, const Polytope& set) {
  if (map.rows() != dim_ || map.cols() != set.dim()) {
    throw Error(ErrorCode::InvalidArgument, "SupportOracle: map dimension mismatch");
  }
  terms_.push_back({map, set});
  return *this;
}

double support(const Polytope& set, const Vec& direction) {
  if (direction.size() != set.dim()) {
    throw Error(ErrorCode::InvalidArgument, "support: direction dimension mismatch");
  }
  if (set.flagged_empty()) throw Error(ErrorCode::EmptySet, "support of an empty polytope");
  if (set.num_facets() == 0) {
    if (direction.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    throw Error(ErrorCode::Unbounded, "support: polytope has no facets");
  }
  // Dual form: min c'y  s.t.  D'y = a, y >= 0. Only dim rows, so it stays
  // cheap for the tall constraint systems built by the set recursions.
  LpProblem lp;
  lp.c = set.offsets();
  lp.G.resize(0, set.num_facets());
  lp.h.resize(0);
  lp.E = set.normals().transpose();
  lp.f = direction;
  lp.nonnegative = true;
  const LpResult r = lp_solve(lp);
  if (r.status == LpStatus::Infeasible) {
    throw Error(ErrorCode::Unbounded, "support: polytope unbounded along the query direction");
  }
  if (r.status == LpStatus::Unbounded) {
    throw Error(ErrorCode::EmptySet, "support: polytope is empty");
  }
  return r.value;
}

double support(const SupportOracle& set, const Vec& direction) {
  double total = 0.0;
  for (const auto& term : set.terms()) {
    total += support(term.set, term.map.transpose() * direction);
  }
  return total;
}

bool is_nonempty(const Polytope& set) {
  if (set.flagged_empty()) return false;
  if (set.num_facets() == 0) return true;
  LpProblem lp;
  lp.c = Vec::Zero(set.dim());
  lp.G = set.normals();
  lp.h = set.offsets();
  lp.E.resize(0, set.dim());
  lp.f.resize(0);
  return lp_solve(lp).status == LpStatus::Optimal;
}

bool is_bounded(const Polytope& set) {
  try {
    for (Eigen::Index i = 0; i < set.dim(); ++i) {
      const Vec e = Vec::Unit(set.dim(), i);
      support(set, e);
      support(set, Vec(-e));
    }
  } catch (const Error& err) {
    if (err.code() == ErrorCode::Unbounded) return false;
    throw;
  }
  return true;
}

bool contains(const Polytope& set, const Vec& point, double tol) {
  if (set.flagged_empty()) return false;
  if (point.size() != set.dim()) {
    throw Error(ErrorCode::InvalidArgument, "contains: point dimension mismatch");
  }
  if (set.num_facets() == 0) return true;
  return ((set.normals() * point - set.offsets()).array() <= tol).all();
}

namespace {

template <typename SetT>
Polytope pontryagin_impl(const Polytope& outer, const SetT& sub) {
  if (outer.dim() != sub.dim()) {
    throw Error(ErrorCode::InvalidArgument, "pontryagin_diff: dimension mismatch");
  }
  Vec tightened = outer.offsets();
  for (Eigen::Index i = 0; i < outer.num_facets(); ++i) {
    tightened(i) -= support(sub, outer.normals().row(i).transpose());
  }
  Polytope result(outer.normals(), tightened);
  if (outer.flagged_empty() || !is_nonempty(result)) {
    throw Error(ErrorCode::EmptyDifference,
                "Pontryagin difference is empty: subtracted set does not fit inside the outer set");
  }
  return result;
}

template <typename SetT>
bool subset_impl(const SetT& inner, const Polytope& outer, double tol) {
  for (Eigen::Index i = 0; i < outer.num_facets(); ++i) {
    if (support(inner, outer.normals().row(i).transpose()) > outer.offsets()(i) + tol) return false;
  }
  return true;
}

}  // namespace

Polytope pontryagin_diff(const Polytope& outer, const Polytope& subtrahend) {
  return pontryagin_impl(outer, subtrahend);
}

Polytope pontryagin_diff(const Polytope& outer, const SupportOracle& subtrahend) {
  return pontryagin_impl(outer, subtrahend);
}

bool is_subset(const Polytope& inner, const Polytope& outer, double tol) {
  return subset_impl(inner, outer, tol);
}

bool is_subset(const SupportOracle& inner, const Polytope& outer, double tol) {
  return subset_impl(inner, outer, tol);
}

bool is_robust_invariant(const Mat& dynamics, const Polytope& set, const Polytope& disturbance,
                         double tol) {
  SupportOracle image(set.dim());
  image.add(dynamics, set).add(disturbance);
  return is_subset(image, set, tol);
}

bool is_invariant(const Mat& dynamics, const Polytope& set, double tol) {
  SupportOracle image(set.dim());
  image.add(dynamics, set);
  return is_subset(image, set, tol);
}

std::vector<Vec> default_template(Eigen::Index dim, const Polytope& shape) {
  std::vector<Vec> dirs;
  auto push = [&dirs](Vec d) {
    const double scale = d.cwiseAbs().maxCoeff();
    if (scale <= kZeroRow) return;
    d /= scale;
    for (const auto& existing : dirs) {
      if (same_direction(existing, d)) return;
    }
    dirs.push_back(std::move(d));
  };
  for (Eigen::Index i = 0; i < dim; ++i) {
    push(Vec::Unit(dim, i));
    push(-Vec::Unit(dim, i));
  }
  if (shape.dim() == dim) {
    for (Eigen::Index i = 0; i < shape.num_facets(); ++i) push(shape.normals().row(i).transpose());
  }
  return dirs;
}

RpiResult construct_rpi(const Mat& a_k, const Polytope& w, std::vector<Vec> directions,
                        const RpiOptions& options) {
  const Eigen::Index n = a_k.rows();
  if (a_k.cols() != n || w.dim() != n) {
    throw Error(ErrorCode::InvalidArgument, "construct_rpi: dimension mismatch");
  }
  if (!contains(w, Vec::Zero(n))) {
    throw Error(ErrorCode::InvalidArgument, "construct_rpi: disturbance set must contain the origin");
  }
  if (!is_schur(a_k)) {
    throw Error(ErrorCode::NotContractive, "construct_rpi: A_K is not Schur");
  }
  if (directions.empty()) directions = default_template(n, w);

  // Directions used for the contraction test A^s W subset alpha W: facets of W
  // plus the template.
  std::vector<Vec> probe = default_template(n, w);
  for (const auto& d : directions) probe.push_back(d);
  std::vector<double> probe_support(probe.size());
  for (std::size_t j = 0; j < probe.size(); ++j) probe_support[j] = support(w, probe[j]);

  constexpr double kTiny = 1e-12;
  int steps = 0;
  double alpha = 0.0;
  Mat power = a_k;  // A^s
  for (int s = 1; s <= options.max_steps; ++s) {
    double ratio = 0.0;
    for (std::size_t j = 0; j < probe.size() && std::isfinite(ratio); ++j) {
      const double hs = support(w, power.transpose() * probe[j]);
      if (probe_support[j] <= kTiny) {
        if (hs > kTiny) ratio = std::numeric_limits<double>::infinity();
      } else {
        ratio = std::max(ratio, hs / probe_support[j]);
      }
    }
    if (ratio <= options.alpha_max) {
      steps = s;
      alpha = ratio;
      break;
    }
    power = a_k * power;
  }
  if (steps == 0) {
    throw Error(ErrorCode::NotContractive,
                fmt::format("construct_rpi: no s <= {} with A_K^s W inside {} W", options.max_steps,
                            options.alpha_max));
  }

  std::vector<Mat> powers_t;  // (A^i)' for i < s
  powers_t.reserve(static_cast<std::size_t>(steps));
  Mat p = Mat::Identity(n, n);
  for (int i = 0; i < steps; ++i) {
    powers_t.push_back(p.transpose());
    p = a_k * p;
  }
  // Round 0 inflates with the tight alpha. A^s W lies inside alpha_max W as
  // well, so later rounds inflate with alpha_max: the exact inflated set then
  // has strictly positive invariance slack on every direction, which lets the
  // enriched template close the gap.
  double inflate = 1.0 / (1.0 - alpha);
  auto offset_for = [&](const Vec& d) {
    double acc = 0.0;
    for (const auto& pt : powers_t) acc += support(w, pt * d);
    return inflate * acc;
  };

  for (int round = 0; round <= options.enrichment_rounds; ++round) {
    if (round == 1) inflate = 1.0 / (1.0 - std::max(alpha, options.alpha_max));
    Mat normals(static_cast<Eigen::Index>(directions.size()), n);
    Vec offsets(normals.rows());
    for (std::size_t j = 0; j < directions.size(); ++j) {
      normals.row(static_cast<Eigen::Index>(j)) = directions[j].transpose();
      offsets(static_cast<Eigen::Index>(j)) = offset_for(directions[j]);
    }
    Polytope phi(std::move(normals), std::move(offsets));
    if (is_robust_invariant(a_k, phi, w, options.tol)) {
      return {std::move(phi), steps, round == 0 ? alpha : std::max(alpha, options.alpha_max), round};
    }
    // Enrich with the rows of D * A_K.
    const Mat enriched = phi.normals() * a_k;
    for (Eigen::Index i = 0; i < enriched.rows(); ++i) {
      Vec d = enriched.row(i).transpose();
      const double scale = d.cwiseAbs().maxCoeff();
      if (scale <= kZeroRow) continue;
      d /= scale;
      bool known = false;
      for (const auto& existing : directions) {
        if (same_direction(existing, d)) {
          known = true;
          break;
        }
      }
      if (!known) directions.push_back(std::move(d));
    }
  }
  throw Error(ErrorCode::VerificationFailed,
              "construct_rpi: invariance not certified after template enrichment");
}

InvariantSetResult max_invariant_set(const Mat& a_aug, const Polytope& constraint,
                                     Eigen::Index state_dim, int iteration_cap,
                                     double redundancy_tol) {
  const Eigen::Index dim = a_aug.rows();
  if (a_aug.cols() != dim || constraint.dim() != dim || state_dim < 1 || state_dim > dim) {
    throw Error(ErrorCode::InvalidArgument, "max_invariant_set: dimension mismatch");
  }
  const Eigen::Index params = dim - state_dim;
  if (params > 0) {
    const bool structured =
        a_aug.bottomLeftCorner(params, state_dim).cwiseAbs().maxCoeff() <= 1e-12 &&
        (a_aug.bottomRightCorner(params, params) - Mat::Identity(params, params)).cwiseAbs().maxCoeff() <=
            1e-12;
    if (!structured) {
      throw Error(ErrorCode::InvalidArgument,
                  "max_invariant_set: parameter block must be [0 I]");
    }
  }
  if (!is_schur(a_aug.topLeftCorner(state_dim, state_dim))) {
    throw Error(ErrorCode::InvalidArgument, "max_invariant_set: state block is not Schur");
  }
  if (!is_bounded(constraint)) {
    throw Error(ErrorCode::InvalidArgument, "max_invariant_set: constraint set is unbounded");
  }

  const Mat& c = constraint.normals();
  const Vec& rhs = constraint.offsets();
  Mat rows = c;
  Vec offs = rhs;
  Polytope current = constraint;
  Mat power = a_aug;
  for (int k = 1; k <= iteration_cap; ++k) {
    const Mat candidate = c * power;
    std::vector<Eigen::Index> fresh;
    for (Eigen::Index i = 0; i < candidate.rows(); ++i) {
      const Vec d = candidate.row(i).transpose();
      const double scale = d.cwiseAbs().maxCoeff();
      if (scale <= kZeroRow) {
        if (rhs(i) < -redundancy_tol) {
          throw Error(ErrorCode::EmptySet, "max_invariant_set: constraint excludes all points");
        }
        continue;
      }
      if (support(current, d) > rhs(i) + redundancy_tol * std::max(1.0, scale)) fresh.push_back(i);
    }
    if (fresh.empty()) {
      return {std::move(current), k};
    }
    const Eigen::Index old = rows.rows();
    rows.conservativeResize(old + static_cast<Eigen::Index>(fresh.size()), Eigen::NoChange);
    offs.conservativeResize(rows.rows());
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      rows.row(old + static_cast<Eigen::Index>(j)) = candidate.row(fresh[j]);
      offs(old + static_cast<Eigen::Index>(j)) = rhs(fresh[j]);
    }
    current = Polytope(rows, offs);
    power = power * a_aug;
  }
  throw Error(ErrorCode::NotFinitelyDetermined,
              fmt::format("max_invariant_set: not finitely determined within {} steps", iteration_cap));
}

}  // namespace esilc
