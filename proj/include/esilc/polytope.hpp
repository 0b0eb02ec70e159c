#pragma once

#include <vector>

#include "esilc/linalg.hpp"

namespace esilc {

/// Convex polyhedron {z : D z <= c} in H-representation.
///
/// Rows are scaled to unit infinity norm on construction; all-zero rows are
/// dropped (or flag the set empty when their offset is negative) and rows with
/// duplicate normals keep the smaller offset.
class Polytope {
 public:
  Polytope() = default;
  Polytope(Mat normals, Vec offsets);

  static Polytope box(const Vec& lower, const Vec& upper);
  static Polytope box(Eigen::Index dim, double radius);
  /// The singleton {0}, stored as a zero-radius box.
  static Polytope origin(Eigen::Index dim);
  static Polytope empty(Eigen::Index dim);

  const Mat& normals() const { return normals_; }
  const Vec& offsets() const { return offsets_; }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index num_facets() const { return normals_.rows(); }
  bool flagged_empty() const { return empty_; }

  /// {z : D z <= s c}; equals s * P when P contains the origin.
  Polytope scaled(double s) const;
  Polytope intersect(const Polytope& other) const;

 private:
  Mat normals_;
  Vec offsets_;
  Eigen::Index dim_ = 0;
  bool empty_ = false;
};

/// Minkowski sum of affine images M_i * S_i, queried only through support
/// values.
class SupportOracle {
 public:
  struct Term {
    Mat map;
    Polytope set;
  };

  explicit SupportOracle(Eigen::Index dim) : dim_(dim) {}

  SupportOracle& add(const Polytope& set);
  SupportOracle& add(const Mat& map, const Polytope& set);

  Eigen::Index dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  Eigen::Index dim_;
  std::vector<Term> terms_;
};

/// h_S(a) = max { a'z : z in S }. Throws Unbounded if S is unbounded along a
/// and EmptySet if S is empty.
double support(const Polytope& set, const Vec& direction);
double support(const SupportOracle& set, const Vec& direction);

/// Phase-one LP feasibility test.
bool is_nonempty(const Polytope& set);

/// Every coordinate direction has a finite support value in both signs.
bool is_bounded(const Polytope& set);

/// D z <= c + tol componentwise.
bool contains(const Polytope& set, const Vec& point, double tol = 1e-9);

/// A (-) S = {z : D z <= c - h_S(D_i)}. Throws EmptyDifference when the
/// result has no points.
Polytope pontryagin_diff(const Polytope& outer, const Polytope& subtrahend);
Polytope pontryagin_diff(const Polytope& outer, const SupportOracle& subtrahend);

/// inner is a subset of outer, certified by one support LP per facet of outer.
bool is_subset(const Polytope& inner, const Polytope& outer, double tol = 1e-9);
bool is_subset(const SupportOracle& inner, const Polytope& outer, double tol = 1e-9);

/// Robust invariance A Phi (+) W subset of Phi, checked facet by facet.
bool is_robust_invariant(const Mat& dynamics, const Polytope& set, const Polytope& disturbance,
                         double tol = 1e-9);

/// Plain invariance A O subset of O.
bool is_invariant(const Mat& dynamics, const Polytope& set, double tol = 1e-9);

/// +-e_i for every axis plus the facet normals of `shape`, deduplicated.
std::vector<Vec> default_template(Eigen::Index dim, const Polytope& shape);

struct RpiOptions {
  double alpha_max = 0.1;
  int max_steps = 200;
  int enrichment_rounds = 5;
  double tol = 1e-9;
};

struct RpiResult {
  Polytope set;
  int steps = 0;       // s
  double alpha = 0.0;  // inflation parameter actually used (>= contraction at s)
  int enrichment_rounds = 0;
};

/// Outer approximation of the minimal robust positively invariant set for
/// e+ = A_K e + w, w in W: template polytope with offsets
/// (1 - alpha)^-1 * sum_{i<s} h_W((A_K^i)' d), verified invariant before it is
/// returned. Failed verification adds the directions A_K' d of every facet and
/// retries.
/// Throws NotContractive (s above max_steps) or VerificationFailed.
RpiResult construct_rpi(const Mat& a_k, const Polytope& disturbance, std::vector<Vec> directions,
                        const RpiOptions& options = {});

struct InvariantSetResult {
  Polytope set;
  int determinedness_index = 0;  // first k whose constraints were all redundant
};

/// Maximal admissible invariant set of w+ = A_aug w inside `constraint`.
///
/// A_aug must have the block form [A_x, B; 0, I] where the leading
/// `state_dim` coordinates evolve through a Schur block A_x and the trailing
/// ones are constant parameters. Throws InvalidArgument when that structure is
/// violated and NotFinitelyDetermined when more than `iteration_cap` steps
/// are needed.
InvariantSetResult max_invariant_set(const Mat& a_aug, const Polytope& constraint,
                                     Eigen::Index state_dim, int iteration_cap = 500,
                                     double redundancy_tol = 1e-9);

}  // namespace esilc
