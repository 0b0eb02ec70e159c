#pragma once

#include <optional>

#include "esilc/linalg.hpp"
#include "esilc/polytope.hpp"
#include "esilc/qp.hpp"

namespace esilc {

/// x+ = A x + B u,  y = C x + D u.
struct PlantModel {
  Mat A;
  Mat B;
  Mat C;
  Mat D;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  /// Throws InvalidArgument on inconsistent or non-finite matrices.
  void validate() const;
};

/// Additive model error (dA, dB). Flattened as row-major dA followed by
/// row-major dB, length n (n + m).
struct Uncertainty {
  Mat dA;
  Mat dB;

  static Uncertainty zero(Eigen::Index n, Eigen::Index m);
  static Uncertainty unflatten(const Vec& flat, Eigen::Index n, Eigen::Index m);
  Vec flatten() const;
};

struct Tuning {
  Mat Q;  // state weight
  Mat R;  // input weight
  Mat T;  // steady-state output offset weight
  int horizon = 10;
  double lambda = 0.99;  // steady-state contraction for the terminal set

  void validate(Eigen::Index n, Eigen::Index m, Eigen::Index p) const;
};

/// Orthonormal basis of the steady-state manifold: (x_s, u_s) = M theta,
/// y_s = N theta.
struct SteadyStateBasis {
  Mat M;  // (n + m) x m
  Mat N;  // p x m
};

SteadyStateBasis steady_state_basis(const PlantModel& model, const Uncertainty& estimate);

/// Largest infinity norm over a bounded polytope (2n support LPs).
double max_abs_coordinate(const Polytope& set);

/// Radius rho of the box W = {w : |w|_inf <= rho} bounding
/// (dA - dA_hat) x + (dB - dB_hat) u over x in X, u in U for every admissible
/// true model error.
double disturbance_radius(double ell_a, double ell_b, const Uncertainty& estimate,
                          const Polytope& state_set, const Polytope& input_set);
Polytope disturbance_box(double ell_a, double ell_b, const Uncertainty& estimate,
                         const Polytope& state_set, const Polytope& input_set);

struct TargetState {
  Vec target;  // y_t
  Vec theta;
  Vec xs;
  Vec us;
  Vec ys;
};

struct PnSolution {
  Vec xbar0;
  Vec theta;
  Mat inputs;   // m x N, column k is u_bar(k)
  Mat states;   // n x (N + 1), column k is x_bar(k)
  Vec xs;
  Vec us;
  Vec ys;
  double value = 0.0;
  KktResiduals kkt;
};

struct SynthesisOptions {
  RpiOptions rpi;
  int invariant_cap = 500;
};

/// Robust tube tracking MPC built for one uncertainty estimate. Immutable
/// once synthesized; all queries are const.
class MpcController {
 public:
  const PlantModel& model() const { return model_; }
  const Uncertainty& estimate() const { return estimate_; }
  const Tuning& tuning() const { return tuning_; }
  const Mat& A_hat() const { return a_hat_; }
  const Mat& B_hat() const { return b_hat_; }
  const Mat& K() const { return k_; }
  const Mat& K_bar() const { return k_bar_; }
  const Mat& P() const { return p_; }
  const Mat& L() const { return l_; }
  const SteadyStateBasis& basis() const { return basis_; }
  Mat M_x() const { return basis_.M.topRows(model_.states()); }
  Mat M_u() const { return basis_.M.bottomRows(model_.inputs()); }

  const Polytope& X() const { return x_; }
  const Polytope& U() const { return u_; }
  const Polytope& W() const { return w_; }
  double disturbance_radius() const { return rho_; }
  const Polytope& tube() const { return phi_; }
  int tube_steps() const { return rpi_steps_; }
  double tube_alpha() const { return rpi_alpha_; }
  int tube_enrichment_rounds() const { return rpi_rounds_; }
  bool tube_is_trivial() const { return rho_ == 0.0; }
  const Polytope& X1() const { return x1_; }
  const Polytope& U1() const { return u1_; }
  const Polytope& terminal_set() const { return omega_; }
  int terminal_determinedness() const { return omega_k_; }
  /// Admissible steady parameters: M theta in lambda (X1 x U1).
  const Polytope& theta_set() const { return theta_set_; }

  /// Closest admissible steady output to y_t.
  TargetState target_projection(const Vec& y_target) const;

  /// Solves P_N(x, y_t). Throws Infeasible when x is outside the feasible
  /// region and MaxIter if the QP stalls.
  PnSolution solve_pn(const Vec& x, const Vec& y_target) const;

  /// u = K (x - x_bar*(0)) + u_bar*(0).
  Vec control_law(const Vec& x, const PnSolution& solution) const;
  Vec control_law(const Vec& x, const Vec& y_target) const;

  /// Size of the condensed QP: variables, inequality rows.
  std::pair<Eigen::Index, Eigen::Index> qp_size() const { return {qp_h_.rows(), qp_g_.rows()}; }

  /// Builds the QP for (x, y_t) exactly as solve_pn does.
  QpProblem build_qp(const Vec& x, const Vec& y_target, double* constant = nullptr) const;

 private:
  friend MpcController synthesize(const PlantModel&, const Uncertainty&, const Polytope&,
                                  const Polytope&, const Tuning&, double, double,
                                  const SynthesisOptions&);
  void build_qp_template();

  PlantModel model_;
  Uncertainty estimate_;
  Tuning tuning_;
  Mat a_hat_, b_hat_;
  Mat k_, k_bar_, p_, l_;
  SteadyStateBasis basis_;
  Polytope x_, u_, w_, phi_, x1_, u1_, omega_, theta_set_;
  double rho_ = 0.0;
  int rpi_steps_ = 0;
  double rpi_alpha_ = 0.0;
  int rpi_rounds_ = 0;
  int omega_k_ = 0;

  // Condensed QP: z = (x_bar(0), theta, u(0..N-1)).
  Mat qp_h_;
  Mat qp_g_;
  Vec qp_h0_;        // rhs = qp_h0_ + qp_hx_ * x
  Mat qp_hx_;
  Mat qp_ny_;        // y_s = qp_ny_ z
  Mat qp_eq_;        // x_bar(0) = x when the tube is trivial
};

/// Full synthesis pipeline: gains, terminal weight, disturbance box, tube,
/// tightened sets, steady-state maps, terminal invariant set for tracking and
/// the condensed QP. Throws EmptyDifference, NotFinitelyDetermined,
/// DegenerateSteadySpace, Uncontrollable or NotContractive.
MpcController synthesize(const PlantModel& model, const Uncertainty& estimate,
                         const Polytope& state_set, const Polytope& input_set,
                         const Tuning& tuning, double ell_a, double ell_b,
                         const SynthesisOptions& options = {});

}  // namespace esilc
