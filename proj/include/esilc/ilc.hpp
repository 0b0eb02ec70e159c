#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "esilc/direct.hpp"
#include "esilc/error.hpp"
#include "esilc/mpc.hpp"

namespace esilc {

enum class CostKind { Identification, Performance };

std::string_view to_string(CostKind kind);
std::optional<CostKind> parse_cost_kind(std::string_view name);

/// r(k) = value for start <= k < next start.
struct ReferenceStep {
  int start = 0;
  Vec value;
};

struct LearningConfig {
  CostKind kind = CostKind::Identification;
  int budget = 200;
  double delta_term = 1e-3;
  int trial_length = 100;
  double noise = 0.0;  // uniform output-noise amplitude
  double epsilon = 1e-4;
};

struct Scenario {
  std::string name;
  PlantModel plant;
  Uncertainty truth;
  double ell_a = 0.0;
  double ell_b = 0.0;
  /// Free entries of the flattened (dA, dB); nonzero = searched.
  std::optional<Vec> mask;
  Polytope X;
  Polytope U;
  Tuning tuning;
  std::vector<ReferenceStep> reference;
  Vec x0;
  LearningConfig learning;

  /// Dimensions, positive definiteness, piecewise-constant reference starting
  /// at k = 0, x0 in X and the true model error inside the declared bounds.
  /// Throws InvalidArgument.
  void validate() const;

  Vec reference_at(int k) const;
  SearchDomain search_domain() const;
  /// Model used by the simulator: (A + dA, B + dB) with the true error.
  Mat true_A() const { return plant.A + truth.dA; }
  Mat true_B() const { return plant.B + truth.dB; }
};

/// Synthesized controllers keyed by the exact bits of the estimate. Failed
/// syntheses are cached too. Safe for concurrent use.
class SynthesisCache {
 public:
  struct Entry {
    std::shared_ptr<const MpcController> controller;
    ErrorCode code = ErrorCode::InvalidArgument;
    std::string message;
  };

  std::shared_ptr<const Entry> get(const Scenario& scenario, const Uncertainty& estimate);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::vector<double>, std::shared_ptr<const Entry>> entries_;
};

/// One closed-loop trial of the true plant under the MPC built for an
/// estimate. Matrices hold one column per step k = 0..T-1; steps after an
/// infeasible one stay NaN.
struct TrialRecord {
  int iteration = 0;
  Uncertainty estimate;
  bool synthesized = false;
  bool feasible = false;
  int steps = 0;  // steps with a control applied
  std::optional<int> infeasible_step;
  std::optional<ErrorCode> failure_code;
  std::string failure;

  Mat x;       // true state
  Mat u;       // applied input
  Mat y;       // true output
  Mat y_meas;  // output plus measurement noise
  Mat xbar;    // x_bar*(0) at each step
  Mat e;       // x - x_bar*(0)
  Mat r;       // reference
  Mat ys;      // projected steady output for r(k)
  Vec value;   // V_N* at each step
  std::vector<char> in_tube;
  std::vector<char> in_x;
  std::vector<char> in_u;
  Vec x_final;  // state after the last applied input

  double cost = 0.0;
  std::shared_ptr<const MpcController> controller;

  int trial_length() const { return static_cast<int>(x.cols()); }
  int constraint_violations() const;
  int tube_violations() const;
  /// Largest infinity norm of the tube error over the completed steps.
  double max_tube_error() const;
};

/// 1e6 * (1 + T_trial).
double penalty_cost(const Scenario& scenario);

/// Simulates the trial. Synthesis and per-step infeasibility are recorded in
/// the result (penalty cost), never thrown. `seed` drives the output noise.
TrialRecord run_trial(const Scenario& scenario, const Uncertainty& estimate, int iteration = 0,
                      std::uint64_t seed = 0, SynthesisCache* cache = nullptr);

/// Identification: sum |y_meas(k) - y_hat(k)|^2 with y_hat replaying the
/// recorded inputs through the estimated model from x0. Performance:
/// sum |y_meas(k) - r(k)|^2. Infeasible trials get penalty_cost.
double learning_cost(const TrialRecord& record, const Scenario& scenario);

/// Mean of |y(k) - y_s(k)|_inf over the last quarter of the completed steps.
/// Infinite for trials that did not complete.
double tail_tracking_error(const TrialRecord& record);

/// Controllability of (A + dA, B + dB) at every corner of the search box
/// (a deterministic sample of 4096 corners above 12 free entries) and at its
/// center. Throws Uncontrollable naming the first failing corner.
void check_search_domain_controllability(const Scenario& scenario);

/// Steps for the certain nominal closed loop to enter and stay within 2% of
/// the first step change; -1 if it never settles within 1000 steps.
int certain_settling_time(const Scenario& scenario);

struct IterationSummary {
  int t = 0;  // 1-based
  Vec estimate;
  double cost = 0.0;
  double best_cost = 0.0;
  double estimate_error = 0.0;  // |Delta - Delta_hat|_inf over the flattened vector
  double tail_error = 0.0;
  bool feasible = false;
  std::string failure;
};

struct LearningReport {
  SearchDomain domain;
  double domain_width = 0.0;  // largest free side of the search box
  std::vector<IterationSummary> iterations;
  int best_iteration = 0;
  Uncertainty best_estimate;
  double best_cost = 0.0;
  TrialRecord first_trial;
  TrialRecord best_trial;
  int sweeps = 0;
  std::size_t syntheses = 0;
};

struct LearningOptions {
  int jobs = 1;
  std::uint64_t seed = 0;
  std::function<void(const IterationSummary&)> on_iteration;
};

/// DIRECT over the search domain; every evaluation is one trial plus its
/// learning cost. Trials within a sweep may run on `jobs` threads; results
/// are told in proposal order.
LearningReport run_learning(const Scenario& scenario, const LearningOptions& options = {});

}  // namespace esilc
