#include "esilc/ilc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace esilc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, message);
}

std::vector<double> key_of(const Uncertainty& u) {
  const Vec flat = u.flatten();
  return {flat.data(), flat.data() + flat.size()};
}

}  // namespace

std::string_view to_string(CostKind kind) {
  return kind == CostKind::Identification ? "identification" : "performance";
}

std::optional<CostKind> parse_cost_kind(std::string_view name) {
  if (name == "identification") return CostKind::Identification;
  if (name == "performance") return CostKind::Performance;
  return std::nullopt;
}

void Scenario::validate() const {
  plant.validate();
  const Eigen::Index n = plant.states();
  const Eigen::Index m = plant.inputs();
  const Eigen::Index p = plant.outputs();
  tuning.validate(n, m, p);
  require(truth.dA.rows() == n && truth.dA.cols() == n && truth.dB.rows() == n && truth.dB.cols() == m,
          "truth: dA must be n x n and dB n x m");
  require_finite(truth.dA, "truth dA");
  require_finite(truth.dB, "truth dB");
  require(std::isfinite(ell_a) && std::isfinite(ell_b) && ell_a >= 0.0 && ell_b >= 0.0,
          "bounds: ell_A and ell_B must be finite and nonnegative");
  require(norm_inf(truth.dA) <= ell_a * (1.0 + 1e-12) + 1e-15,
          fmt::format("truth: |dA|_inf = {} exceeds ell_A = {}", norm_inf(truth.dA), ell_a));
  require(norm_inf(truth.dB) <= ell_b * (1.0 + 1e-12) + 1e-15,
          fmt::format("truth: |dB|_inf = {} exceeds ell_B = {}", norm_inf(truth.dB), ell_b));
  if (mask) require(mask->size() == n * (n + m), "bounds: mask must have n (n + m) entries");
  require(X.dim() == n && U.dim() == m, "constraints: X must live in R^n and U in R^m");
  require(is_nonempty(X) && is_bounded(X), "constraints: X must be a nonempty bounded polytope");
  require(is_nonempty(U) && is_bounded(U), "constraints: U must be a nonempty bounded polytope");
  require(x0.size() == n, "x0 must have n entries");
  require_finite(x0, "x0");
  require(contains(X, x0), "x0 must lie in X");
  require(!reference.empty(), "reference: at least one step is required");
  require(reference.front().start == 0, "reference: the first step must start at k = 0");
  for (std::size_t i = 0; i < reference.size(); ++i) {
    require(reference[i].value.size() == p, "reference: every value must have p entries");
    require_finite(reference[i].value, "reference value");
    if (i > 0) {
      require(reference[i].start > reference[i - 1].start,
              "reference: step starts must be strictly increasing");
    }
  }
  require(learning.budget >= 1, "learning: budget must be at least 1");
  require(learning.trial_length >= 1, "learning: trial_length must be at least 1");
  require(learning.delta_term >= 0.0 && std::isfinite(learning.delta_term),
          "learning: delta_term must be finite and nonnegative");
  require(learning.noise >= 0.0 && std::isfinite(learning.noise),
          "learning: noise must be finite and nonnegative");
  require(learning.epsilon >= 0.0 && std::isfinite(learning.epsilon),
          "learning: epsilon must be finite and nonnegative");
}

Vec Scenario::reference_at(int k) const {
  const ReferenceStep* active = &reference.front();
  for (const ReferenceStep& s : reference) {
    if (s.start <= k) active = &s;
  }
  return active->value;
}

SearchDomain Scenario::search_domain() const {
  return SearchDomain::for_uncertainty(plant.states(), plant.inputs(), ell_a, ell_b, mask);
}

std::shared_ptr<const SynthesisCache::Entry> SynthesisCache::get(const Scenario& scenario,
                                                                 const Uncertainty& estimate) {
  const std::vector<double> key = key_of(estimate);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  auto entry = std::make_shared<Entry>();
  try {
    entry->controller = std::make_shared<const MpcController>(
        synthesize(scenario.plant, estimate, scenario.X, scenario.U, scenario.tuning, scenario.ell_a,
                   scenario.ell_b));
  } catch (const Error& e) {
    entry->code = e.code();
    entry->message = e.what();
  }
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.emplace(key, std::move(entry)).first->second;
}

std::size_t SynthesisCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

int TrialRecord::constraint_violations() const {
  int count = 0;
  for (int k = 0; k < steps; ++k) {
    count += in_x[static_cast<std::size_t>(k)] ? 0 : 1;
    count += in_u[static_cast<std::size_t>(k)] ? 0 : 1;
  }
  return count;
}

int TrialRecord::tube_violations() const {
  int count = 0;
  for (int k = 0; k < steps; ++k) count += in_tube[static_cast<std::size_t>(k)] ? 0 : 1;
  return count;
}

double TrialRecord::max_tube_error() const {
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) worst = std::max(worst, e.col(k).cwiseAbs().maxCoeff());
  return worst;
}

double penalty_cost(const Scenario& scenario) {
  return 1e6 * (1.0 + static_cast<double>(scenario.learning.trial_length));
}

TrialRecord run_trial(const Scenario& scenario, const Uncertainty& estimate, int iteration,
                      std::uint64_t seed, SynthesisCache* cache) {
  const Eigen::Index n = scenario.plant.states();
  const Eigen::Index m = scenario.plant.inputs();
  const Eigen::Index p = scenario.plant.outputs();
  const int horizon = scenario.learning.trial_length;

  TrialRecord rec;
  rec.iteration = iteration;
  rec.estimate = estimate;
  rec.x = Mat::Constant(n, horizon, kNaN);
  rec.u = Mat::Constant(m, horizon, kNaN);
  rec.y = Mat::Constant(p, horizon, kNaN);
  rec.y_meas = Mat::Constant(p, horizon, kNaN);
  rec.xbar = Mat::Constant(n, horizon, kNaN);
  rec.e = Mat::Constant(n, horizon, kNaN);
  rec.r = Mat::Constant(p, horizon, kNaN);
  rec.ys = Mat::Constant(p, horizon, kNaN);
  rec.value = Vec::Constant(horizon, kNaN);
  rec.in_tube.assign(static_cast<std::size_t>(horizon), 0);
  rec.in_x.assign(static_cast<std::size_t>(horizon), 0);
  rec.in_u.assign(static_cast<std::size_t>(horizon), 0);
  for (int k = 0; k < horizon; ++k) rec.r.col(k) = scenario.reference_at(k);

  SynthesisCache local;
  const auto entry = (cache ? cache : &local)->get(scenario, estimate);
  if (!entry->controller) {
    rec.failure_code = entry->code;
    rec.failure = entry->message;
    rec.cost = penalty_cost(scenario);
    return rec;
  }
  rec.synthesized = true;
  rec.controller = entry->controller;
  const MpcController& ctrl = *entry->controller;

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);

  const Mat a_true = scenario.true_A();
  const Mat b_true = scenario.true_B();
  Vec x = scenario.x0;
  Vec last_ref;
  Vec ys;
  rec.feasible = true;
  for (int k = 0; k < horizon; ++k) {
    const Vec ref = rec.r.col(k);
    if (k == 0 || ref != last_ref) {
      ys = ctrl.target_projection(ref).ys;
      last_ref = ref;
    }
    PnSolution sol;
    try {
      sol = ctrl.solve_pn(x, ref);
    } catch (const Error& e) {
      rec.feasible = false;
      rec.infeasible_step = k;
      rec.failure_code = e.code();
      rec.failure = fmt::format("step {}: {}", k, e.what());
      rec.x.col(k) = x;
      break;
    }
    const Vec u = ctrl.control_law(x, sol);
    const Vec y = scenario.plant.C * x + scenario.plant.D * u;
    rec.x.col(k) = x;
    rec.u.col(k) = u;
    rec.y.col(k) = y;
    Vec ym = y;
    if (scenario.learning.noise > 0.0) {
      for (Eigen::Index i = 0; i < p; ++i) ym(i) += scenario.learning.noise * noise(rng);
    }
    rec.y_meas.col(k) = ym;
    rec.xbar.col(k) = sol.xbar0;
    rec.e.col(k) = x - sol.xbar0;
    rec.ys.col(k) = ys;
    rec.value(k) = sol.value;
    rec.in_tube[static_cast<std::size_t>(k)] = contains(ctrl.tube(), rec.e.col(k)) ? 1 : 0;
    rec.in_x[static_cast<std::size_t>(k)] = contains(scenario.X, x) ? 1 : 0;
    rec.in_u[static_cast<std::size_t>(k)] = contains(scenario.U, u) ? 1 : 0;
    rec.steps = k + 1;
    x = a_true * x + b_true * u;
  }
  rec.x_final = x;
  rec.cost = learning_cost(rec, scenario);
  return rec;
}

double learning_cost(const TrialRecord& record, const Scenario& scenario) {
  if (!record.feasible || record.steps < record.trial_length()) return penalty_cost(scenario);
  double q = 0.0;
  if (scenario.learning.kind == CostKind::Performance) {
    for (int k = 0; k < record.steps; ++k) q += (record.y_meas.col(k) - record.r.col(k)).squaredNorm();
    return q;
  }
  const Mat a_hat = scenario.plant.A + record.estimate.dA;
  const Mat b_hat = scenario.plant.B + record.estimate.dB;
  Vec xh = scenario.x0;
  for (int k = 0; k < record.steps; ++k) {
    const Vec u = record.u.col(k);
    const Vec yh = scenario.plant.C * xh + scenario.plant.D * u;
    q += (record.y_meas.col(k) - yh).squaredNorm();
    xh = a_hat * xh + b_hat * u;
  }
  return q;
}

double tail_tracking_error(const TrialRecord& record) {
  if (!record.feasible || record.steps == 0) return std::numeric_limits<double>::infinity();
  const int start = record.steps - std::max(1, record.steps / 4);
  double sum = 0.0;
  for (int k = start; k < record.steps; ++k) {
    sum += (record.y.col(k) - record.ys.col(k)).cwiseAbs().maxCoeff();
  }
  return sum / (record.steps - start);
}

void check_search_domain_controllability(const Scenario& scenario) {
  const SearchDomain dom = scenario.search_domain();
  const Eigen::Index n = scenario.plant.states();
  const Eigen::Index m = scenario.plant.inputs();
  std::vector<Eigen::Index> free_axes;
  for (Eigen::Index i = 0; i < dom.dim(); ++i) {
    if (!dom.frozen(i)) free_axes.push_back(i);
  }
  auto check = [&](const Vec& unit, const char* what) {
    const Uncertainty u = Uncertainty::unflatten(dom.to_point(unit), n, m);
    if (!is_controllable(scenario.plant.A + u.dA, scenario.plant.B + u.dB)) {
      const Vec flat = u.flatten();
      throw Error(ErrorCode::Uncontrollable,
                  fmt::format("(A + dA, B + dB) is not controllable at the search-domain {} [{}]", what,
                              fmt::join(flat.data(), flat.data() + flat.size(), ", ")));
    }
  };
  check(Vec::Constant(dom.dim(), 0.5), "center");
  const std::size_t f = free_axes.size();
  auto corner = [&](std::uint64_t bits) {
    Vec unit = Vec::Constant(dom.dim(), 0.5);
    for (std::size_t i = 0; i < f; ++i) unit(free_axes[i]) = (bits >> i) & 1u ? 1.0 : 0.0;
    return unit;
  };
  if (f <= 12) {
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << f); ++bits) check(corner(bits), "corner");
  } else {
    std::mt19937_64 rng(0);
    for (int i = 0; i < 4096; ++i) {
      Vec unit = Vec::Constant(dom.dim(), 0.5);
      for (std::size_t a = 0; a < f; ++a) unit(free_axes[a]) = rng() & 1u ? 1.0 : 0.0;
      check(unit, "corner");
    }
  }
}

int certain_settling_time(const Scenario& scenario) {
  const Eigen::Index n = scenario.plant.states();
  const Eigen::Index m = scenario.plant.inputs();
  const MpcController ctrl = synthesize(scenario.plant, Uncertainty::zero(n, m), scenario.X, scenario.U,
                                        scenario.tuning, 0.0, 0.0);
  const Vec ref = scenario.reference.front().value;
  const Vec ys = ctrl.target_projection(ref).ys;
  constexpr int kMaxSteps = 1000;
  Vec x = scenario.x0;
  std::vector<double> err;
  err.reserve(kMaxSteps);
  for (int k = 0; k < kMaxSteps; ++k) {
    const Vec u = ctrl.control_law(x, ref);
    err.push_back((scenario.plant.C * x + scenario.plant.D * u - ys).cwiseAbs().maxCoeff());
    x = scenario.plant.A * x + scenario.plant.B * u;
  }
  const double band = 0.02 * std::max(err.front(), 1e-9);
  int settle = 0;
  for (int k = 0; k < kMaxSteps; ++k) {
    if (err[static_cast<std::size_t>(k)] > band) settle = k + 1;
  }
  return settle >= kMaxSteps ? -1 : settle;
}

LearningReport run_learning(const Scenario& scenario, const LearningOptions& options) {
  scenario.validate();
  check_search_domain_controllability(scenario);
  const Eigen::Index n = scenario.plant.states();
  const Eigen::Index m = scenario.plant.inputs();

  LearningReport report;
  report.domain = scenario.search_domain();
  for (Eigen::Index i = 0; i < report.domain.dim(); ++i) {
    report.domain_width = std::max(report.domain_width, report.domain.upper()(i) - report.domain.lower()(i));
  }
  DirectOptimizer opt(report.domain, {scenario.learning.epsilon, scenario.learning.delta_term,
                                      scenario.learning.budget});
  SynthesisCache cache;
  const Vec truth = scenario.truth.flatten();
  const int jobs = std::max(1, options.jobs);

  for (auto batch = opt.ask(); !batch.empty(); batch = opt.ask()) {
    std::vector<TrialRecord> records(batch.size());
    auto evaluate = [&](std::size_t i) {
      const Proposal& prop = batch[i];
      if (!report.domain.contains(prop.point)) {
        throw Error(ErrorCode::InvalidArgument, "DIRECT proposed a point outside the search domain");
      }
      records[i] = run_trial(scenario, Uncertainty::unflatten(prop.point, n, m),
                             static_cast<int>(prop.id) + 1, options.seed, &cache);
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), batch.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < batch.size(); ++i) evaluate(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < batch.size(); i = next++) evaluate(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    for (std::size_t i = 0; i < batch.size(); ++i) {
      TrialRecord& rec = records[i];
      opt.tell(batch[i].id, rec.cost);
      IterationSummary s;
      s.t = rec.iteration;
      s.estimate = batch[i].point;
      s.cost = rec.cost;
      s.best_cost = opt.best().value;
      s.estimate_error = (truth - batch[i].point).cwiseAbs().maxCoeff();
      s.tail_error = tail_tracking_error(rec);
      s.feasible = rec.feasible;
      s.failure = rec.failure;
      report.iterations.push_back(s);
      if (options.on_iteration) options.on_iteration(s);

      const bool first = report.iterations.size() == 1;
      if (first || opt.best().evaluation == batch[i].id) {
        report.best_iteration = rec.iteration;
        report.best_cost = rec.cost;
        report.best_estimate = rec.estimate;
        if (first) report.first_trial = rec;
        report.best_trial = std::move(rec);
      }
    }
  }
  report.sweeps = opt.sweeps();
  report.syntheses = cache.size();
  return report;
}

}  // namespace esilc
