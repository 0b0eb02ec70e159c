#include "commands.hpp"

#include <chrono>
#include <filesystem>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bench.hpp"
#include "esilc/scenario.hpp"
#include "output.hpp"

namespace esilc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Scenario load(const Options& opt) {
  Scenario s = load_scenario(opt.scenario);
  spdlog::info("loaded scenario '{}' from {} (n = {}, m = {}, p = {})", s.name, opt.scenario, s.plant.states(),
               s.plant.inputs(), s.plant.outputs());
  return s;
}

// The --delta-hat override, or the nominal model.
Uncertainty estimate(const Scenario& s, const Options& opt) {
  const Eigen::Index n = s.plant.states();
  const Eigen::Index m = s.plant.inputs();
  if (opt.delta_hat.empty()) return Uncertainty::zero(n, m);
  const Vec flat = parse_list(opt.delta_hat, "--delta-hat");
  if (flat.size() != n * (n + m)) {
    throw Error(ErrorCode::Parse, fmt::format("--delta-hat: expected {} values (dA row-major, then dB row-major), got {}",
                                              n * (n + m), flat.size()));
  }
  if (!s.search_domain().contains(flat, 1e-12)) {
    spdlog::warn("--delta-hat lies outside the search domain of the scenario");
  }
  return Uncertainty::unflatten(flat, n, m);
}

fs::path out_dir(const Options& opt) {
  fs::path dir(opt.out.empty() ? "." : opt.out);
  fs::create_directories(dir);
  return dir;
}

bool same_set(const Polytope& a, const Polytope& b) { return is_subset(a, b) && is_subset(b, a); }

}  // namespace

int cmd_synthesize(const Options& opt) {
  const Scenario s = load(opt);
  const Uncertainty est = estimate(s, opt);
  const MpcController c = synthesize(s.plant, est, s.X, s.U, s.tuning, s.ell_a, s.ell_b);

  fmt::print("scenario: {}\n", s.name);
  fmt::print("estimate: dA = {}, dB = {}\n", format_matrix(est.dA), format_matrix(est.dB));
  fmt::print("K = {}\n", format_matrix(c.K()));
  fmt::print("K_bar = {}\n", format_matrix(c.K_bar()));
  fmt::print("P = {}\n", format_matrix(c.P()));
  fmt::print("disturbance radius: {}\n", show(c.disturbance_radius()));
  if (c.tube_is_trivial()) {
    fmt::print("tube: Phi_K = {{0}}\n");
  } else {
    fmt::print("tube: {} facets, radius {}, s = {}, alpha = {}, enrichment rounds = {}\n", c.tube().num_facets(),
               show(max_abs_coordinate(c.tube())), c.tube_steps(), show(c.tube_alpha()), c.tube_enrichment_rounds());
  }
  fmt::print("X1: {} facets{}\n", c.X1().num_facets(), same_set(c.X1(), s.X) ? " (X1 = X)" : "");
  fmt::print("U1: {} facets{}\n", c.U1().num_facets(), same_set(c.U1(), s.U) ? " (U1 = U)" : "");
  fmt::print("terminal set: {} constraints, k* = {}\n", c.terminal_set().num_facets(), c.terminal_determinedness());
  const auto [vars, rows] = c.qp_size();
  fmt::print("QP: {} variables, {} inequalities\n", vars, rows);

  if (!opt.out.empty()) {
    json doc;
    doc["scenario"] = s.name;
    doc["estimate"] = {{"dA", to_json(est.dA)}, {"dB", to_json(est.dB)}};
    doc["K"] = to_json(c.K());
    doc["K_bar"] = to_json(c.K_bar());
    doc["P"] = to_json(c.P());
    doc["L"] = to_json(c.L());
    doc["disturbance_radius"] = c.disturbance_radius();
    doc["tube"] = to_json(c.tube());
    doc["X1"] = to_json(c.X1());
    doc["U1"] = to_json(c.U1());
    doc["terminal_set"] = to_json(c.terminal_set());
    doc["terminal_determinedness"] = c.terminal_determinedness();
    const fs::path path = out_dir(opt) / "synthesis.json";
    write_json(path, doc);
    spdlog::info("wrote {}", path.string());
  }
  return kOk;
}

int cmd_trial(const Options& opt) {
  Scenario s = load(opt);
  if (!opt.x0.empty()) {
    s.x0 = parse_list(opt.x0, "--x0");
    s.validate();
  }
  const Uncertainty est = estimate(s, opt);
  const TrialRecord rec = run_trial(s, est, 0, opt.seed);

  const fs::path dir = out_dir(opt);
  write_trajectory_csv(dir / "trial.csv", rec);
  json summary = trial_summary_json(rec);
  summary["scenario"] = s.name;
  summary["trajectory"] = "trial.csv";
  write_json(dir / "trial.json", summary);
  spdlog::info("wrote {} and {}", (dir / "trial.csv").string(), (dir / "trial.json").string());

  fmt::print("Q = {}, feasible = {}, steps = {}/{}, max tube error = {}, constraint violations = {}\n",
             show(rec.cost), rec.feasible, rec.steps, rec.trial_length(), show(rec.max_tube_error()),
             rec.constraint_violations());
  if (!rec.synthesized) {
    spdlog::error("synthesis failed: {}", rec.failure);
    return kSynthesis;
  }
  if (!rec.feasible) {
    spdlog::error("trial infeasible: {}", rec.failure);
    return kInfeasible;
  }
  return kOk;
}

int cmd_learn(const Options& opt) {
  Scenario s = load(opt);
  if (opt.budget > 0) s.learning.budget = opt.budget;
  try {
    check_search_domain_controllability(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("search domain: {}", e.message()));
  }
  fmt::print("certain-model settling time: {} steps (trial length {})\n", certain_settling_time(s),
             s.learning.trial_length);

  LearningOptions lo;
  lo.jobs = opt.jobs;
  lo.seed = opt.seed;
  lo.on_iteration = [](const IterationSummary& it) {
    spdlog::debug("t = {}: Q = {}, best = {}, |Delta - Delta_hat| = {}, tail error = {}", it.t, num(it.cost),
                  num(it.best_cost), num(it.estimate_error), num(it.tail_error));
  };
  const auto t0 = std::chrono::steady_clock::now();
  const LearningReport rep = run_learning(s, lo);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = out_dir(opt);
  const Eigen::Index dim = rep.domain.dim();
  std::vector<std::string> header{"t", "Q", "estimate_error", "tail_error", "best_Q", "feasible"};
  for (Eigen::Index i = 0; i < dim; ++i) header.push_back(fmt::format("delta_hat_{}", i));
  {
    CsvWriter csv(dir / "learning_curve.csv", header);
    for (const IterationSummary& it : rep.iterations) {
      std::vector<std::string> row{std::to_string(it.t), num(it.cost),      num(it.estimate_error),
                                   num(it.tail_error),   num(it.best_cost), it.feasible ? "1" : "0"};
      for (Eigen::Index i = 0; i < dim; ++i) row.push_back(num(it.estimate(i)));
      csv.row(row);
    }
  }
  write_trajectory_csv(dir / "first_trial.csv", rep.first_trial);
  write_trajectory_csv(dir / "best_trial.csv", rep.best_trial);

  const Vec truth = s.truth.flatten();
  const double error = (rep.best_estimate.flatten() - truth).cwiseAbs().maxCoeff();
  const double first_tail = tail_tracking_error(rep.first_trial);
  const double best_tail = tail_tracking_error(rep.best_trial);
  json report;
  report["scenario"] = s.name;
  report["trial_length"] = s.learning.trial_length;
  report["cost_kind"] = std::string(to_string(s.learning.kind));
  report["seed"] = opt.seed;
  report["domain"] = {{"lower", to_json(rep.domain.lower())},
                      {"upper", to_json(rep.domain.upper())},
                      {"width", rep.domain_width}};
  report["truth"] = to_json(truth);
  json rows = json::array();
  for (const IterationSummary& it : rep.iterations) {
    rows.push_back({{"t", it.t},
                    {"estimate", to_json(it.estimate)},
                    {"Q", number_json(it.cost)},
                    {"best_Q", number_json(it.best_cost)},
                    {"estimate_error", number_json(it.estimate_error)},
                    {"tail_error", number_json(it.tail_error)},
                    {"feasible", it.feasible},
                    {"failure", it.failure}});
  }
  report["iterations"] = rows;
  report["best"] = {{"iteration", rep.best_iteration},
                    {"estimate", to_json(rep.best_estimate.flatten())},
                    {"dA", to_json(rep.best_estimate.dA)},
                    {"dB", to_json(rep.best_estimate.dB)},
                    {"Q", number_json(rep.best_cost)},
                    {"estimate_error", error},
                    {"relative_error", rep.domain_width > 0 ? number_json(error / rep.domain_width) : json()}};
  report["first_trial"] = trial_summary_json(rep.first_trial);
  report["best_trial"] = trial_summary_json(rep.best_trial);
  report["trajectories"] = {{"first", "first_trial.csv"}, {"best", "best_trial.csv"}};
  report["learning_curve"] = "learning_curve.csv";
  report["sweeps"] = rep.sweeps;
  report["syntheses"] = rep.syntheses;
  report["seconds"] = seconds;
  write_json(dir / "run_report.json", report);
  spdlog::info("wrote learning outputs to {}", dir.string());

  fmt::print("iterations: {} ({} sweeps, {} syntheses, {:.2f} s)\n", rep.iterations.size(), rep.sweeps,
             rep.syntheses, seconds);
  fmt::print("best iteration {}: Q = {}, dA = {}, dB = {}\n", rep.best_iteration, show(rep.best_cost),
             format_matrix(rep.best_estimate.dA), format_matrix(rep.best_estimate.dB));
  fmt::print("estimate error: {} ({} of the domain width)\n", show(error),
             rep.domain_width > 0 ? show(error / rep.domain_width) : "n/a");
  fmt::print("tail tracking error: first {} -> best {}\n", show(first_tail), show(best_tail));
  return kOk;
}

int cmd_direct_bench(const Options& opt) {
  const int budget = opt.budget > 0 ? opt.budget : 200;
  std::vector<const BenchFunction*> selected;
  for (const BenchFunction& fn : bench_functions()) {
    if (opt.function == "all" || opt.function == fn.name) selected.push_back(&fn);
  }
  if (selected.empty()) {
    throw Error(ErrorCode::Parse, fmt::format("--function: unknown benchmark '{}' (sphere, shifted-quadratic, "
                                              "rastrigin-2d or all)",
                                              opt.function));
  }
  const fs::path dir = out_dir(opt);
  CsvWriter csv(dir / "direct_bench.csv",
                {"function", "evaluation", "value", "best_value", "best_error", "x_0", "x_1"});
  for (const BenchFunction* fn : selected) {
    const BenchTrace tr = run_bench(*fn, budget);
    for (std::size_t i = 0; i < tr.values.size(); ++i) {
      csv.row({fn->name, std::to_string(i + 1), num(tr.values[i]), num(tr.best_values[i]), num(tr.best_errors[i]),
               num(tr.points[i](0)), num(tr.points[i](1))});
    }
    fmt::print("{}: {} evaluations, best value {}, error {}\n", fn->name, tr.values.size(),
               show(tr.best_values.back()), show(tr.best_errors.back()));
  }
  spdlog::info("wrote {}", (dir / "direct_bench.csv").string());
  return kOk;
}

}  // namespace esilc::cli
