#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "esilc/error.hpp"

using namespace esilc;
using namespace esilc::cli;

namespace {

// ESILC_LOG = trace | debug | info | warn | error | off (default warn).
void setup_logging() {
  auto logger = spdlog::stderr_logger_st("esilc");
  logger->set_pattern("esilc [%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("ESILC_LOG");
  if (!env || !*env) return;
  const std::string name = env;
  const auto level = spdlog::level::from_str(name);
  if (level == spdlog::level::off && name != "off") {
    spdlog::warn("ignoring ESILC_LOG={} (expected trace, debug, info, warn, error or off)", name);
    return;
  }
  spdlog::set_level(level);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse:
    case ErrorCode::InvalidArgument:
      return kUsage;
    case ErrorCode::Infeasible:
    case ErrorCode::MaxIter:
      return kInfeasible;
    default:
      return kSynthesis;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options opt;
  CLI::App app{"Tube MPC with iterative model-error learning"};
  app.require_subcommand(1);

  auto add_scenario = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
  };
  auto add_out = [&](CLI::App* cmd, const char* help) { cmd->add_option("--out", opt.out, help); };

  CLI::App* synth = app.add_subcommand("synthesize", "Build the controller and print a summary");
  add_scenario(synth);
  synth->add_option("--delta-hat", opt.delta_hat, "Estimate (dA row-major, then dB row-major); default 0");
  add_out(synth, "Also write synthesis.json with the computed sets to this directory");

  CLI::App* trial = app.add_subcommand("trial", "Run one closed-loop trial of the true plant");
  add_scenario(trial);
  trial->add_option("--delta-hat", opt.delta_hat, "Estimate (dA row-major, then dB row-major); default 0");
  trial->add_option("--x0", opt.x0, "Initial state override (comma list)");
  trial->add_option("--seed", opt.seed, "Output-noise seed");
  add_out(trial, "Directory for trial.csv and trial.json");

  CLI::App* learn = app.add_subcommand("learn", "Learn the model error with DIRECT over repeated trials");
  add_scenario(learn);
  learn->add_option("--seed", opt.seed, "Output-noise seed");
  learn->add_option("--jobs", opt.jobs, "Trials run in parallel within a sweep")->check(CLI::PositiveNumber);
  learn->add_option("--budget", opt.budget, "Override the evaluation budget")->check(CLI::PositiveNumber);
  add_out(learn, "Directory for learning_curve.csv, trajectories and run_report.json");

  CLI::App* bench = app.add_subcommand("direct-bench", "Run DIRECT on test functions");
  bench->add_option("--function", opt.function, "sphere, shifted-quadratic, rastrigin-2d or all");
  bench->add_option("--budget", opt.budget, "Evaluations per function (default 200)")->check(CLI::PositiveNumber);
  add_out(bench, "Directory for direct_bench.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synthesize(opt);
    if (trial->parsed()) return cmd_trial(opt);
    if (learn->parsed()) return cmd_learn(opt);
    return cmd_direct_bench(opt);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
}
