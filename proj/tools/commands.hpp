#pragma once

#include <cstdint>
#include <string>

namespace esilc::cli {

enum ExitCode { kOk = 0, kUsage = 2, kSynthesis = 3, kInfeasible = 4 };

struct Options {
  std::string scenario;
  std::string out;  // empty: current directory (synthesize: no dump)
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string delta_hat;
  std::string x0;
  int budget = 0;  // 0 keeps the scenario value (or the bench default)
  std::string function = "all";
};

int cmd_synthesize(const Options& opt);
int cmd_trial(const Options& opt);
int cmd_learn(const Options& opt);
int cmd_direct_bench(const Options& opt);

}  // namespace esilc::cli
