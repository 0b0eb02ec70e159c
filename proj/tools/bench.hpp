#pragma once

#include <functional>
#include <string>
#include <vector>

#include "esilc/direct.hpp"

namespace esilc::cli {

struct BenchFunction {
  std::string name;
  Vec lower;
  Vec upper;
  Vec minimizer;
  std::function<double(const Vec&)> f;
};

/// sphere, shifted-quadratic and rastrigin-2d. None has its minimizer at the
/// box center.
const std::vector<BenchFunction>& bench_functions();

struct BenchTrace {
  std::vector<Vec> points;
  std::vector<double> values;
  std::vector<double> best_values;
  std::vector<double> best_errors;  // |x_best - x*|_inf after each evaluation
};

BenchTrace run_bench(const BenchFunction& fn, int budget, double epsilon = 1e-4);

}  // namespace esilc::cli
