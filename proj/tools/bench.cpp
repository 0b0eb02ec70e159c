#include "bench.hpp"

#include <cmath>
#include <numbers>

namespace esilc::cli {

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

const std::vector<BenchFunction>& bench_functions() {
  static const std::vector<BenchFunction> fns = {
      {"sphere", v2(-1.0, -1.0), v2(2.0, 2.0), v2(0.0, 0.0), [](const Vec& x) { return x.squaredNorm(); }},
      {"shifted-quadratic", v2(0.0, 0.0), v2(1.0, 1.0), v2(0.2, 0.7),
       [](const Vec& x) { return (x - v2(0.2, 0.7)).squaredNorm(); }},
      {"rastrigin-2d", v2(-4.0, -4.0), v2(6.0, 6.0), v2(0.0, 0.0),
       [](const Vec& x) {
         double f = 10.0 * static_cast<double>(x.size());
         for (Eigen::Index i = 0; i < x.size(); ++i) {
           f += x(i) * x(i) - 10.0 * std::cos(2.0 * std::numbers::pi * x(i));
         }
         return f;
       }},
  };
  return fns;
}

BenchTrace run_bench(const BenchFunction& fn, int budget, double epsilon) {
  DirectOptimizer opt(SearchDomain(fn.lower, fn.upper), {epsilon, 0.0, budget});
  BenchTrace trace;
  for (auto batch = opt.ask(); !batch.empty(); batch = opt.ask()) {
    for (const Proposal& p : batch) {
      const double v = fn.f(p.point);
      opt.tell(p.id, v);
      trace.points.push_back(p.point);
      trace.values.push_back(v);
      trace.best_values.push_back(opt.best().value);
      trace.best_errors.push_back((opt.best().point - fn.minimizer).cwiseAbs().maxCoeff());
    }
  }
  return trace;
}

}  // namespace esilc::cli
