#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "esilc/direct.hpp"
#include "esilc/ilc.hpp"
#include "esilc/mpc.hpp"
#include "esilc/polytope.hpp"
#include "esilc/scenario.hpp"

namespace py = pybind11;
using namespace esilc;

namespace {

Uncertainty estimate_of(const Scenario& s, const std::optional<Vec>& flat) {
  if (!flat) return Uncertainty::zero(s.plant.states(), s.plant.inputs());
  return Uncertainty::unflatten(*flat, s.plant.states(), s.plant.inputs());
}

py::dict pn_dict(const PnSolution& sol) {
  py::dict d;
  d["xbar0"] = sol.xbar0;
  d["theta"] = sol.theta;
  d["inputs"] = sol.inputs;
  d["states"] = sol.states;
  d["xs"] = sol.xs;
  d["us"] = sol.us;
  d["ys"] = sol.ys;
  d["value"] = sol.value;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tube MPC with iterative model-error learning";

  static py::exception<Error> error(m, "EsilcError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<Polytope>(m, "Polytope")
      .def(py::init<Mat, Vec>(), py::arg("normals"), py::arg("offsets"))
      .def_static("box", py::overload_cast<Eigen::Index, double>(&Polytope::box), py::arg("dim"), py::arg("radius"))
      .def_property_readonly("normals", &Polytope::normals)
      .def_property_readonly("offsets", &Polytope::offsets)
      .def_property_readonly("dim", &Polytope::dim)
      .def_property_readonly("num_facets", &Polytope::num_facets)
      .def("contains", [](const Polytope& p, const Vec& z, double tol) { return contains(p, z, tol); },
           py::arg("point"), py::arg("tol") = 1e-9)
      .def("support", [](const Polytope& p, const Vec& d) { return support(p, d); }, py::arg("direction"));

  py::class_<Scenario>(m, "Scenario")
      .def_readwrite("name", &Scenario::name)
      .def_property(
          "A", [](const Scenario& s) { return s.plant.A; }, [](Scenario& s, const Mat& v) { s.plant.A = v; })
      .def_property(
          "B", [](const Scenario& s) { return s.plant.B; }, [](Scenario& s, const Mat& v) { s.plant.B = v; })
      .def_property(
          "C", [](const Scenario& s) { return s.plant.C; }, [](Scenario& s, const Mat& v) { s.plant.C = v; })
      .def_property(
          "D", [](const Scenario& s) { return s.plant.D; }, [](Scenario& s, const Mat& v) { s.plant.D = v; })
      .def_property(
          "truth", [](const Scenario& s) { return s.truth.flatten(); },
          [](Scenario& s, const Vec& v) { s.truth = Uncertainty::unflatten(v, s.plant.states(), s.plant.inputs()); })
      .def_readwrite("ell_a", &Scenario::ell_a)
      .def_readwrite("ell_b", &Scenario::ell_b)
      .def_readwrite("x0", &Scenario::x0)
      .def_readwrite("X", &Scenario::X)
      .def_readwrite("U", &Scenario::U)
      .def_property(
          "trial_length", [](const Scenario& s) { return s.learning.trial_length; },
          [](Scenario& s, int v) { s.learning.trial_length = v; })
      .def_property(
          "budget", [](const Scenario& s) { return s.learning.budget; },
          [](Scenario& s, int v) { s.learning.budget = v; })
      .def_property(
          "noise", [](const Scenario& s) { return s.learning.noise; },
          [](Scenario& s, double v) { s.learning.noise = v; })
      .def_property(
          "cost_kind", [](const Scenario& s) { return std::string(to_string(s.learning.kind)); },
          [](Scenario& s, const std::string& v) {
            const auto k = parse_cost_kind(v);
            if (!k) throw Error(ErrorCode::InvalidArgument, "cost kind must be identification or performance");
            s.learning.kind = *k;
          })
      .def_property_readonly("reference",
                             [](const Scenario& s) {
                               py::list out;
                               for (const ReferenceStep& r : s.reference) out.append(py::make_tuple(r.start, r.value));
                               return out;
                             })
      .def_property_readonly("domain_lower", [](const Scenario& s) { return s.search_domain().lower(); })
      .def_property_readonly("domain_upper", [](const Scenario& s) { return s.search_domain().upper(); })
      .def("reference_at", &Scenario::reference_at, py::arg("k"))
      .def("validate", &Scenario::validate)
      .def("settling_time", &certain_settling_time);

  m.def("load_scenario", [](const std::string& path) { return load_scenario(path); }, py::arg("path"));
  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("source") = "<scenario>");
  m.def("serialize_scenario", &serialize_scenario, py::arg("scenario"));

  py::class_<MpcController, std::shared_ptr<MpcController>>(m, "Controller")
      .def_property_readonly("K", &MpcController::K)
      .def_property_readonly("K_bar", &MpcController::K_bar)
      .def_property_readonly("P", &MpcController::P)
      .def_property_readonly("L", &MpcController::L)
      .def_property_readonly("disturbance_radius", &MpcController::disturbance_radius)
      .def_property_readonly("tube", &MpcController::tube)
      .def_property_readonly("tube_radius", [](const MpcController& c) { return max_abs_coordinate(c.tube()); })
      .def_property_readonly("X1", &MpcController::X1)
      .def_property_readonly("U1", &MpcController::U1)
      .def_property_readonly("terminal_set", &MpcController::terminal_set)
      .def_property_readonly("terminal_determinedness", &MpcController::terminal_determinedness)
      .def("target_projection",
           [](const MpcController& c, const Vec& y) {
             const TargetState t = c.target_projection(y);
             py::dict d;
             d["theta"] = t.theta;
             d["xs"] = t.xs;
             d["us"] = t.us;
             d["ys"] = t.ys;
             return d;
           },
           py::arg("target"))
      .def("solve", [](const MpcController& c, const Vec& x, const Vec& y) { return pn_dict(c.solve_pn(x, y)); },
           py::arg("x"), py::arg("target"))
      .def("control", py::overload_cast<const Vec&, const Vec&>(&MpcController::control_law, py::const_),
           py::arg("x"), py::arg("target"));

  m.def(
      "synthesize",
      [](const Scenario& s, const std::optional<Vec>& delta_hat) {
        return std::make_shared<MpcController>(
            synthesize(s.plant, estimate_of(s, delta_hat), s.X, s.U, s.tuning, s.ell_a, s.ell_b));
      },
      py::arg("scenario"), py::arg("delta_hat") = py::none());

  py::class_<TrialRecord>(m, "TrialRecord")
      .def_readonly("iteration", &TrialRecord::iteration)
      .def_property_readonly("estimate", [](const TrialRecord& r) { return r.estimate.flatten(); })
      .def_readonly("synthesized", &TrialRecord::synthesized)
      .def_readonly("feasible", &TrialRecord::feasible)
      .def_readonly("steps", &TrialRecord::steps)
      .def_readonly("infeasible_step", &TrialRecord::infeasible_step)
      .def_readonly("failure", &TrialRecord::failure)
      .def_readonly("x", &TrialRecord::x)
      .def_readonly("u", &TrialRecord::u)
      .def_readonly("y", &TrialRecord::y)
      .def_readonly("y_meas", &TrialRecord::y_meas)
      .def_readonly("xbar", &TrialRecord::xbar)
      .def_readonly("e", &TrialRecord::e)
      .def_readonly("r", &TrialRecord::r)
      .def_readonly("ys", &TrialRecord::ys)
      .def_readonly("value", &TrialRecord::value)
      .def_readonly("cost", &TrialRecord::cost)
      .def_property_readonly("tube_violations", &TrialRecord::tube_violations)
      .def_property_readonly("constraint_violations", &TrialRecord::constraint_violations)
      .def_property_readonly("max_tube_error", &TrialRecord::max_tube_error)
      .def_property_readonly("tail_error", [](const TrialRecord& r) { return tail_tracking_error(r); });

  m.def(
      "run_trial",
      [](const Scenario& s, const std::optional<Vec>& delta_hat, std::uint64_t seed) {
        py::gil_scoped_release release;
        return run_trial(s, estimate_of(s, delta_hat), 0, seed);
      },
      py::arg("scenario"), py::arg("delta_hat") = py::none(), py::arg("seed") = 0);

  py::class_<IterationSummary>(m, "IterationSummary")
      .def_readonly("t", &IterationSummary::t)
      .def_readonly("estimate", &IterationSummary::estimate)
      .def_readonly("cost", &IterationSummary::cost)
      .def_readonly("best_cost", &IterationSummary::best_cost)
      .def_readonly("estimate_error", &IterationSummary::estimate_error)
      .def_readonly("tail_error", &IterationSummary::tail_error)
      .def_readonly("feasible", &IterationSummary::feasible);

  py::class_<LearningReport>(m, "LearningReport")
      .def_readonly("iterations", &LearningReport::iterations)
      .def_readonly("best_iteration", &LearningReport::best_iteration)
      .def_property_readonly("best_estimate", [](const LearningReport& r) { return r.best_estimate.flatten(); })
      .def_readonly("best_cost", &LearningReport::best_cost)
      .def_readonly("domain_width", &LearningReport::domain_width)
      .def_readonly("first_trial", &LearningReport::first_trial)
      .def_readonly("best_trial", &LearningReport::best_trial)
      .def_readonly("sweeps", &LearningReport::sweeps)
      .def_readonly("syntheses", &LearningReport::syntheses);

  m.def(
      "run_learning",
      [](const Scenario& s, int jobs, std::uint64_t seed) {
        py::gil_scoped_release release;
        LearningOptions opt;
        opt.jobs = jobs;
        opt.seed = seed;
        return run_learning(s, opt);
      },
      py::arg("scenario"), py::arg("jobs") = 1, py::arg("seed") = 0);

  py::class_<DirectOptimizer>(m, "DirectOptimizer")
      .def(py::init([](const Vec& lower, const Vec& upper, double epsilon, double delta_term, int budget) {
             return DirectOptimizer(SearchDomain(lower, upper), {epsilon, delta_term, budget});
           }),
           py::arg("lower"), py::arg("upper"), py::arg("epsilon") = 1e-4, py::arg("delta_term") = 1e-3,
           py::arg("budget") = 200)
      .def("ask",
           [](DirectOptimizer& o) {
             py::list out;
             for (const Proposal& p : o.ask()) out.append(py::make_tuple(p.id, p.point));
             return out;
           })
      .def("tell", py::overload_cast<std::size_t, double>(&DirectOptimizer::tell), py::arg("id"), py::arg("value"))
      .def("terminated", &DirectOptimizer::terminated)
      .def_property_readonly("evaluations", &DirectOptimizer::evaluations)
      .def_property_readonly("best_point", [](const DirectOptimizer& o) { return o.best().point; })
      .def_property_readonly("best_value", [](const DirectOptimizer& o) { return o.best().value; })
      .def_property_readonly("best_history", &DirectOptimizer::best_history)
      .def_property_readonly("total_volume", &DirectOptimizer::total_volume);
}
