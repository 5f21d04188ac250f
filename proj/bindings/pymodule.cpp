// pybind11 bindings exposing the main operations: moments, scalar prox and
// Moreau envelopes, spectral transforms, the saddle solvers with their error
// predictions, phase-boundary analysis, and seeded Monte Carlo trials.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "tlphase/phase.hpp"
#include "tlphase/prox.hpp"
#include "tlphase/quadrature.hpp"
#include "tlphase/saddle.hpp"
#include "tlphase/simulate.hpp"
#include "tlphase/spectral.hpp"

namespace py = pybind11;
using namespace tlphase;

namespace {

TaskSpec spec_from_dict(const py::dict& d) {
  const nlohmann::json j = nlohmann::json::parse(
      py::str(py::module_::import("json").attr("dumps")(d)).cast<std::string>());
  return validate(task_spec_from_json(j));
}

py::dict spec_to_dict(const TaskSpec& spec) {
  const std::string dumped = to_json(spec).dump();
  return py::module_::import("json").attr("loads")(dumped).cast<py::dict>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "asymptotics and simulation for perceptron transfer learning";

  py::enum_<Activation>(m, "Activation")
      .value("identity", Activation::Identity)
      .value("relu", Activation::Relu)
      .value("sign", Activation::Sign);

  py::class_<Moments>(m, "Moments")
      .def_readonly("c", &Moments::c)
      .def_readonly("v", &Moments::v)
      .def("__repr__", [](const Moments& mo) {
        return "Moments(c=" + std::to_string(mo.c) + ", v=" + std::to_string(mo.v) + ")";
      });

  m.def("moments", &moments, py::arg("phi"));
  m.def("moments_quadrature", &moments_quadrature, py::arg("phi"), py::arg("order") = 80);
  m.def("apply_activation", &apply_activation, py::arg("phi"), py::arg("x"));

  py::class_<EnvelopeEval>(m, "EnvelopeEval")
      .def_readonly("value", &EnvelopeEval::value)
      .def_readonly("prox", &EnvelopeEval::prox)
      .def_readonly("d_da", &EnvelopeEval::d_da);

  const auto loss_kind = [](const std::string& kind, const std::string& form) {
    return LossKind{loss_from_string(kind), loss_form_from_string(form)};
  };
  m.def("prox",
        [loss_kind](const std::string& kind, const std::string& form, double y,
                    double a, double b) { return prox(loss_kind(kind, form), y, a, b); },
        py::arg("loss"), py::arg("form"), py::arg("y"), py::arg("a"), py::arg("b"));
  m.def("moreau",
        [loss_kind](const std::string& kind, const std::string& form, double y,
                    double a, double b) { return moreau(loss_kind(kind, form), y, a, b); },
        py::arg("loss"), py::arg("form"), py::arg("y"), py::arg("a"), py::arg("b"));

  m.def("spectral_T",
        [](const py::dict& d, double sigma) {
          const nlohmann::json j = nlohmann::json::parse(
              py::str(py::module_::import("json").attr("dumps")(d)).cast<std::string>());
          return spectral_T(spectral_dist_from_json(j), sigma);
        },
        py::arg("spectrum"), py::arg("sigma"));

  py::class_<SaddleSolution>(m, "SaddleSolution")
      .def_readonly("q", &SaddleSolution::q)
      .def_readonly("r", &SaddleSolution::r)
      .def_readonly("sigma", &SaddleSolution::sigma)
      .def_readonly("objective", &SaddleSolution::objective)
      .def("__repr__", [](const SaddleSolution& s) {
        return "SaddleSolution(q=" + std::to_string(s.q) + ", r=" + std::to_string(s.r) +
               ")";
      });

  m.def("solve_source",
        [](const py::dict& spec) { return solve_source(spec_from_dict(spec)); });
  m.def("solve_target",
        [](const py::dict& spec) { return solve_target(spec_from_dict(spec)); });
  m.def("predict_train_error", [](const py::dict& spec, const SaddleSolution& sol) {
    return predict_train_error(spec_from_dict(spec), sol);
  });
  m.def("predict_gen_error", [](const py::dict& spec, double q, double r) {
    return predict_gen_error(spec_from_dict(spec), q, r);
  });

  m.def("rho_c", [](Activation phi, double alpha_s, double alpha_t) {
    return rho_c(phi, alpha_s, alpha_t).rho_c;
  });
  m.def("g_threshold", &g_threshold, py::arg("alpha_t"), py::arg("alpha_s"));
  m.def("delta_star_numeric", [](const py::dict& spec, int grid) {
    const TaskSpec s = spec_from_dict(spec);
    const DeltaCurve curve = delta_star_numeric(s, solve_source(s), grid);
    return py::make_tuple(curve.delta_star, curve.delta, curve.e_test);
  }, py::arg("spec"), py::arg("grid") = 201);

  py::class_<SummaryStat>(m, "SummaryStat")
      .def_readonly("mean", &SummaryStat::mean)
      .def_readonly("std_error", &SummaryStat::std_error);

  py::class_<TrialRecord>(m, "TrialRecord")
      .def_readonly("seed", &TrialRecord::seed)
      .def_readonly("q_hat", &TrialRecord::q_hat)
      .def_readonly("r_hat", &TrialRecord::r_hat)
      .def_readonly("train_error", &TrialRecord::train_error)
      .def_readonly("gen_error", &TrialRecord::gen_error)
      .def_readonly("solver_iters", &TrialRecord::solver_iters)
      .def_readonly("kkt_residual", &TrialRecord::kkt_residual);

  py::class_<TrialSummary>(m, "TrialSummary")
      .def_readonly("n_trials", &TrialSummary::n_trials)
      .def_readonly("has_std_error", &TrialSummary::has_std_error)
      .def_readonly("q_hat", &TrialSummary::q_hat)
      .def_readonly("r_hat", &TrialSummary::r_hat)
      .def_readonly("train_error", &TrialSummary::train_error)
      .def_readonly("gen_error", &TrialSummary::gen_error)
      .def_readonly("records", &TrialSummary::records);

  m.def("run_trials",
        [](const py::dict& spec, int p, int n_trials, std::uint64_t master_seed,
           int jobs) {
          return run_trials(spec_from_dict(spec), p, n_trials, master_seed, jobs);
        },
        py::arg("spec"), py::arg("p"), py::arg("n_trials"), py::arg("master_seed") = 1,
        py::arg("jobs") = 1);

  m.def("trial_records_csv", &trial_records_csv);
  m.def("validate_spec", [](const py::dict& spec) { return spec_to_dict(spec_from_dict(spec)); });
}
