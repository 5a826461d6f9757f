#include "horizonlab/runner.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace horizonlab;

namespace {

// Structured results cross the boundary as JSON text; the Python package decodes them.
std::string dump(const nlohmann::json& j) { return j.dump(); }

Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) throw ArgumentError("state must have 1 to 4 entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

ControlProblem make_problem(const std::string& descriptor) {
  const auto j = nlohmann::json::parse(descriptor);
  return j.is_string() ? builtin_problem(j.get<std::string>()) : problem_from_json(j);
}

}  // namespace

PYBIND11_MODULE(_horizonlab, m) {
  m.doc() = "horizonlab native core";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<BlowUpError>(m, "BlowUpError", PyExc_RuntimeError);
  py::register_exception<LatticeOverflowError>(m, "LatticeOverflowError", PyExc_RuntimeError);

  m.def("builtin_problem_names", &builtin_problem_names);

  py::class_<ControlProblem>(m, "ControlProblem")
      .def(py::init(&make_problem), py::arg("descriptor_json"))
      .def_property_readonly("name", &ControlProblem::name)
      .def_property_readonly("state_dim", &ControlProblem::state_dim)
      .def_property_readonly("control_dim", &ControlProblem::control_dim)
      .def_property_readonly("initial_state", [](const ControlProblem& p) { return from_vec(p.initial_state()); })
      .def("dynamics", [](const ControlProblem& p, double t, const std::vector<double>& x,
                          const std::vector<double>& u) { return from_vec(p.dynamics(t, to_vec(x), to_vec(u))); })
      .def("running_cost", [](const ControlProblem& p, double t, const std::vector<double>& x,
                              const std::vector<double>& u) { return p.running_cost(t, to_vec(x), to_vec(u)); })
      .def("to_json", [](const ControlProblem& p) { return dump(problem_to_json(p)); })
      .def("__repr__", [](const ControlProblem& p) { return "<ControlProblem " + p.name() + ">"; });

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](const std::vector<double>& lo, const std::vector<double>& hi, double h, double dt, double T,
                       const std::string& scheme) {
             auto s = GridSpec::uniform(to_vec(lo), to_vec(hi), h, dt, T);
             s.scheme = time_scheme_from_string(scheme);
             s.validate();
             return s;
           }),
           py::arg("lower"), py::arg("upper"), py::arg("h"), py::arg("dt"), py::arg("horizon"),
           py::arg("scheme") = "euler")
      .def_property_readonly("horizon", [](const GridSpec& s) { return s.horizon; })
      .def("with_horizon", &GridSpec::with_horizon)
      .def("refined", &GridSpec::refined)
      .def("to_json", [](const GridSpec& s) { return dump(s.to_json()); });

  py::class_<ValueGrid, std::shared_ptr<ValueGrid>>(m, "ValueGrid")
      .def("evaluate", [](const ValueGrid& g, double t, const std::vector<double>& x) { return g.evaluate(t, to_vec(x)); })
      .def_property_readonly("times", &ValueGrid::times)
      .def_property_readonly("num_layers", &ValueGrid::num_layers)
      .def_property_readonly("nodes_per_layer", &ValueGrid::nodes_per_layer)
      .def("write_csv", [](const ValueGrid& g, const std::string& csv, const std::string& sidecar) {
        write_value_csv(g, csv);
        write_value_sidecar(g, sidecar);
      });

  m.def("solve_finite_horizon", [](const ControlProblem& p, const GridSpec& s) {
    py::gil_scoped_release release;
    return std::make_shared<ValueGrid>(solve_finite_horizon(p, s));
  });
  m.def("read_value_csv", [](const std::string& csv, const std::string& sidecar) {
    return std::make_shared<ValueGrid>(read_value_csv(csv, sidecar));
  });

  m.def("estimate_v_all", [](const ControlProblem& p, const GridSpec& s, const std::vector<double>& taus,
                             const std::vector<double>& b, double tol) {
    LimitOptions o;
    o.tolerance = tol;
    py::gil_scoped_release release;
    return dump(estimate_v_all(p, s, HorizonSequence(taus), 0.0, to_vec(b), o).to_json());
  });
  m.def("estimate_v_inf", [](const ControlProblem& p, const std::vector<double>& taus, const std::vector<double>& b,
                             double tol) {
    const HorizonSequence seq(taus);
    py::gil_scoped_release release;
    return dump(estimate_v_inf(p, to_vec(b), 0.0, ControlFamily::standard(p, seq), seq, tol).to_json());
  });

  m.def("pmp_certificate", [](const ControlProblem& p, std::shared_ptr<ValueGrid> V, const std::string& control,
                              const std::vector<double>& taus, const GridSpec& s) {
    const auto u = ControlSignal::from_json(nlohmann::json::parse(control));
    py::gil_scoped_release release;
    const auto cert = pmp_certificate(p, as_field(std::move(V)), u, HorizonSequence(taus), s);
    auto j = cert.report.to_json();
    j["arc_times"] = cert.arc.times;
    nlohmann::json psi = nlohmann::json::array();
    for (const auto& v : cert.arc.psi) psi.push_back(from_vec(v));
    j["arc_psi"] = psi;
    return dump(j);
  });

  m.def("frechet_super_test", [](const std::function<double(std::vector<double>)>& f, const std::vector<double>& base,
                                 const std::vector<double>& zeta, double r0, double eta) {
    const StateField field = [&f](const Vec& x) { return f(from_vec(x)); };
    return frechet_super_test(SuperdifferentialProbe::make(field, to_vec(base), r0, 6, eta), to_vec(zeta));
  }, py::arg("f"), py::arg("base"), py::arg("zeta"), py::arg("r0") = 0.1, py::arg("eta") = 1e-3);

  m.def("unit_speed_min_time", [](const std::vector<double>& y, const std::vector<double>& z, double dt, double cap) {
    TimeSearchOptions o;
    o.dt = dt;
    o.h = dt;
    o.cap = cap;
    const auto r = min_time_estimate(unit_speed_problem(static_cast<int>(y.size())), 0.0, to_vec(y), to_vec(z), o);
    return r.time;
  }, py::arg("y"), py::arg("z"), py::arg("dt") = 0.01, py::arg("cap") = 5.0);

  m.def("run", [](const std::string& config_json) {
    const auto config = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run(config);
    }
    return py::make_tuple(r.exit_code, r.message, r.outputs, dump(r.summary));
  });
  m.def("emit_plot_data", &emit_plot_data);
  m.def("fnv1a64_file", &fnv1a64_file);
}
