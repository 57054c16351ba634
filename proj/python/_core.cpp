#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mtdc/config.hpp"
#include "mtdc/errors.hpp"
#include "mtdc/stability.hpp"

namespace py = pybind11;
using namespace mtdc;

namespace {

std::string kind_name(ControllerKind k) { return k == ControllerKind::kDroop ? "droop" : "distributed"; }

ControllerKind kind_from(const std::string& s) {
  if (s == "droop") return ControllerKind::kDroop;
  if (s == "distributed") return ControllerKind::kDistributed;
  throw ValidationError("controller must be 'droop' or 'distributed'");
}

py::dict equilibrium_dict(const ConfigDocument& doc, bool post_step) {
  const Eigen::VectorXd& inj = post_step ? doc.scenario.post_injections : doc.scenario.pre_injections;
  const ClosedLoopSystem sys = close_loop(doc.line_topology(), doc.params, doc.make_controller(), inj);
  const EquilibriumReport eq = equilibrium(sys);
  py::dict d;
  d["voltages"] = eq.voltages;
  d["currents"] = eq.currents;
  d["total_currents"] = eq.total_currents;
  if (eq.references) {
    d["references"] = *eq.references;
    d["offset"] = eq.offset;
    const BoundResult b = voltage_bound(sys, eq);
    d["bound_lhs"] = b.lhs;
    d["bound_rhs"] = b.rhs;
    d["bound_holds"] = b.holds;
  }
  return d;
}

py::dict stability_dict(const ConfigDocument& doc) {
  py::dict d;
  if (doc.controller == ControllerKind::kDroop) {
    const ClosedLoopSystem sys =
        close_loop(doc.line_topology(), doc.params, doc.make_controller(), doc.scenario.post_injections);
    const HurwitzResult h = hurwitz_check(sys.state_matrix);
    d["hurwitz"] = h.hurwitz;
    d["spectral_abscissa"] = h.spectral_abscissa;
    return d;
  }
  const StabilityReport r = analyze_distributed(doc.line_topology(), doc.comm_topology(), doc.params, doc.gamma);
  d["hurwitz"] = r.hurwitz;
  d["spectral_abscissa"] = r.spectral_abscissa;
  d["condition8_value"] = r.condition8_value;
  d["condition8_holds"] = r.condition8_holds;
  d["condition9_value"] = r.condition9_value;
  d["condition9_holds"] = r.condition9_holds;
  return d;
}

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, std::size_t n) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  return out;
}

py::dict simulate_dict(const ConfigDocument& doc, std::optional<double> tau, std::optional<double> horizon) {
  ConfigDocument d = doc;
  if (tau) d.tau = *tau;
  d.scenario.delay = d.tau;
  if (horizon) d.scenario.horizon = *horizon;
  Trajectory t;
  {
    py::gil_scoped_release release;
    t = run_scenario(d.line_topology(), d.params, d.make_controller(), d.scenario);
  }
  py::dict out;
  out["t"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(t.times.data(), static_cast<Eigen::Index>(t.times.size())));
  out["V"] = stack(t.voltages, t.node_count);
  out["u"] = stack(t.currents, t.node_count);
  if (t.has_references) out["Vhat"] = stack(t.references, t.node_count);
  out["diverged"] = t.diverged;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-terminal HVDC droop and distributed averaging control";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<SearchRangeError>(m, "SearchRangeError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<ConfigDocument>(m, "Config")
      .def_readwrite("name", &ConfigDocument::name)
      .def_property_readonly("node_count", &ConfigDocument::node_count)
      .def_property_readonly("capacitance", [](const ConfigDocument& d) { return d.params.capacitance; })
      .def_property_readonly("droop_gain", [](const ConfigDocument& d) { return d.params.droop_gain; })
      .def_property_readonly("regulator", [](const ConfigDocument& d) { return d.params.regulator; })
      .def_property_readonly("nominal_voltage", [](const ConfigDocument& d) { return d.params.nominal_voltage; })
      .def_property(
          "controller", [](const ConfigDocument& d) { return kind_name(d.controller); },
          [](ConfigDocument& d, const std::string& s) {
            const ControllerKind k = kind_from(s);
            if (k == ControllerKind::kDistributed && !d.has_comm()) {
              throw ValidationError("the distributed controller needs communication links");
            }
            d.controller = k;
          })
      .def_readonly("gamma", &ConfigDocument::gamma)
      .def_property(
          "tau", [](const ConfigDocument& d) { return d.tau; },
          [](ConfigDocument& d, double tau) {
            if (!(tau >= 0.0)) throw ValidationError("tau must be non-negative");
            d.tau = tau;
            d.scenario.delay = tau;
          })
      .def_property(
          "horizon", [](const ConfigDocument& d) { return d.scenario.horizon; },
          [](ConfigDocument& d, double h) {
            Scenario s = d.scenario;
            s.horizon = h;
            s.validate(d.node_count());
            d.scenario = s;
          })
      .def_property_readonly("pre_injections", [](const ConfigDocument& d) { return d.scenario.pre_injections; })
      .def_property_readonly("post_injections", [](const ConfigDocument& d) { return d.scenario.post_injections; })
      .def_property_readonly("line_laplacian",
                             [](const ConfigDocument& d) { return build_laplacian(d.line_topology()).matrix(); })
      .def("to_json", &serialize_config)
      .def("__repr__", [](const ConfigDocument& d) {
        return "<mtdc.Config '" + d.name + "' n=" + std::to_string(d.node_count()) + " " + kind_name(d.controller) + ">";
      });

  m.def("preset_names", &preset_names);
  m.def("load_preset", [](const std::string& name) { return load_preset(name); }, py::arg("name") = "paper_4term");
  m.def("parse_config", [](const std::string& path) { return parse_config(path); }, py::arg("path"));
  m.def("parse_config_text", [](const std::string& text) { return parse_config_text(text); }, py::arg("text"));

  m.def("equilibrium", &equilibrium_dict, py::arg("config"), py::arg("post_step") = true,
        "Closed-form steady state for the pre- or post-step injections.");
  m.def("stability", &stability_dict, py::arg("config"),
        "Sufficient conditions (distributed only) and the Hurwitz check of the delay-free loop.");
  m.def("simulate", &simulate_dict, py::arg("config"), py::arg("tau") = py::none(), py::arg("horizon") = py::none(),
        "Integrates the step scenario. Returns t, V, u (and Vhat) as arrays plus the cutoff flag.");
  m.def(
      "critical_delay",
      [](const ConfigDocument& doc, double lo, double hi, double tol) {
        const auto ctrl = std::get<DistributedController>(doc.make_controller());
        DelaySearchResult r;
        {
          py::gil_scoped_release release;
          r = critical_delay_search(doc.line_topology(), doc.params, ctrl, doc.scenario, lo, hi, tol);
        }
        return py::make_tuple(r.critical_delay, r.stable_delay, r.unstable_delay);
      },
      py::arg("config"), py::arg("tau_low") = 0.1, py::arg("tau_high") = 1.0, py::arg("tolerance") = 1e-3,
      "Bisection on the delay; returns (tau_star, stable_delay, unstable_delay).");

  m.def(
      "laplacian",
      [](std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
        std::vector<Edge> e;
        for (const auto& [i, j, w] : edges) e.push_back({i, j, w});
        return build_laplacian(GridTopology(n, std::move(e))).matrix();
      },
      py::arg("n"), py::arg("edges"), "Weighted Laplacian from 0-based (i, j, weight) edges.");
  m.def(
      "hurwitz",
      [](const Eigen::MatrixXd& A) {
        const HurwitzResult h = hurwitz_check(A);
        return py::make_tuple(h.hurwitz, h.spectral_abscissa);
      },
      py::arg("A"));
}
