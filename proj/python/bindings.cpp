// Python bindings: thin wrappers over the core library. Files are read with
// the same loaders as the command-line tool; configs travel as JSON text.

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gainsched/error.hpp"
#include "gainsched/io.hpp"

namespace py = pybind11;
using namespace gainsched;
using nlohmann::json;

namespace {

RunConfig parse_config(const std::string& config_json) {
  return config_json.empty() ? RunConfig{} : config_from_json(json::parse(config_json));
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["max_volt"] = m.max_volt;
  d["min_volt"] = m.min_volt;
  d["energy_loss_kwh"] = m.energy_loss_kwh;
  d["peak_substation_kva"] = m.peak_substation_kva;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Droop gain scheduling core";

  static py::exception<Error> error(mod, "GainschedError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (e.kind() + ": " + e.what()).c_str());
    }
  });

  py::class_<RadialFeeder>(mod, "Feeder")
      .def_property_readonly("size", &RadialFeeder::size)
      .def_property_readonly("power_base", &RadialFeeder::power_base)
      .def_property_readonly("voltage_base", &RadialFeeder::voltage_base)
      .def("parent", [](const RadialFeeder& f, int bus) { return f.parent(BusId{bus}).index; });

  mod.def("load_feeder", [](const std::string& path) { return validate_radial(load_feeder(path)); },
          py::arg("path"));
  mod.def("feeder_from_json", [](const std::string& text) { return validate_radial(feeder_from_json(json::parse(text))); },
          py::arg("text"));

  mod.def("build_rx", [](const RadialFeeder& f) {
    const auto m = build_rx(f);
    return py::make_tuple(m.R, m.X);
  }, py::arg("feeder"));

  mod.def("ac_power_flow", [](const RadialFeeder& f, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                              std::optional<Eigen::VectorXd> u, std::optional<Eigen::VectorXd> v) {
    const int n = f.size();
    InjectionProfile inj{u.value_or(Eigen::VectorXd::Zero(n)), v.value_or(Eigen::VectorXd::Zero(n)), p, q};
    const AcState s = ac_power_flow(f, inj);
    py::dict d;
    d["voltage"] = Eigen::VectorXd(s.V.cwiseAbs());
    d["converged"] = s.converged;
    d["iterations"] = s.iterations;
    d["loss"] = losses(f, s).total;
    return d;
  }, py::arg("feeder"), py::arg("p"), py::arg("q"), py::arg("u") = py::none(), py::arg("v") = py::none());

  mod.def("lindistflow_voltage", [](const RadialFeeder& f, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    const auto m = build_rx(f);
    return voltage_from_deviation(baseline_deviation(m, p, q), f.slack_voltage());
  }, py::arg("feeder"), py::arg("p"), py::arg("q"));

  mod.def("design_direct", [](const RadialFeeder& f, double eps) { return design_direct(build_rx(f), eps); },
          py::arg("feeder"), py::arg("epsilon") = 0.1);

  mod.def("closed_loop", [](const RadialFeeder& f, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
    const ClosedLoop cl = closed_loop(build_rx(f), GainVector{alpha, beta});
    py::dict d;
    d["HG"] = cl.HG;
    d["spectral_radius"] = cl.spectral_radius;
    d["two"] = cl.norms.two;
    d["frobenius"] = cl.norms.frobenius;
    d["one"] = cl.norms.one;
    d["infinity"] = cl.norms.infinity;
    return d;
  }, py::arg("feeder"), py::arg("alpha"), py::arg("beta"));

  mod.def("steady_state", [](const RadialFeeder& f, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    const auto m = build_rx(f);
    const SteadyState s = steady_state(m, GainVector{alpha, beta}, baseline_deviation(m, p, q));
    return py::make_tuple(s.E, s.u, s.v);
  }, py::arg("feeder"), py::arg("alpha"), py::arg("beta"), py::arg("p"), py::arg("q"));

  mod.def("simulate_dynamics", [](const RadialFeeder& f, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                  const Eigen::VectorXd& p, const Eigen::VectorXd& q, int iterations,
                                  const std::string& plant) {
    const int n = f.size();
    DynamicsOptions opt;
    opt.iterations = iterations;
    if (plant == "ac") opt.plant = Plant::ac;
    else if (plant != "linear") throw Error("usage", "plant must be 'linear' or 'ac'");
    const DynamicTrace t = simulate_dynamics(f, build_rx(f), GainVector{alpha, beta}, p, q,
                                             Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), opt);
    py::dict d;
    d["E"] = t.E;
    d["u"] = t.u;
    d["v"] = t.v;
    d["converged"] = t.converged;
    d["iterations_to_tolerance"] = t.iterations_to_tolerance;
    return d;
  }, py::arg("feeder"), py::arg("alpha"), py::arg("beta"), py::arg("p"), py::arg("q"),
     py::arg("iterations") = 100, py::arg("plant") = "linear");

  mod.def("run_rho", [](const std::string& feeder_path, const std::string& scenario_path,
                        const std::string& batteries_path, const std::string& config_json) {
    const RunConfig cfg = parse_config(config_json);
    const RadialFeeder f = validate_radial(load_feeder(feeder_path));
    const Scenario sc = load_scenario(scenario_path, f.size(), cfg.power_factor);
    const auto bats = batteries_path.empty() ? std::vector<BatterySpec>{} : load_batteries(batteries_path);
    ScenarioTrace tr;
    {
      py::gil_scoped_release release;
      tr = run_rho(f, sc, bats, cfg.rho);
    }
    std::ostringstream csv;
    write_trace_csv(csv, tr);
    py::dict d;
    d["metrics"] = metrics_dict(metrics(tr));
    d["diagnostics"] = py::module_::import("json").attr("loads")(diagnostics_to_json(tr.diagnostics).dump());
    d["trace_csv"] = csv.str();
    return d;
  }, py::arg("feeder"), py::arg("scenario"), py::arg("batteries") = "", py::arg("config") = "");

  mod.def("trace_metrics", [](const std::string& trace_csv) {
    std::istringstream in(trace_csv);
    return metrics_dict(metrics(read_trace_csv(in)));
  }, py::arg("trace_csv"));
}
