// gainsched command-line front end. Every subcommand prints a JSON document on
// stdout; failures print {"error": {"kind", "message"}} on stderr and exit
// with a nonzero status.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "gainsched/error.hpp"
#include "gainsched/io.hpp"

using namespace gainsched;
using nlohmann::json;

namespace {

struct Flags {
  std::string feeder, scenario, batteries, config, method, out_dir, gains, trace;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  int interval = 0;
  int iterations = 100;
  std::string plant = "linear";
};

struct Inputs {
  Feeder raw;
  std::optional<RadialFeeder> feeder;
  std::optional<Scenario> scenario;
  std::vector<BatterySpec> batteries;
  RunConfig config;
};

Inputs load_inputs(const Flags& f, bool need_scenario) {
  Inputs in;
  if (f.feeder.empty()) throw Error("usage", "--feeder is required");
  in.raw = load_feeder(f.feeder);
  in.feeder = validate_radial(in.raw);
  if (!f.config.empty()) in.config = load_config(f.config);
  if (f.epsilon) {
    in.config.rho.epsilon = *f.epsilon;
    validate(in.config.rho);
  }
  if (f.seed) in.config.rho.seed = *f.seed;
  if (!f.method.empty()) in.config.rho.designer = parse_designer(f.method);
  if (!f.scenario.empty()) in.scenario = load_scenario(f.scenario, in.feeder->size(), in.config.power_factor);
  else if (need_scenario) throw Error("usage", "--scenario is required");
  if (!f.batteries.empty()) {
    in.batteries = load_batteries(f.batteries);
    for (const auto& b : in.batteries)
      if (b.bus.index < 1 || b.bus.index > in.feeder->size())
        throw Error("battery", "battery on unknown bus " + std::to_string(b.bus.index));
  }
  return in;
}

std::vector<int> bus_ids(int n) {
  std::vector<int> ids;
  for (int b = 1; b <= n; ++b) ids.push_back(b);
  return ids;
}

void emit(const json& j, const Flags& f, const std::string& file) {
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!f.out_dir.empty()) {
    fs::create_directories(f.out_dir);
    write_text_file(fs::path(f.out_dir) / file, text);
  }
}

// Gains for one re-optimisation at `interval`. Without a battery roster every
// bus is treated as controllable (only meaningful for direct and optbench).
GainSchedule design(const Inputs& in, int interval, json& extra) {
  const RadialFeeder& feeder = *in.feeder;
  const auto m = build_rx(feeder);
  const RhoConfig& cfg = in.config.rho;
  const int n = feeder.size();
  if (cfg.designer == DesignerKind::direct && in.batteries.empty()) {
    const double g = design_direct(m, cfg.epsilon);
    extra["g"] = g;
    return constant_schedule(m, GainVector::uniform(n, g), cfg.reopt_min / 60.0);
  }
  if (!in.scenario) throw Error("usage", "--scenario is required for this method");
  if (interval < 0 || interval >= in.scenario->size()) throw Error("usage", "--interval outside the scenario");
  std::vector<BatterySpec> roster = in.batteries;
  if (roster.empty()) {
    if (cfg.designer == DesignerKind::opfpc) throw Error("usage", "--batteries is required for opfpc");
    for (int b = 1; b <= n; ++b) roster.push_back({{b}, 1.0, 0.0, 0.0, 0.0, std::nullopt});
  }
  const RhoContext ctx{feeder, m, *in.scenario, roster};
  RhoState st;
  st.interval = interval;
  for (const auto& b : roster) st.soc.push_back(b.c_init);
  auto forecaster = make_forecaster(cfg);
  const RhoStepResult r = rho_step(ctx, st, *forecaster, cfg);
  if (r.source != ScheduleSource::designed) throw Error("solver", r.message);
  if (cfg.designer == DesignerKind::direct) extra["g"] = r.schedule.periods.at(0).gains.alpha.maxCoeff();
  extra["num_variables"] = r.num_variables;
  extra["num_constraints"] = r.num_constraints;
  std::fprintf(stderr, "solve time %.3f s, %d iterations\n", r.solve_time, r.solver_iterations);
  return r.schedule;
}

int cmd_validate(const Flags& f) {
  const Inputs in = load_inputs(f, false);
  json out{{"ok", true}, {"buses", in.feeder->size()}, {"segments", in.raw.segments.size()}};
  if (in.scenario) {
    out["intervals"] = in.scenario->size();
    out["resolution_min"] = in.scenario->resolution_min;
  }
  out["batteries"] = in.batteries.size();
  out["config"] = config_to_json(in.config);
  emit(out, f, "validate.json");
  return 0;
}

int cmd_design(const Flags& f) {
  if (f.method.empty()) throw Error("usage", "--method is required");
  const Inputs in = load_inputs(f, false);
  json out{{"method", to_string(in.config.rho.designer)}, {"epsilon", in.config.rho.epsilon}};
  const GainSchedule s = design(in, f.interval, out);
  out["schedule"] = schedule_to_json(s, bus_ids(in.feeder->size()));
  emit(out, f, "gains.json");
  return 0;
}

int cmd_dynamics(const Flags& f) {
  const Inputs in = load_inputs(f, true);
  const RadialFeeder& feeder = *in.feeder;
  const int n = feeder.size();
  if (f.interval < 0 || f.interval >= in.scenario->size()) throw Error("usage", "--interval outside the scenario");
  GainVector gains;
  json extra;
  if (!f.gains.empty()) {
    const GainSchedule s = schedule_from_json(read_json(f.gains));
    if (s.periods.empty()) throw Error("schema", "gain schedule has no periods");
    gains = s.periods[0].gains;
    if (gains.alpha.size() != n) throw Error("schema", "gain schedule does not match the feeder");
  } else {
    gains = design(in, f.interval, extra).periods.at(0).gains;
  }
  const auto m = build_rx(feeder);
  const double sb = feeder.power_base() / 1000.0;
  DynamicsOptions opt;
  opt.iterations = f.iterations;
  if (f.plant == "ac") opt.plant = Plant::ac;
  else if (f.plant != "linear") throw Error("usage", "--plant must be linear or ac");
  opt.ac = in.config.rho.ac;
  opt.tol = in.config.rho.inner_tol;
  const DynamicTrace tr = simulate_dynamics(feeder, m, gains, in.scenario->p_kw[f.interval] / sb,
                                            in.scenario->q_kvar[f.interval] / sb, Eigen::VectorXd::Zero(n),
                                            Eigen::VectorXd::Zero(n), opt);
  std::ostringstream csv;
  write_dynamics_csv(csv, tr);
  const ClosedLoop cl = closed_loop(m, gains);
  json out{{"plant", f.plant},
           {"iterations", tr.steps()},
           {"converged", tr.converged},
           {"iterations_to_tolerance", tr.iterations_to_tolerance},
           {"spectral_radius", cl.spectral_radius},
           {"norms", {{"two", cl.norms.two}, {"frobenius", cl.norms.frobenius}, {"one", cl.norms.one},
                      {"infinity", cl.norms.infinity}}}};
  if (!f.out_dir.empty()) {
    fs::create_directories(f.out_dir);
    write_text_file(fs::path(f.out_dir) / "dynamics.csv", csv.str());
    out["files"] = {{"dynamics", "dynamics.csv"}};
  } else {
    out["dynamics_csv"] = csv.str();
  }
  emit(out, f, "dynamics.json");
  return 0;
}

int cmd_run(const Flags& f) {
  const Inputs in = load_inputs(f, true);
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioTrace tr = run_rho(*in.feeder, *in.scenario, in.batteries, in.config.rho);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "run time %.2f s, solver time %.2f s (max %.3f s per solve)\n", wall,
               tr.diagnostics.total_solve_time, tr.diagnostics.max_solve_time);
  json report{{"designer", to_string(in.config.rho.designer)},
              {"config", config_to_json(in.config)},
              {"metrics", metrics_to_json(metrics(tr))},
              {"diagnostics", diagnostics_to_json(tr.diagnostics)}};
  if (!f.out_dir.empty()) {
    fs::create_directories(f.out_dir);
    std::ostringstream csv;
    write_trace_csv(csv, tr);
    write_text_file(fs::path(f.out_dir) / "trace.csv", csv.str());
    report["files"] = {{"trace", "trace.csv"}, {"report", "report.json"}};
  }
  emit(report, f, "report.json");
  return 0;
}

int cmd_metrics(const Flags& f) {
  if (f.trace.empty()) throw Error("usage", "--trace is required");
  std::ifstream file(f.trace);
  if (!file) throw Error("io", "cannot open " + f.trace);
  const ScenarioTrace tr = read_trace_csv(file);
  emit(json{{"metrics", metrics_to_json(metrics(tr))}}, f, "metrics.json");
  return 0;
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Droop gain scheduling for distribution feeders with storage"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* c) {
    c->add_option("--feeder", f.feeder, "Feeder JSON");
    c->add_option("--scenario", f.scenario, "Scenario CSV");
    c->add_option("--batteries", f.batteries, "Battery roster JSON");
    c->add_option("--config", f.config, "Run configuration JSON");
    c->add_option("--epsilon", f.epsilon, "Stability margin in (0, 1]");
    c->add_option("--seed", f.seed, "Seed for the noisy forecaster");
    c->add_option("--out-dir", f.out_dir, "Directory for emitted files");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check input files");
  common(validate_cmd);

  auto* design_cmd = app.add_subcommand("design-gains", "Design a gain schedule");
  common(design_cmd);
  design_cmd->add_option("--method", f.method, "direct | optbench | opfpc")
      ->check(CLI::IsMember({"direct", "optbench", "opfpc"}));
  design_cmd->add_option("--interval", f.interval, "Scenario interval to design at");

  auto* dyn_cmd = app.add_subcommand("simulate-dynamics", "Iterate the local control loop for one interval");
  common(dyn_cmd);
  dyn_cmd->add_option("--method", f.method, "Designer used when --gains is absent")
      ->check(CLI::IsMember({"direct", "optbench", "opfpc", "baseline"}));
  dyn_cmd->add_option("--gains", f.gains, "Gain schedule JSON (first period is used)");
  dyn_cmd->add_option("--interval", f.interval, "Scenario interval providing the load");
  dyn_cmd->add_option("--iterations", f.iterations, "Number of control iterations")->check(CLI::PositiveNumber);
  dyn_cmd->add_option("--plant", f.plant, "linear | ac");

  auto* run_cmd = app.add_subcommand("run-rho", "Run the receding-horizon loop over the scenario");
  common(run_cmd);
  run_cmd->add_option("--method", f.method, "Designer (overrides the config)")
      ->check(CLI::IsMember({"direct", "optbench", "opfpc", "baseline"}));

  auto* metrics_cmd = app.add_subcommand("metrics", "Recompute the performance indices of a trace");
  metrics_cmd->add_option("--trace", f.trace, "Trace CSV")->required();
  metrics_cmd->add_option("--out-dir", f.out_dir, "Directory for emitted files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 64);
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(f);
    if (design_cmd->parsed()) return cmd_design(f);
    if (dyn_cmd->parsed()) return cmd_dynamics(f);
    if (run_cmd->parsed()) return cmd_run(f);
    if (metrics_cmd->parsed()) return cmd_metrics(f);
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 2);
  }
  return fail("usage", "no subcommand", 64);
}
