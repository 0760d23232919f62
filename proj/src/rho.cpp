#include "gainsched/rho.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gainsched/error.hpp"

namespace gainsched {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

int to_intervals(double minutes, double resolution) {
  const double r = minutes / resolution;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-6)
    throw Error("config", "time step of " + std::to_string(minutes) + " min is not a multiple of the scenario resolution");
  return static_cast<int>(k);
}

}  // namespace

HorizonScheme HorizonScheme::standard() { return {{{6, 5.0}, {7, 30.0}, {10, 120.0}}}; }

HorizonScheme HorizonScheme::uniform(int count, double minutes) { return {{{count, minutes}}}; }

void validate(const HorizonScheme& scheme) {
  if (scheme.segments.empty()) throw Error("horizon", "horizon scheme has no segments");
  double prev = 0.0;
  for (const auto& s : scheme.segments) {
    if (s.count <= 0 || !(s.minutes > 0.0)) throw Error("horizon", "horizon segments need positive count and length");
    if (s.minutes < prev) throw Error("horizon", "horizon step lengths must not shrink");
    prev = s.minutes;
  }
}

TimeGrid build_time_grid(const HorizonScheme& scheme, std::optional<double> limit_h) {
  validate(scheme);
  if (limit_h && !(*limit_h > 0.0)) throw Error("horizon", "horizon limit must be positive");
  TimeGrid g;
  double t = 0.0;
  for (const auto& s : scheme.segments) {
    for (int k = 0; k < s.count; ++k) {
      double d = s.minutes / 60.0;
      if (limit_h) {
        if (t >= *limit_h - 1e-12) return g;
        d = std::min(d, *limit_h - t);
      }
      g.deltas.push_back(d);
      t += d;
    }
  }
  return g;
}

void PerfectForecaster::predict(const Scenario& sc, int, int from, int to, Eigen::VectorXd& p,
                                Eigen::VectorXd& q) {
  const int n = static_cast<int>(sc.p_kw.at(0).size());
  p = Eigen::VectorXd::Zero(n);
  q = Eigen::VectorXd::Zero(n);
  for (int i = from; i < to; ++i) {
    p += sc.p_kw[wrap(i, sc.size())];
    q += sc.q_kvar[wrap(i, sc.size())];
  }
  p /= (to - from);
  q /= (to - from);
}

void PersistenceForecaster::predict(const Scenario& sc, int now, int, int, Eigen::VectorXd& p,
                                    Eigen::VectorXd& q) {
  const int last = wrap(now - 1, sc.size());
  p = sc.p_kw[last];
  q = sc.q_kvar[last];
}

void NoisyForecaster::predict(const Scenario& sc, int now, int from, int to, Eigen::VectorXd& p,
                              Eigen::VectorXd& q) {
  exact_.predict(sc, now, from, to, p, q);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double f = 1.0 + sigma_ * nd(rng_);
    p(i) *= f;
    q(i) *= f;
  }
}

const char* to_string(DesignerKind d) {
  switch (d) {
    case DesignerKind::baseline: return "baseline";
    case DesignerKind::direct: return "direct";
    case DesignerKind::optbench: return "optbench";
    case DesignerKind::opfpc: return "opfpc";
  }
  return "?";
}

const char* to_string(ForecasterKind f) {
  switch (f) {
    case ForecasterKind::perfect: return "perfect";
    case ForecasterKind::persistence: return "persistence";
    case ForecasterKind::noisy: return "noisy";
  }
  return "?";
}

const char* to_string(ScheduleSource s) {
  switch (s) {
    case ScheduleSource::designed: return "designed";
    case ScheduleSource::held: return "held";
    case ScheduleSource::zeroed: return "zeroed";
  }
  return "?";
}

DesignerKind parse_designer(const std::string& s) {
  for (auto d : {DesignerKind::baseline, DesignerKind::direct, DesignerKind::optbench, DesignerKind::opfpc})
    if (s == to_string(d)) return d;
  throw Error("config", "unknown designer '" + s + "'");
}

ForecasterKind parse_forecaster(const std::string& s) {
  for (auto f : {ForecasterKind::perfect, ForecasterKind::persistence, ForecasterKind::noisy})
    if (s == to_string(f)) return f;
  throw Error("config", "unknown forecaster '" + s + "'");
}

void validate(const RhoConfig& c) {
  if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) throw Error("config", "epsilon must lie in (0, 1]");
  validate(c.scheme);
  if (!(c.reopt_min > 0.0) || !(c.gain_update_min > 0.0)) throw Error("config", "cadences must be positive");
  if (c.inner_max_iter <= 0 || !(c.inner_tol > 0.0)) throw Error("config", "inner loop settings must be positive");
  if (c.forecast_noise < 0.0) throw Error("config", "forecast noise must be non-negative");
}

std::unique_ptr<Forecaster> make_forecaster(const RhoConfig& config) {
  switch (config.forecaster) {
    case ForecasterKind::perfect: return std::make_unique<PerfectForecaster>();
    case ForecasterKind::persistence: return std::make_unique<PersistenceForecaster>();
    case ForecasterKind::noisy: return std::make_unique<NoisyForecaster>(config.forecast_noise, config.seed);
  }
  throw Error("config", "unknown forecaster");
}

RhoStepResult rho_step(const RhoContext& ctx, const RhoState& state, Forecaster& forecaster,
                       const RhoConfig& config) {
  const int n = ctx.feeder.size();
  const double res = ctx.scenario.resolution_min;
  const double reopt_h = config.reopt_min / 60.0;
  const double now_h = state.interval * res / 60.0;
  const double pu = 1000.0 / ctx.feeder.power_base();
  const std::vector<bool> active = active_rows(n, ctx.batteries);
  RhoStepResult out;

  auto fail = [&](const std::string& why) {
    out.message = why;
    if (state.has_schedule && state.consecutive_failures == 0) {
      out.schedule = state.schedule;
      out.source = ScheduleSource::held;
    } else {
      out.schedule = constant_schedule(ctx.m, GainVector::zeros(n), reopt_h);
      out.source = ScheduleSource::zeroed;
    }
    return out;
  };

  switch (config.designer) {
    case DesignerKind::baseline:
      out.schedule = constant_schedule(ctx.m, GainVector::zeros(n), reopt_h);
      return out;
    case DesignerKind::direct:
      out.schedule = constant_schedule(ctx.m, direct_gains(ctx.m, config.epsilon, active), reopt_h);
      return out;
    case DesignerKind::optbench: {
      Eigen::VectorXd p, q;
      forecaster.predict(ctx.scenario, state.interval, state.interval, state.interval + 1, p, q);
      const Eigen::VectorXd et = baseline_deviation(ctx.m, p * pu, q * pu);
      try {
        const auto r = design_optbench(ctx.m, et, config.epsilon, active, config.solver);
        out.schedule = constant_schedule(ctx.m, r.gains, reopt_h);
        out.solve_time = r.solution.solve_time;
        out.solver_iterations = r.solution.iterations;
        out.num_variables = n + 2 * static_cast<int>(std::count(active.begin(), active.end(), true)) + 1;
        out.num_constraints = 3 * n + 1;
      } catch (const Error& e) {
        return fail(e.what());
      }
      return out;
    }
    case DesignerKind::opfpc:
      break;
  }

  std::optional<double> limit;
  if (config.final_charge_enforced) limit = ctx.scenario.span_h() - now_h;
  const TimeGrid grid = build_time_grid(config.scheme, limit);

  std::vector<Eigen::VectorXd> ps, qs;
  double offset_min = 0.0;
  for (double d : grid.deltas) {
    const int from = state.interval + to_intervals(offset_min, res);
    offset_min += d * 60.0;
    const int to = state.interval + to_intervals(offset_min, res);
    Eigen::VectorXd p, q;
    forecaster.predict(ctx.scenario, state.interval, from, std::max(to, from + 1), p, q);
    ps.push_back(p * pu);
    qs.push_back(q * pu);
  }
  const Forecast fc = make_forecast(ctx.m, ps, qs);

  std::vector<BatterySpec> now_bats = ctx.batteries;
  for (std::size_t k = 0; k < now_bats.size(); ++k) {
    now_bats[k].c_init = std::clamp(state.soc.at(k), now_bats[k].c_min, now_bats[k].c_max);
    if (config.final_charge_enforced) now_bats[k].c_final = ctx.batteries[k].c_final.value_or(ctx.batteries[k].c_init);
  }

  DesignConfig dc;
  dc.epsilon = config.epsilon;
  dc.include_voltage_eq = config.include_voltage_eq;
  dc.linearization = config.linearization;
  dc.final_charge_enforced = config.final_charge_enforced;
  dc.solver = config.solver;

  LinearizationPoint point;
  const bool use_point = config.linearization == Linearization::previous_steady_state && state.has_schedule;
  if (use_point) {
    double start = 0.0;
    for (int t = 0; t < grid.size(); ++t) {
      const GainVector& g0 = state.schedule.at(now_h + start - state.schedule_anchor_h);
      point.gains.push_back(g0);
      point.E.push_back(steady_state(ctx.m, g0, fc.e_tilde[t]).E);
      start += grid.deltas[t];
    }
  }

  try {
    const OpfpcProgram opf = build_opfpc(ctx.feeder, ctx.m, fc, now_bats, grid, dc, use_point ? &point : nullptr);
    const Solution sol = solve(opf.program, config.solver);
    out.solve_time = sol.solve_time;
    out.solver_iterations = sol.iterations;
    out.num_variables = opf.program.num_variables();
    out.num_constraints = static_cast<int>(opf.program.equalities().size() + opf.program.inequalities().size());
    out.schedule = extract_gains(opf, sol, ctx.m, config.epsilon);
  } catch (const Error& e) {
    return fail(e.what());
  }
  return out;
}

ScenarioTrace run_rho(const RadialFeeder& feeder, const Scenario& scenario,
                      const std::vector<BatterySpec>& batteries, const RhoConfig& config) {
  validate(config);
  const int n = feeder.size();
  const int K = scenario.size();
  if (K == 0) throw Error("scenario", "scenario has no intervals");
  if (static_cast<int>(scenario.q_kvar.size()) != K) throw Error("scenario", "reactive series length differs");
  for (int k = 0; k < K; ++k)
    if (scenario.p_kw[k].size() != n || scenario.q_kvar[k].size() != n)
      throw Error("scenario", "scenario rows must cover every bus");
  if (std::abs(scenario.resolution_min - config.gain_update_min) > 1e-9)
    throw Error("config", "gain update cadence must equal the scenario resolution");
  if (!(feeder.power_base() > 0.0)) throw Error("schema", "base required: power_base must be positive");
  const int solve_every = to_intervals(config.reopt_min, scenario.resolution_min);
  if (solve_every <= 0) throw Error("config", "re-optimisation cadence shorter than the resolution");

  const SensitivityMatrices m = build_rx(feeder);
  const double sb_k = feeder.power_base() / 1000.0;  // kW per p.u.
  const double dt = scenario.resolution_min / 60.0;
  const double day_end = scenario.span_h();

  std::vector<int> batt_of_row(n, -1);
  for (int k = 0; k < static_cast<int>(batteries.size()); ++k) {
    validate(batteries[k]);
    const int r = RadialFeeder::row(batteries[k].bus);
    if (r < 0 || r >= n) throw Error("battery", "battery on unknown bus " + std::to_string(batteries[k].bus.index));
    if (batt_of_row[r] != -1) throw Error("battery", "two batteries on bus " + std::to_string(batteries[k].bus.index));
    batt_of_row[r] = k;
  }

  ScenarioTrace trace;
  trace.resolution_min = scenario.resolution_min;
  for (int b = 1; b <= n; ++b) trace.bus_ids.push_back(b);
  RunDiagnostics& diag = trace.diagnostics;

  RhoState state;
  for (const auto& b : batteries) state.soc.push_back(b.c_init);
  auto forecaster = make_forecaster(config);
  const RhoContext ctx{feeder, m, scenario, batteries};

  Eigen::VectorXd prev_u = Eigen::VectorXd::Zero(n), prev_v = Eigen::VectorXd::Zero(n);
  ScheduleSource source = ScheduleSource::designed;

  for (int k = 0; k < K; ++k) {
    state.interval = k;
    const double now_h = k * dt;
    if (k % solve_every == 0) {
      RhoStepResult step = rho_step(ctx, state, *forecaster, config);
      source = step.source;
      if (config.designer == DesignerKind::optbench || config.designer == DesignerKind::opfpc) {
        ++diag.solves;
        diag.total_solve_time += step.solve_time;
        diag.max_solve_time = std::max(diag.max_solve_time, step.solve_time);
        diag.num_variables = std::max(diag.num_variables, step.num_variables);
        diag.num_constraints = std::max(diag.num_constraints, step.num_constraints);
      }
      if (step.source == ScheduleSource::designed) {
        state.consecutive_failures = 0;
      } else {
        ++diag.failures;
        diag.log.push_back("interval " + std::to_string(k) + ": " + step.message + " (" + to_string(step.source) + ")");
        ++state.consecutive_failures;
        ++(step.source == ScheduleSource::held ? diag.held : diag.zeroed);
      }
      if (step.source != ScheduleSource::held) {
        state.schedule = std::move(step.schedule);
        state.schedule_anchor_h = now_h;
      }
      state.has_schedule = true;
    }
    const GainVector gains = state.schedule.at(now_h - state.schedule_anchor_h);

    // Device limits: apparent-power disk plus the energy that can still be
    // moved without leaving [c_min, c_max] (or the final-charge target).
    std::vector<PowerLimits> limits(n, PowerLimits{0.0, 0.0, 0.0});
    std::vector<bool> tightened(n, false);
    for (int i = 0; i < n; ++i) {
      const int bi = batt_of_row[i];
      if (bi < 0) continue;
      const auto& b = batteries[bi];
      const double s_kw = b.s_rated;
      double hi = b.c_max, lo = b.c_min;
      if (config.final_charge_enforced) {
        const double target = b.c_final.value_or(b.c_init);
        const double rest = std::max(0.0, day_end - (now_h + dt));
        hi = std::min(hi, target + s_kw * rest);
        lo = std::max(lo, target - s_kw * rest);
      }
      double u_max = std::clamp((hi - state.soc[bi]) / dt, -s_kw, s_kw);
      double u_min = std::clamp((lo - state.soc[bi]) / dt, -s_kw, s_kw);
      if (u_min > u_max) u_min = u_max;
      tightened[i] = u_max < s_kw || u_min > -s_kw;
      limits[i] = {s_kw / sb_k, u_min / sb_k, u_max / sb_k};
    }

    const Eigen::VectorXd p = scenario.p_kw[k] / sb_k, q = scenario.q_kvar[k] / sb_k;
    Eigen::VectorXd u0 = prev_u, v0 = prev_v;
    for (int i = 0; i < n; ++i) saturate(limits[i], u0(i), v0(i));

    DynamicsOptions opt;
    opt.iterations = config.inner_max_iter;
    opt.tol = config.inner_tol;
    opt.stop_at_tolerance = true;
    opt.plant = Plant::ac;
    opt.ac = config.ac;
    opt.limits = limits;

    IntervalRecord rec;
    rec.time_min = scenario.start_min + k * scenario.resolution_min;
    rec.source = source;
    rec.gains = gains;

    DynamicTrace tr;
    bool ok = true;
    try {
      tr = simulate_dynamics(feeder, m, gains, p, q, u0, v0, opt);
      ok = tr.converged;
    } catch (const Error&) {
      ok = false;
    }
    if (!ok) {
      // Flagged interval: devices idle, plant at its uncontrolled state.
      ++diag.flagged_intervals;
      rec.converged = false;
      rec.gains = GainVector::zeros(n);
      rec.iterations = tr.steps();
      tr.u = {Eigen::VectorXd::Zero(n)};
      tr.v = {Eigen::VectorXd::Zero(n)};
      tr.last_ac = require_converged(
          ac_power_flow(feeder, InjectionProfile{tr.u[0], tr.v[0], p, q}, config.ac));
    } else {
      rec.iterations = tr.iterations_to_tolerance;
      if (config.compare_cold_start) {
        try {
          const DynamicTrace cold = simulate_dynamics(feeder, m, gains, p, q, Eigen::VectorXd::Zero(n),
                                                      Eigen::VectorXd::Zero(n), opt);
          rec.cold_iterations = cold.converged ? cold.iterations_to_tolerance : cold.steps() + 1;
        } catch (const Error&) {
          rec.cold_iterations = config.inner_max_iter + 1;
        }
        if (rec.iterations > rec.cold_iterations) ++diag.warm_worse_than_cold;
      }
      diag.max_iterations = std::max(diag.max_iterations, rec.iterations);
    }

    const Eigen::VectorXd u = tr.u.back(), v = tr.v.back();
    const AcState& ac = tr.last_ac;
    rec.voltage = ac.V.cwiseAbs();
    rec.u_kw = u * sb_k;
    rec.v_kvar = v * sb_k;
    rec.p_kw = scenario.p_kw[k];
    rec.q_kvar = scenario.q_kvar[k];
    rec.loss_kw = losses(feeder, ac).total * sb_k;
    const auto s0 = substation_power(feeder, ac);
    rec.p_sub_kw = s0.real() * sb_k;
    rec.q_sub_kvar = s0.imag() * sb_k;
    rec.soc_kwh = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < n; ++i) {
      const int bi = batt_of_row[i];
      if (bi < 0) continue;
      if (tightened[i] && (u(i) <= limits[i].u_min || u(i) >= limits[i].u_max) &&
          (limits[i].u_min > -limits[i].s_rated || limits[i].u_max < limits[i].s_rated))
        rec.envelope_active = true;
      double soc = state.soc[bi] + rec.u_kw(i) * dt;
      const auto& b = batteries[bi];
      // The power box already keeps SOC inside; only overshoots beyond
      // round-off count as clamps.
      if (soc > b.c_max + 1e-9 || soc < b.c_min - 1e-9) ++diag.soc_clamps;
      soc = std::clamp(soc, b.c_min, b.c_max);
      state.soc[bi] = soc;
      rec.soc_kwh(i) = soc;
    }
    if (rec.envelope_active) ++diag.envelope_intervals;
    prev_u = u;
    prev_v = v;
    trace.intervals.push_back(std::move(rec));
  }
  return trace;
}

Metrics metrics(const ScenarioTrace& trace) {
  Metrics mt;
  if (trace.intervals.empty()) return mt;
  mt.max_volt = -std::numeric_limits<double>::infinity();
  mt.min_volt = std::numeric_limits<double>::infinity();
  const double dt = trace.resolution_min / 60.0;
  for (const auto& r : trace.intervals) {
    if (r.voltage.size() > 0) {
      mt.max_volt = std::max(mt.max_volt, r.voltage.maxCoeff());
      mt.min_volt = std::min(mt.min_volt, r.voltage.minCoeff());
    }
    mt.energy_loss_kwh += r.loss_kw * dt;
    mt.peak_substation_kva = std::max(mt.peak_substation_kva, std::hypot(r.p_sub_kw, r.q_sub_kvar));
  }
  return mt;
}

}  // namespace gainsched
