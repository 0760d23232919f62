#include "gainsched/designer.hpp"

#include <cmath>
#include <string>

#include "gainsched/error.hpp"

namespace gainsched {

namespace {

constexpr double kZeroDeviation = 1e-10;

std::string tag(const char* name, int t, int i) {
  return std::string(name) + "[" + std::to_string(t) + "," + std::to_string(i) + "]";
}

Eigen::VectorXd row_weights(const SensitivityMatrices& m) {
  return m.R.rowwise().squaredNorm() + m.X.rowwise().squaredNorm();
}

// Shrinks gains that overshoot the Frobenius bound by solver round-off.
void enforce_bound(GainVector& g, const SensitivityMatrices& m, double epsilon) {
  const double fro = stability_frobenius(m, g);
  if (fro > 1.0 - epsilon) {
    const double s = (1.0 - epsilon) / fro;
    g.alpha *= s;
    g.beta *= s;
  }
}

}  // namespace

void validate(const DesignConfig& config) {
  if (!(config.epsilon > 0.0 && config.epsilon <= 1.0))
    throw Error("config", "epsilon must lie in (0, 1]");
}

Forecast make_forecast(const SensitivityMatrices& m, std::vector<Eigen::VectorXd> p,
                       std::vector<Eigen::VectorXd> q) {
  if (p.size() != q.size()) throw Error("shape", "forecast p and q lengths differ");
  Forecast f{std::move(p), std::move(q), {}};
  for (int t = 0; t < f.size(); ++t) f.e_tilde.push_back(m.R * f.p[t] + m.X * f.q[t]);
  return f;
}

const GainVector& GainSchedule::at(double offset_h) const {
  if (periods.empty()) throw Error("schedule", "empty gain schedule");
  for (const auto& p : periods)
    if (offset_h < p.start_h + p.duration_h - 1e-9) return p.gains;
  return periods.back().gains;
}

void annotate(GainSchedule& schedule, const SensitivityMatrices& m) {
  for (auto& p : schedule.periods) {
    p.frobenius = stability_frobenius(m, p.gains);
    p.spectral_radius = closed_loop(m, p.gains).spectral_radius;
  }
}

GainSchedule constant_schedule(const SensitivityMatrices& m, const GainVector& gains, double duration_h) {
  GainSchedule s;
  s.periods.push_back({0.0, duration_h, gains, 0.0, 0.0});
  annotate(s, m);
  return s;
}

double design_direct(const SensitivityMatrices& m, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error("config", "epsilon must lie in (0, 1]");
  return (1.0 - epsilon) / spectral_radius(m.R + m.X);
}

GainVector direct_gains(const SensitivityMatrices& m, double epsilon, const std::vector<bool>& active) {
  const double g = design_direct(m, epsilon);
  const int n = static_cast<int>(m.R.rows());
  GainVector gv = GainVector::zeros(n);
  for (int i = 0; i < n; ++i) {
    if (active.at(i)) {
      gv.alpha(i) = g;
      gv.beta(i) = g;
    }
  }
  return gv;
}

std::vector<bool> active_rows(int n, const std::vector<BatterySpec>& batteries) {
  std::vector<bool> active(n, false);
  for (const auto& b : batteries) {
    const int r = RadialFeeder::row(b.bus);
    if (r < 0 || r >= n) throw Error("battery", "battery on unknown bus " + std::to_string(b.bus.index));
    if (b.s_rated > 0.0) active[r] = true;
  }
  return active;
}

OptBenchResult design_optbench(const SensitivityMatrices& m, const Eigen::VectorXd& e_tilde, double epsilon,
                               const std::vector<bool>& active, const SolveOptions& solver) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error("config", "epsilon must lie in (0, 1]");
  const int n = static_cast<int>(m.R.rows());
  ConvexProgram prog;
  std::vector<VarId> a(n), b(n), e(n);
  for (int i = 0; i < n; ++i) {
    if (!active.at(i)) continue;
    a[i] = prog.add_variable(tag("alpha", 0, i), 0.0);
    b[i] = prog.add_variable(tag("beta", 0, i), 0.0);
  }
  for (int i = 0; i < n; ++i) e[i] = prog.add_variable(tag("E", 0, i));
  const VarId s = prog.add_variable("s");

  // E = E_tilde - R diag(alpha) E_tilde - X diag(beta) E_tilde
  for (int i = 0; i < n; ++i) {
    AffineExpr ex;
    ex.add(e[i], 1.0);
    for (int j = 0; j < n; ++j) {
      if (!active[j]) continue;
      ex.add(a[j], m.R(i, j) * e_tilde(j));
      ex.add(b[j], m.X(i, j) * e_tilde(j));
    }
    ex.constant = -e_tilde(i);
    prog.add_affine_eq(ex, tag("steady", 0, i));
    AffineExpr up, down;
    up.add(e[i], 1.0).add(s, -1.0);
    down.add(e[i], -1.0).add(s, -1.0);
    prog.add_affine_ineq(up, tag("dev_hi", 0, i));
    prog.add_affine_ineq(down, tag("dev_lo", 0, i));
  }
  const Eigen::VectorXd w = row_weights(m);
  QuadExpr fro;
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    fro.add_square(a[i], w(i)).add_square(b[i], w(i));
  }
  fro.affine.constant = -(1.0 - epsilon) * (1.0 - epsilon);
  if (!fro.quad.empty()) prog.add_quad_ineq(fro, "stability[0]");

  QuadExpr obj;
  obj.affine.add(s, 1.0);
  prog.set_quad_objective(obj);

  OptBenchResult res;
  res.solution = solve(prog, solver);
  if (!res.solution.optimal())
    throw Error("solver", std::string("benchmark design failed: ") + to_string(res.solution.status));
  res.gains = GainVector::zeros(n);
  for (int i = 0; i < n; ++i) {
    if (!active[i] || std::abs(e_tilde(i)) <= kZeroDeviation) continue;
    res.gains.alpha(i) = std::max(0.0, res.solution[a[i]]);
    res.gains.beta(i) = std::max(0.0, res.solution[b[i]]);
  }
  enforce_bound(res.gains, m, epsilon);
  res.max_deviation = res.solution[s];
  return res;
}

OpfpcProgram build_opfpc(const RadialFeeder& feeder, const SensitivityMatrices& m, const Forecast& forecast,
                         const std::vector<BatterySpec>& batteries, const TimeGrid& grid,
                         const DesignConfig& config, const LinearizationPoint* point) {
  validate(config);
  const int n = feeder.size();
  const int T = grid.size();
  if (forecast.size() != T || static_cast<int>(forecast.e_tilde.size()) != T)
    throw Error("shape", "forecast length differs from the time grid");
  if (T == 0) throw Error("shape", "empty time grid");
  if (!(feeder.power_base() > 0.0)) throw Error("schema", "base required: power_base must be positive");

  OpfpcProgram opf;
  opf.grid = grid;
  opf.forecast = forecast;
  opf.energy_scale = feeder.power_base() / 1000.0;
  opf.battery_of_row.assign(n, -1);
  for (int k = 0; k < static_cast<int>(batteries.size()); ++k) {
    const auto& b = batteries[k];
    validate(b);
    const int r = RadialFeeder::row(b.bus);
    if (r < 0 || r >= n) throw Error("battery", "battery on unknown bus " + std::to_string(b.bus.index));
    if (opf.battery_of_row[r] != -1)
      throw Error("battery", "two batteries on bus " + std::to_string(b.bus.index));
    if (b.s_rated > 0.0) opf.battery_of_row[r] = k;
  }

  const bool prev_ss = config.linearization == Linearization::previous_steady_state && point != nullptr;
  if (prev_ss && (static_cast<int>(point->gains.size()) != T || static_cast<int>(point->E.size()) != T))
    throw Error("shape", "linearisation point length differs from the time grid");
  const bool with_e = config.include_voltage_eq || prev_ss;

  ConvexProgram& prog = opf.program;
  const auto& segs = feeder.segments();
  const int ns = static_cast<int>(segs.size());
  const Eigen::VectorXd w = row_weights(m);
  const double bound_sq = (1.0 - config.epsilon) * (1.0 - config.epsilon);
  const VarId none{};

  opf.u.assign(T, std::vector<VarId>(n, none));
  opf.v = opf.alpha = opf.beta = opf.u;
  opf.P.assign(T, std::vector<VarId>(ns, none));
  opf.Q = opf.P;
  if (with_e) opf.E = opf.u;

  QuadExpr objective;
  for (int t = 0; t < T; ++t) {
    const double dt = grid.deltas[t];
    const Eigen::VectorXd& et = forecast.e_tilde[t];
    opf.expansion_E.push_back(prev_ss ? point->E[t] : et);
    const Eigen::VectorXd& e0 = opf.expansion_E.back();

    for (int i = 0; i < n; ++i) {
      if (opf.battery_of_row[i] < 0) continue;
      opf.u[t][i] = prog.add_variable(tag("u", t, i));
      opf.v[t][i] = prog.add_variable(tag("v", t, i));
      opf.alpha[t][i] = prog.add_variable(tag("alpha", t, i), 0.0);
      opf.beta[t][i] = prog.add_variable(tag("beta", t, i), 0.0);
    }
    for (int k = 0; k < ns; ++k) {
      opf.P[t][k] = prog.add_variable(tag("P", t, k));
      opf.Q[t][k] = prog.add_variable(tag("Q", t, k));
      objective.add_square(opf.P[t][k], segs[k].resistance * dt);
      objective.add_square(opf.Q[t][k], segs[k].resistance * dt);
    }
    if (with_e)
      for (int i = 0; i < n; ++i) opf.E[t][i] = prog.add_variable(tag("E", t, i));

    // Flow balance D P + u + p = 0 for real and reactive parts.
    for (int b = 1; b <= n; ++b) {
      const int i = b - 1;
      const BusId bus{b};
      for (int part = 0; part < 2; ++part) {
        const auto& flow = part == 0 ? opf.P[t] : opf.Q[t];
        AffineExpr ex;
        ex.add(flow[feeder.feeding_segment(bus)], -1.0);
        for (int c : feeder.children(bus)) ex.add(flow[feeder.feeding_segment(BusId{c})], 1.0);
        const VarId dev = part == 0 ? opf.u[t][i] : opf.v[t][i];
        if (dev.id >= 0) ex.add(dev, 1.0);
        ex.constant = part == 0 ? forecast.p[t](i) : forecast.q[t](i);
        prog.add_affine_eq(ex, tag(part == 0 ? "balance_p" : "balance_q", t, i));
      }
    }

    // Linear voltage model E = E_tilde + R u + X v.
    if (with_e) {
      for (int i = 0; i < n; ++i) {
        AffineExpr ex;
        ex.add(opf.E[t][i], 1.0);
        for (int j = 0; j < n; ++j) {
          if (opf.u[t][j].id < 0) continue;
          ex.add(opf.u[t][j], -m.R(i, j));
          ex.add(opf.v[t][j], -m.X(i, j));
        }
        ex.constant = -et(i);
        prog.add_affine_eq(ex, tag("voltage", t, i));
      }
    }

    QuadExpr fro;
    for (int i = 0; i < n; ++i) {
      const int bi = opf.battery_of_row[i];
      if (bi < 0) continue;
      // Control coupling u = -alpha E, linearised: at the zero-power
      // equilibrium E = E_tilde, otherwise around (alpha0, E0).
      for (int part = 0; part < 2; ++part) {
        const VarId pw = part == 0 ? opf.u[t][i] : opf.v[t][i];
        const VarId g = part == 0 ? opf.alpha[t][i] : opf.beta[t][i];
        AffineExpr ex;
        ex.add(pw, 1.0).add(g, e0(i));
        if (prev_ss) {
          const double g0 = part == 0 ? point->gains[t].alpha(i) : point->gains[t].beta(i);
          if (g0 != 0.0) {
            ex.add(opf.E[t][i], g0);
            ex.constant = -g0 * e0(i);
          }
        }
        prog.add_affine_eq(ex, tag(part == 0 ? "coupling_u" : "coupling_v", t, i));
      }
      fro.add_square(opf.alpha[t][i], w(i)).add_square(opf.beta[t][i], w(i));

      const double s_pu = batteries[bi].s_rated * 1000.0 / feeder.power_base();
      int h = 0;
      for (const auto& hp : octagon_normals()) {
        AffineExpr ex;
        if (hp.a != 0.0) ex.add(opf.u[t][i], hp.a);
        if (hp.b != 0.0) ex.add(opf.v[t][i], hp.b);
        ex.constant = -s_pu;
        prog.add_affine_ineq(ex, tag("octagon", t, i) + "#" + std::to_string(h++));
      }

      // Energy window on the cumulative charge up to the end of period t.
      const auto& bs = batteries[bi];
      AffineExpr hi, lo;
      for (int j = 0; j <= t; ++j) {
        hi.add(opf.u[j][i], grid.deltas[j] * opf.energy_scale);
        lo.add(opf.u[j][i], -grid.deltas[j] * opf.energy_scale);
      }
      hi.constant = -(bs.c_max - bs.c_init);
      lo.constant = bs.c_min - bs.c_init;
      prog.add_affine_ineq(hi, tag("energy_hi", t, i));
      prog.add_affine_ineq(lo, tag("energy_lo", t, i));
    }
    if (!fro.quad.empty()) {
      fro.affine.constant = -bound_sq;
      prog.add_quad_ineq(fro, "stability[" + std::to_string(t) + "]");
    }
  }

  if (config.final_charge_enforced) {
    for (int i = 0; i < n; ++i) {
      const int bi = opf.battery_of_row[i];
      if (bi < 0) continue;
      const auto& bs = batteries[bi];
      AffineExpr ex;
      for (int t = 0; t < T; ++t) ex.add(opf.u[t][i], grid.deltas[t] * opf.energy_scale);
      ex.constant = -(bs.c_final.value_or(bs.c_init) - bs.c_init);
      prog.add_affine_eq(ex, "final_charge[" + std::to_string(i) + "]");
    }
  }
  prog.set_quad_objective(objective);
  return opf;
}

GainSchedule extract_gains(const OpfpcProgram& opf, const Solution& solution, const SensitivityMatrices& m,
                           double epsilon) {
  if (!solution.optimal())
    throw Error("solver", std::string("gain design failed: ") + to_string(solution.status));
  const int n = static_cast<int>(m.R.rows());
  GainSchedule s;
  double start = 0.0;
  for (int t = 0; t < opf.grid.size(); ++t) {
    GainVector g = GainVector::zeros(n);
    for (int i = 0; i < n; ++i) {
      if (opf.alpha[t][i].id < 0 || std::abs(opf.expansion_E[t](i)) <= kZeroDeviation) continue;
      g.alpha(i) = std::max(0.0, solution[opf.alpha[t][i]]);
      g.beta(i) = std::max(0.0, solution[opf.beta[t][i]]);
    }
    enforce_bound(g, m, epsilon);
    s.periods.push_back({start, opf.grid.deltas[t], g, 0.0, 0.0});
    start += opf.grid.deltas[t];
  }
  annotate(s, m);
  return s;
}

OpfpcResult design_opfpc(const RadialFeeder& feeder, const SensitivityMatrices& m, const Forecast& forecast,
                         const std::vector<BatterySpec>& batteries, const TimeGrid& grid,
                         const DesignConfig& config, const LinearizationPoint* point) {
  const OpfpcProgram opf = build_opfpc(feeder, m, forecast, batteries, grid, config, point);
  OpfpcResult r;
  r.solution = solve(opf.program, config.solver);
  r.num_variables = opf.program.num_variables();
  r.num_constraints =
      static_cast<int>(opf.program.equalities().size() + opf.program.inequalities().size());
  r.schedule = extract_gains(opf, r.solution, m, config.epsilon);
  return r;
}

}  // namespace gainsched
