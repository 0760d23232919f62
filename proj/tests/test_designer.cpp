#include <cmath>
#include <random>

#include "doctest.h"
#include "gainsched/designer.hpp"
#include "gainsched/error.hpp"
#include "oracles.hpp"

using namespace gainsched;

namespace {

RadialFeeder single(double r, double x, double power_base = 1000.0) {
  Feeder f;
  f.buses = {{0}, {1}};
  f.segments = {{{0}, {1}, r, x}};
  f.power_base = power_base;
  f.voltage_base = 230.0;
  return validate_radial(f);
}

RadialFeeder chain2(double r01, double x01, double r12, double x12) {
  Feeder f;
  f.buses = {{0}, {1}, {2}};
  f.segments = {{{0}, {1}, r01, x01}, {{1}, {2}, r12, x12}};
  f.power_base = 1000.0;
  f.voltage_base = 230.0;
  return validate_radial(f);
}

// 1000 kVA battery on a 1 kVA base: s = 1000 p.u., effectively unlimited.
BatterySpec generous(int bus) { return {{bus}, 1000.0, 1e6, 0.0, 5e5, std::nullopt}; }

Forecast one_period(const SensitivityMatrices& m, Eigen::VectorXd p, Eigen::VectorXd q) {
  return make_forecast(m, {std::move(p)}, {std::move(q)});
}

}  // namespace

TEST_CASE("design_direct") {
  const auto m = build_rx(single(0.05, 0.05));
  CHECK(design_direct(m, 0.1) == 4.5);
  CHECK(design_direct(m, 1.0) == 0.0);
  CHECK_THROWS_AS(design_direct(m, 0.0), Error);

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 15);
    const auto mr = build_rx(validate_radial(oracle::random_feeder(rng, n, 0.001, 0.05, 0.001, 0.05)));
    const double g = design_direct(mr, 0.1);
    // R + X is symmetric PSD, so its spectral radius is its largest eigenvalue.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mr.R + mr.X);
    CHECK(std::abs(g * es.eigenvalues().maxCoeff() - 0.9) < 1e-10);
    const auto cl = closed_loop(mr, GainVector::uniform(n, g));
    CHECK(cl.spectral_radius <= 0.9 + 1e-9);
    // Partial deployment keeps the bound (principal submatrix).
    std::vector<bool> active(n);
    for (int i = 0; i < n; ++i) active[i] = rng() % 2 == 0;
    CHECK(closed_loop(mr, direct_gains(mr, 0.1, active)).spectral_radius <= 0.9 + 1e-9);
  }
}

TEST_CASE("design_optbench single bus") {
  const auto m = build_rx(single(0.05, 0.05));
  const auto r = design_optbench(m, Eigen::VectorXd::Constant(1, 0.19), 0.1, {true});
  // Oracle: minimise |(1 - 0.1 a - 0.1 b) 0.19| over 0.02 (a^2 + b^2) <= 0.81.
  const auto ref = oracle::grid_minimize(
      [](const std::vector<double>& x) { return std::abs((1 - 0.1 * x[0] - 0.1 * x[1]) * 0.19); },
      [](const std::vector<double>& x) { return 0.02 * (x[0] * x[0] + x[1] * x[1]) <= 0.81; }, {0, 0}, {7, 7});
  CHECK(r.max_deviation == doctest::Approx(ref.value).epsilon(1e-4));
  CHECK(r.gains.alpha(0) == doctest::Approx(4.5).epsilon(1e-4));
  CHECK(r.gains.beta(0) == doctest::Approx(4.5).epsilon(1e-4));
  CHECK(stability_frobenius(m, r.gains) <= 0.9 + 1e-9);

  const auto z = design_optbench(m, Eigen::VectorXd::Zero(1), 0.1, {true});
  CHECK(z.gains.alpha(0) == 0.0);
  CHECK(z.gains.beta(0) == 0.0);
}

TEST_CASE("design_optbench respects the stability surrogate on random feeders") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> load(-0.5, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    const auto m = build_rx(validate_radial(oracle::random_feeder(rng, n, 0.001, 0.05, 0.001, 0.05)));
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p(i) = load(rng);
    const Eigen::VectorXd et = baseline_deviation(m, p, 0.33 * p);
    const auto r = design_optbench(m, et, 0.1, std::vector<bool>(n, true));
    CHECK(stability_frobenius(m, r.gains) <= 0.9 + 1e-9);
    CHECK(closed_loop(m, r.gains).spectral_radius <= 0.9 + 1e-9);
    CHECK(r.max_deviation <= et.cwiseAbs().maxCoeff() + 1e-9);
  }
}

TEST_CASE("OPF-PC single bus, single period") {
  const RadialFeeder f = single(0.05, 0.05);
  const auto m = build_rx(f);
  const auto fc = one_period(m, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1));
  DesignConfig cfg;
  const auto opf = build_opfpc(f, m, fc, {generous(1)}, TimeGrid{{1.0}}, cfg);
  // u, v, alpha, beta, P, Q
  CHECK(opf.program.num_variables() == 6);
  const Solution sol = solve(opf.program);
  REQUIRE(sol.optimal());

  // Oracle over (alpha, beta): loss r((1 - 0.1 a)^2 + (0.1 b)^2).
  const auto ref = oracle::grid_minimize(
      [](const std::vector<double>& x) {
        return 0.05 * (std::pow(1 - 0.1 * x[0], 2) + std::pow(0.1 * x[1], 2));
      },
      [](const std::vector<double>& x) { return 0.02 * (x[0] * x[0] + x[1] * x[1]) <= 0.81; }, {0, 0}, {7, 7});
  const auto sched = extract_gains(opf, sol, m, 0.1);
  REQUIRE(sched.periods.size() == 1);
  CHECK(sched.periods[0].gains.alpha(0) == doctest::Approx(ref.x[0]).epsilon(1e-4));
  CHECK(sched.periods[0].gains.alpha(0) == doctest::Approx(6.36396).epsilon(1e-5));
  CHECK(std::abs(sched.periods[0].gains.beta(0)) < 1e-6);
  CHECK(sol[opf.u[0][0]] == doctest::Approx(-0.63640).epsilon(1e-5));
  CHECK(sol.objective_value == doctest::Approx(ref.value).epsilon(1e-4));
  CHECK(sched.periods[0].frobenius <= 0.9 + 1e-9);
  CHECK(sched.periods[0].spectral_radius <= 0.9 + 1e-9);
}

TEST_CASE("OPF-PC zero load gives zero gains") {
  const RadialFeeder f = chain2(0.02, 0.01, 0.03, 0.02);
  const auto m = build_rx(f);
  const Forecast fc = make_forecast(m, {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()},
                                    {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()});
  const auto r = design_opfpc(f, m, fc, {generous(1), generous(2)}, TimeGrid{{0.5, 0.5}}, DesignConfig{});
  CHECK(r.solution.objective_value == doctest::Approx(0.0));
  for (const auto& p : r.schedule.periods) {
    CHECK(p.gains.alpha.isZero());
    CHECK(p.gains.beta.isZero());
  }
}

TEST_CASE("OPF-PC full battery cannot absorb export") {
  const RadialFeeder f = single(0.05, 0.05);
  const auto m = build_rx(f);
  const Forecast fc = make_forecast(m, {Eigen::VectorXd::Constant(1, -0.8), Eigen::VectorXd::Constant(1, -0.6)},
                                    {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)});
  const BatterySpec full{{1}, 5.0, 10.0, 0.0, 10.0, std::nullopt};
  const auto opf = build_opfpc(f, m, fc, {full}, TimeGrid{{0.25, 0.25}}, DesignConfig{});
  const Solution sol = solve(opf.program);
  REQUIRE(sol.optimal());
  for (int t = 0; t < 2; ++t) CHECK(std::abs(sol[opf.u[t][0]]) < 1e-7);
  const auto s = extract_gains(opf, sol, m, 0.1);
  for (const auto& p : s.periods) CHECK(p.gains.alpha(0) < 1e-5);
  // With no reactive load any reactive injection only adds loss.
  CHECK(s.periods[0].gains.beta(0) < 1e-5);
}

TEST_CASE("OPF-PC two periods sharing a small energy budget") {
  // Single bus, p = 1 then 0.5 p.u. for an hour each; a 1 kVA base turns the
  // 0.3 kWh of stored energy into 0.3 p.u.h of discharge.
  const RadialFeeder f = single(0.05, 0.05);
  const auto m = build_rx(f);
  const Forecast fc = make_forecast(m, {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.5)},
                                    {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)});
  const BatterySpec b{{1}, 1000.0, 10.0, 0.0, 0.3, std::nullopt};
  const auto opf = build_opfpc(f, m, fc, {b}, TimeGrid{{1.0, 1.0}}, DesignConfig{});
  const Solution sol = solve(opf.program);
  REQUIRE(sol.optimal());
  const auto ref = oracle::grid_minimize(
      [](const std::vector<double>& a) {
        return 0.05 * (std::pow(1 - 0.1 * a[0], 2) + std::pow(0.5 - 0.05 * a[1], 2));
      },
      [](const std::vector<double>& a) {
        return 0.02 * a[0] * a[0] <= 0.81 && 0.02 * a[1] * a[1] <= 0.81 && 0.1 * a[0] + 0.05 * a[1] <= 0.3;
      },
      {0, 0}, {7, 7});
  const auto s = extract_gains(opf, sol, m, 0.1);
  // The whole budget goes to the heavier period: alpha = (3, 0).
  CHECK(std::abs(s.periods[0].gains.alpha(0) - ref.x[0]) < 1e-3);
  CHECK(std::abs(s.periods[1].gains.alpha(0) - ref.x[1]) < 1e-3);
  CHECK(s.periods[0].gains.alpha(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(sol.objective_value == doctest::Approx(ref.value).epsilon(1e-4));
  CHECK(-(sol[opf.u[0][0]] + sol[opf.u[1][0]]) == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("OPF-PC two-bus chain with one device") {
  const RadialFeeder f = chain2(0.02, 0.01, 0.03, 0.02);
  const auto m = build_rx(f);
  const Eigen::Vector2d p(0.4, 0.6), q(0.1, 0.3);
  const auto fc = one_period(m, p, q);
  const BatterySpec dev{{2}, 1000.0, 1e6, 0.0, 5e5, std::nullopt};
  const auto r = design_opfpc(f, m, fc, {dev}, TimeGrid{{1.0}}, DesignConfig{});
  REQUIRE(r.solution.optimal());
  const double e2 = fc.e_tilde[0](1);
  const double w2 = m.R.row(1).squaredNorm() + m.X.row(1).squaredNorm();
  const auto ref = oracle::grid_minimize(
      [&](const std::vector<double>& g) {
        const double u = -g[0] * e2, v = -g[1] * e2;
        const double p12 = p(1) + u, q12 = q(1) + v;
        const double p01 = p(0) + p12, q01 = q(0) + q12;
        return 0.02 * (p01 * p01 + q01 * q01) + 0.03 * (p12 * p12 + q12 * q12);
      },
      [&](const std::vector<double>& g) { return w2 * (g[0] * g[0] + g[1] * g[1]) <= 0.81; }, {0, 0}, {40, 40});
  const auto& g = r.schedule.periods[0].gains;
  CHECK(g.alpha(0) == 0.0);
  CHECK(g.alpha(1) == doctest::Approx(ref.x[0]).epsilon(1e-4));
  CHECK(g.beta(1) == doctest::Approx(ref.x[1]).epsilon(1e-4));
  CHECK(r.solution.objective_value == doctest::Approx(ref.value).epsilon(1e-4));
}

TEST_CASE("OPF-PC schedules on random feeders: soundness, bookkeeping, dominance") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> load(-0.6, 0.8);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    Feeder raw = oracle::random_feeder(rng, n, 0.002, 0.03, 0.002, 0.03);
    raw.power_base = 10e3;
    const RadialFeeder f = validate_radial(raw);
    const auto m = build_rx(f);
    const TimeGrid grid{{1.0 / 12, 1.0 / 12, 0.5, 2.0}};
    std::vector<Eigen::VectorXd> ps, qs;
    for (int t = 0; t < grid.size(); ++t) {
      Eigen::VectorXd p(n);
      for (int i = 0; i < n; ++i) p(i) = load(rng);
      ps.push_back(p);
      qs.push_back(0.33 * p);
    }
    const Forecast fc = make_forecast(m, ps, qs);
    std::vector<BatterySpec> bats;
    for (int b = 1; b <= n; ++b) bats.push_back({{b}, 1000.0, 1e6, 0.0, 5e5, std::nullopt});
    const auto opf = build_opfpc(f, m, fc, bats, grid, DesignConfig{});
    const Solution sol = solve(opf.program);
    REQUIRE(sol.optimal());
    const auto sched = extract_gains(opf, sol, m, 0.1);
    for (int t = 0; t < grid.size(); ++t) {
      const auto& g = sched.periods[t].gains;
      CHECK(sched.periods[t].frobenius <= 0.9 + 1e-9);
      CHECK(sched.periods[t].spectral_radius <= 0.9 + 1e-9);
      CHECK(g.alpha.minCoeff() >= 0.0);
      CHECK(g.beta.minCoeff() >= 0.0);
      for (int i = 0; i < n; ++i) {
        CHECK(std::abs(-g.alpha(i) * fc.e_tilde[t](i) - sol[opf.u[t][i]]) < 1e-8);
        CHECK(std::abs(-g.beta(i) * fc.e_tilde[t](i) - sol[opf.v[t][i]]) < 1e-8);
      }
    }
    // Direct gains scaled to the Frobenius boundary are feasible for the
    // program (unlimited devices), so their linearised loss cannot be lower.
    GainVector d = GainVector::uniform(n, design_direct(m, 0.1));
    const double fro = stability_frobenius(m, d);
    if (fro > 0.9) {
      d.alpha *= 0.9 / fro;
      d.beta *= 0.9 / fro;
    }
    double direct_loss = 0.0;
    for (int t = 0; t < grid.size(); ++t) {
      InjectionProfile inj{-d.alpha.cwiseProduct(fc.e_tilde[t]), -d.beta.cwiseProduct(fc.e_tilde[t]), ps[t], qs[t]};
      direct_loss += grid.deltas[t] * losses(f, lindistflow_solve(f, m, inj)).total;
    }
    CHECK(sol.objective_value <= direct_loss * (1 + 1e-7) + 1e-12);
  }
}

TEST_CASE("final charge equality") {
  const RadialFeeder f = single(0.05, 0.05, 10e3);
  const auto m = build_rx(f);
  const Forecast fc = make_forecast(m, {Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, -0.3)},
                                    {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)});
  BatterySpec b{{1}, 5.0, 10.0, 0.0, 3.0, 3.0};
  DesignConfig cfg;
  cfg.final_charge_enforced = true;
  const auto opf = build_opfpc(f, m, fc, {b}, TimeGrid{{1.0, 1.0}}, cfg);
  const Solution sol = solve(opf.program);
  REQUIRE(sol.optimal());
  const Eigen::VectorXd soc =
      soc_trajectory(b, Eigen::Vector2d(sol[opf.u[0][0]], sol[opf.u[1][0]]) * 10.0, TimeGrid{{1.0, 1.0}});
  CHECK(soc(1) == doctest::Approx(3.0).epsilon(1e-9));

  b.c_final = 9.5;  // needs 6.5 kWh over 2 h but only 5 kVA available
  const auto bad = build_opfpc(f, m, fc, {b}, TimeGrid{{1.0, 1.0}}, cfg);
  CHECK(solve(bad.program).status == SolveStatus::infeasible);
}

TEST_CASE("battery data is checked") {
  const RadialFeeder f = single(0.05, 0.05);
  const auto m = build_rx(f);
  const auto fc = one_period(m, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1));
  const BatterySpec bad{{1}, 5.0, 10.0, 0.0, 12.0, std::nullopt};
  CHECK_THROWS_AS(build_opfpc(f, m, fc, {bad}, TimeGrid{{1.0}}, DesignConfig{}), Error);
  const BatterySpec elsewhere{{4}, 5.0, 10.0, 0.0, 3.0, std::nullopt};
  CHECK_THROWS_AS(build_opfpc(f, m, fc, {elsewhere}, TimeGrid{{1.0}}, DesignConfig{}), Error);
  DesignConfig cfg;
  cfg.epsilon = 1.5;
  CHECK_THROWS_AS(build_opfpc(f, m, fc, {generous(1)}, TimeGrid{{1.0}}, cfg), Error);
}

TEST_CASE("previous steady state linearisation") {
  const RadialFeeder f = single(0.05, 0.05);
  const auto m = build_rx(f);
  const auto fc = one_period(m, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1));
  DesignConfig cfg;
  cfg.linearization = Linearization::previous_steady_state;

  // Expanding around zero gains reproduces the equilibrium design.
  LinearizationPoint zero{{GainVector::zeros(1)}, {fc.e_tilde[0]}};
  const auto a = design_opfpc(f, m, fc, {generous(1)}, TimeGrid{{1.0}}, cfg, &zero);
  CHECK(a.schedule.periods[0].gains.alpha(0) == doctest::Approx(6.36396).epsilon(1e-5));

  // Around the closed-loop steady state of those gains the design accounts
  // for the feedback, so the realised injection is close to u = -alpha E.
  const GainVector g0 = a.schedule.periods[0].gains;
  const auto ss = steady_state(m, g0, fc.e_tilde[0]);
  LinearizationPoint around{{g0}, {ss.E}};
  const auto opf = build_opfpc(f, m, fc, {generous(1)}, TimeGrid{{1.0}}, cfg, &around);
  REQUIRE(opf.E.size() == 1);
  const Solution sol = solve(opf.program);
  REQUIRE(sol.optimal());
  const double alpha = sol[opf.alpha[0][0]], e = sol[opf.E[0][0]];
  const double u = sol[opf.u[0][0]];
  // Linearisation error is (alpha - alpha0)(E - E0).
  CHECK(std::abs(u + alpha * e) <= std::abs((alpha - g0.alpha(0)) * (e - ss.E(0))) + 1e-9);
  CHECK(stability_frobenius(m, extract_gains(opf, sol, m, 0.1).periods[0].gains) <= 0.9 + 1e-9);
}

TEST_CASE("GainSchedule lookup") {
  const auto m = build_rx(single(0.05, 0.05));
  GainSchedule s;
  s.periods.push_back({0.0, 0.25, GainVector::uniform(1, 1.0)});
  s.periods.push_back({0.25, 0.5, GainVector::uniform(1, 2.0)});
  annotate(s, m);
  CHECK(s.at(0.0).alpha(0) == 1.0);
  CHECK(s.at(0.1).alpha(0) == 1.0);
  CHECK(s.at(0.25).alpha(0) == 2.0);
  CHECK(s.at(5.0).alpha(0) == 2.0);
  CHECK(s.periods[1].frobenius == doctest::Approx(std::sqrt(8.0 * 0.02)));
}
