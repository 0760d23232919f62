#include "gainsched/powerflow.hpp"

#include <cmath>
#include <string>

#include "gainsched/error.hpp"

namespace gainsched {

InjectionProfile InjectionProfile::zeros(int n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
          Eigen::VectorXd::Zero(n)};
}

InjectionProfile InjectionProfile::loads(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return {Eigen::VectorXd::Zero(p.size()), Eigen::VectorXd::Zero(p.size()), p, q};
}

LinearState lindistflow_solve(const RadialFeeder& feeder, const SensitivityMatrices& m,
                              const InjectionProfile& inj) {
  const int n = feeder.size();
  LinearState st;
  st.P = Eigen::VectorXd::Zero(n);
  st.Q = Eigen::VectorXd::Zero(n);
  // Leaf-to-root accumulation: reverse BFS visits children before parents.
  const auto& order = feeder.bfs_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const BusId bus{*it};
    const int r = RadialFeeder::row(bus);
    const int k = feeder.feeding_segment(bus);
    st.P(k) += inj.u(r) + inj.p_load(r);
    st.Q(k) += inj.v(r) + inj.q_load(r);
    const BusId up = feeder.parent(bus);
    if (up.index != 0) {
      st.P(feeder.feeding_segment(up)) += st.P(k);
      st.Q(feeder.feeding_segment(up)) += st.Q(k);
    }
  }
  st.E = m.R * (inj.u + inj.p_load) + m.X * (inj.v + inj.q_load);
  return st;
}

Eigen::VectorXd baseline_deviation(const SensitivityMatrices& m, const Eigen::VectorXd& p_load,
                                   const Eigen::VectorXd& q_load) {
  return m.R * p_load + m.X * q_load;
}

Eigen::VectorXd voltage_from_deviation(const Eigen::VectorXd& E, double v0) {
  Eigen::VectorXd v(E.size());
  for (Eigen::Index i = 0; i < E.size(); ++i) {
    const double sq = v0 * v0 - E(i);
    if (!(sq > 0.0))
      throw Error("voltage_collapse",
                  "deviation " + std::to_string(E(i)) + " at row " + std::to_string(i) +
                      " leaves no positive squared voltage");
    v(i) = std::sqrt(sq);
  }
  return v;
}

AcState ac_power_flow(const RadialFeeder& feeder, const InjectionProfile& inj,
                      const AcOptions& options) {
  using cd = std::complex<double>;
  const int n = feeder.size();
  const double v0 = feeder.slack_voltage();
  AcState st;
  st.V = Eigen::VectorXcd::Constant(n, cd(v0, 0.0));
  st.S_branch = Eigen::VectorXcd::Zero(n);
  st.I_branch = Eigen::VectorXd::Zero(n);

  Eigen::VectorXcd load(n);
  for (int i = 0; i < n; ++i) load(i) = cd(inj.u(i) + inj.p_load(i), inj.v(i) + inj.q_load(i));

  const auto& order = feeder.bfs_order();
  const auto& segs = feeder.segments();
  Eigen::VectorXcd current(n);  // branch current, indexed by segment
  for (int it = 1; it <= options.max_iter; ++it) {
    current.setZero();
    for (auto b = order.rbegin(); b != order.rend(); ++b) {
      const BusId bus{*b};
      const int r = RadialFeeder::row(bus);
      const int k = feeder.feeding_segment(bus);
      current(k) += std::conj(load(r) / st.V(r));
      const BusId up = feeder.parent(bus);
      if (up.index != 0) current(feeder.feeding_segment(up)) += current(k);
    }
    double change = 0.0;
    for (int b : order) {
      const BusId bus{b};
      const int k = feeder.feeding_segment(bus);
      const BusId up = feeder.parent(bus);
      const cd v_up = up.index == 0 ? cd(v0, 0.0) : st.V(RadialFeeder::row(up));
      const cd next = v_up - cd(segs[k].resistance, segs[k].reactance) * current(k);
      change = std::max(change, std::abs(next - st.V(RadialFeeder::row(bus))));
      st.V(RadialFeeder::row(bus)) = next;
    }
    st.iterations = it;
    st.residual = change;
    if (!std::isfinite(change)) break;
    if (change <= options.tol) {
      st.converged = true;
      break;
    }
  }
  // Branch quantities from the final voltages.
  current.setZero();
  for (auto b = order.rbegin(); b != order.rend(); ++b) {
    const BusId bus{*b};
    const int r = RadialFeeder::row(bus);
    const int k = feeder.feeding_segment(bus);
    current(k) += std::conj(load(r) / st.V(r));
    const BusId up = feeder.parent(bus);
    if (up.index != 0) current(feeder.feeding_segment(up)) += current(k);
  }
  for (int k = 0; k < n; ++k) {
    const BusId up = segs[k].from;
    const cd v_up = up.index == 0 ? cd(v0, 0.0) : st.V(RadialFeeder::row(up));
    st.S_branch(k) = v_up * std::conj(current(k));
    st.I_branch(k) = std::abs(current(k));
  }
  return st;
}

const AcState& require_converged(const AcState& state) {
  if (!state.converged)
    throw Error("ac_divergence", "AC power flow did not converge after " +
                                     std::to_string(state.iterations) +
                                     " iterations (residual " + std::to_string(state.residual) +
                                     ")");
  return state;
}

Eigen::VectorXd ac_deviation(const RadialFeeder& feeder, const AcState& state) {
  const double v0 = feeder.slack_voltage();
  return (Eigen::VectorXd::Constant(state.V.size(), v0 * v0) - state.V.cwiseAbs2()).eval();
}

std::complex<double> substation_power(const RadialFeeder& feeder, const AcState& state) {
  std::complex<double> total = 0.0;
  for (int c : feeder.children(kSlackBus)) total += state.S_branch(feeder.feeding_segment(BusId{c}));
  return total;
}

LossReport losses(const RadialFeeder& feeder, const LinearState& state) {
  const auto& segs = feeder.segments();
  LossReport rep{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(segs.size()))};
  for (std::size_t k = 0; k < segs.size(); ++k) {
    rep.per_segment(k) = segs[k].resistance * (state.P(k) * state.P(k) + state.Q(k) * state.Q(k));
  }
  rep.total = rep.per_segment.sum();
  return rep;
}

LossReport losses(const RadialFeeder& feeder, const AcState& state) {
  const auto& segs = feeder.segments();
  LossReport rep{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(segs.size()))};
  for (std::size_t k = 0; k < segs.size(); ++k) {
    rep.per_segment(k) = segs[k].resistance * state.I_branch(k) * state.I_branch(k);
  }
  rep.total = rep.per_segment.sum();
  return rep;
}

}  // namespace gainsched
