#pragma once

#include <complex>

#include <Eigen/Dense>

#include "gainsched/network.hpp"

namespace gainsched {

/// Per-bus powers in per unit, consumption positive (battery discharge and PV
/// export are negative). All vectors have length N.
struct InjectionProfile {
  Eigen::VectorXd u;       // controllable real power
  Eigen::VectorXd v;       // controllable reactive power
  Eigen::VectorXd p_load;  // uncontrollable real load
  Eigen::VectorXd q_load;  // uncontrollable reactive load

  static InjectionProfile zeros(int n);
  static InjectionProfile loads(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
};

struct LinearState {
  Eigen::VectorXd E;  // V0^2 - V^2 per bus
  Eigen::VectorXd P;  // per segment, BFS order
  Eigen::VectorXd Q;
};

struct AcState {
  Eigen::VectorXcd V;         // per non-slack bus
  Eigen::VectorXcd S_branch;  // sending-end complex power per segment
  Eigen::VectorXd I_branch;   // current magnitude per segment
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;      // last max |dV|
};

struct AcOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

struct LossReport {
  double total = 0.0;
  Eigen::VectorXd per_segment;
};

LinearState lindistflow_solve(const RadialFeeder& feeder, const SensitivityMatrices& m,
                              const InjectionProfile& inj);

Eigen::VectorXd baseline_deviation(const SensitivityMatrices& m, const Eigen::VectorXd& p_load,
                                   const Eigen::VectorXd& q_load);

/// sqrt(V0^2 - E); throws Error("voltage_collapse") when E >= V0^2.
Eigen::VectorXd voltage_from_deviation(const Eigen::VectorXd& E, double v0);

/// Backward-forward sweep with constant-power loads. A non-converged result
/// is returned with converged == false; use require_converged() to throw.
AcState ac_power_flow(const RadialFeeder& feeder, const InjectionProfile& inj,
                      const AcOptions& options = {});

/// Throws Error("ac_divergence") reporting iterations and residual.
const AcState& require_converged(const AcState& state);

/// Squared-voltage deviation V0^2 - |V|^2 of an AC state.
Eigen::VectorXd ac_deviation(const RadialFeeder& feeder, const AcState& state);

/// Complex power drawn from the slack bus.
std::complex<double> substation_power(const RadialFeeder& feeder, const AcState& state);

/// Sum of r (P^2 + Q^2) over segments (flows at V ~ 1 p.u.).
LossReport losses(const RadialFeeder& feeder, const LinearState& state);
/// Sum of r |I|^2 over segments.
LossReport losses(const RadialFeeder& feeder, const AcState& state);

}  // namespace gainsched
