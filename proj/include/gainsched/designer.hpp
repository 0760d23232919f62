#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gainsched/control.hpp"
#include "gainsched/network.hpp"
#include "gainsched/program.hpp"
#include "gainsched/storage.hpp"

namespace gainsched {

enum class Linearization { taylor_at_zero, previous_steady_state };

struct DesignConfig {
  double epsilon = 0.1;
  bool include_voltage_eq = false;
  Linearization linearization = Linearization::taylor_at_zero;
  bool final_charge_enforced = false;
  SolveOptions solver;
};

/// Throws Error("config") unless 0 < epsilon <= 1.
void validate(const DesignConfig& config);

/// Uncontrollable load per horizon period (per unit).
struct Forecast {
  std::vector<Eigen::VectorXd> p;
  std::vector<Eigen::VectorXd> q;
  std::vector<Eigen::VectorXd> e_tilde;  // R p + X q, filled by make_forecast
  int size() const { return static_cast<int>(p.size()); }
};

Forecast make_forecast(const SensitivityMatrices& m, std::vector<Eigen::VectorXd> p,
                       std::vector<Eigen::VectorXd> q);

struct GainPeriod {
  double start_h = 0.0;  // offset from the schedule's anchor
  double duration_h = 0.0;
  GainVector gains;
  double frobenius = 0.0;
  double spectral_radius = 0.0;
};

struct GainSchedule {
  std::vector<GainPeriod> periods;
  /// Gains active at `offset_h` hours after the anchor; the last period is
  /// held beyond the end.
  const GainVector& at(double offset_h) const;
};

/// Fills frobenius and spectral_radius of every period.
void annotate(GainSchedule& schedule, const SensitivityMatrices& m);

/// Single period schedule from constant gains.
GainSchedule constant_schedule(const SensitivityMatrices& m, const GainVector& gains, double duration_h);

/// g = (1 - epsilon) / rho(R + X).
double design_direct(const SensitivityMatrices& m, double epsilon);

/// Gains of the Direct method on the buses listed in `active` (others 0).
GainVector direct_gains(const SensitivityMatrices& m, double epsilon, const std::vector<bool>& active);

struct OptBenchResult {
  GainVector gains;
  double max_deviation = 0.0;  // optimal s
  Solution solution;
};

/// min ||(I + R A + X B) E_tilde||_inf subject to ||GH||_F <= 1 - epsilon and
/// alpha, beta >= 0 on the `active` buses. Throws Error("solver") when the
/// program is not solved to optimality.
OptBenchResult design_optbench(const SensitivityMatrices& m, const Eigen::VectorXd& e_tilde, double epsilon,
                               const std::vector<bool>& active, const SolveOptions& solver = {});

/// Expansion point for the previous_steady_state linearisation, per period.
struct LinearizationPoint {
  std::vector<GainVector> gains;
  std::vector<Eigen::VectorXd> E;
};

/// Variable handles of an OPF-PC instance. Entries are -1 where a bus has no
/// device (its u, v and gains are fixed at 0 and not part of the program).
struct OpfpcProgram {
  ConvexProgram program;
  TimeGrid grid;
  Forecast forecast;
  std::vector<std::vector<VarId>> u, v, alpha, beta;  // [t][bus row]
  std::vector<std::vector<VarId>> P, Q;               // [t][segment]
  std::vector<std::vector<VarId>> E;                  // empty unless used
  std::vector<int> battery_of_row;                    // index into batteries, or -1
  std::vector<Eigen::VectorXd> expansion_E;           // E0(t) used in the coupling
  double energy_scale = 0.0;                          // kWh per (p.u. * h)
};

/// Multi-period loss-minimising gain design. Batteries are given in device
/// units; their current state of charge is c_init and the final target is
/// c_final (or c_init when absent). Throws Error("battery") on inconsistent
/// battery data.
OpfpcProgram build_opfpc(const RadialFeeder& feeder, const SensitivityMatrices& m, const Forecast& forecast,
                         const std::vector<BatterySpec>& batteries, const TimeGrid& grid,
                         const DesignConfig& config, const LinearizationPoint* point = nullptr);

/// Per-period gains from an optimal solution; the gain of a bus whose
/// expansion deviation is |E0| <= 1e-10 is set to 0. Throws Error("solver")
/// for non-optimal solutions.
GainSchedule extract_gains(const OpfpcProgram& opf, const Solution& solution, const SensitivityMatrices& m,
                           double epsilon);

struct OpfpcResult {
  GainSchedule schedule;
  Solution solution;
  int num_variables = 0;
  int num_constraints = 0;
};

OpfpcResult design_opfpc(const RadialFeeder& feeder, const SensitivityMatrices& m, const Forecast& forecast,
                         const std::vector<BatterySpec>& batteries, const TimeGrid& grid,
                         const DesignConfig& config, const LinearizationPoint* point = nullptr);

/// Buses (by row) carrying a device with positive rating.
std::vector<bool> active_rows(int n, const std::vector<BatterySpec>& batteries);

}  // namespace gainsched
