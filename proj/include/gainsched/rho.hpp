#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gainsched/designer.hpp"
#include "gainsched/powerflow.hpp"
#include "gainsched/storage.hpp"

namespace gainsched {

struct HorizonSegment {
  int count = 0;
  double minutes = 0.0;
};

struct HorizonScheme {
  std::vector<HorizonSegment> segments;
  /// 6 x 5 min, 7 x 30 min, 10 x 2 h: 23 steps covering 24 h.
  static HorizonScheme standard();
  static HorizonScheme uniform(int count, double minutes);
};

/// Throws Error("horizon") for an empty scheme, non-positive entries or
/// step lengths that shrink along the horizon.
void validate(const HorizonScheme& scheme);

/// Step lengths in hours. With `limit_h` the grid stops at that many hours
/// after `now_h`, shortening the step that crosses it.
TimeGrid build_time_grid(const HorizonScheme& scheme, std::optional<double> limit_h = std::nullopt);

/// Per-bus load series in device units at a fixed resolution.
struct Scenario {
  double start_min = 0.0;
  double resolution_min = 5.0;
  std::vector<Eigen::VectorXd> p_kw;    // [interval] -> N
  std::vector<Eigen::VectorXd> q_kvar;  // [interval] -> N
  int size() const { return static_cast<int>(p_kw.size()); }
  double span_h() const { return size() * resolution_min / 60.0; }
};

/// Predicts mean load (kW, kvar) over intervals [from, to) given that the
/// current interval is `now`. Indices may run past the scenario end.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual void predict(const Scenario& sc, int now, int from, int to, Eigen::VectorXd& p,
                       Eigen::VectorXd& q) = 0;
};

/// Reads the scenario ahead; beyond its end the day repeats.
class PerfectForecaster : public Forecaster {
 public:
  void predict(const Scenario& sc, int now, int from, int to, Eigen::VectorXd& p, Eigen::VectorXd& q) override;
};

/// Holds the most recent completed interval (the last one of the day for
/// interval 0).
class PersistenceForecaster : public Forecaster {
 public:
  void predict(const Scenario& sc, int now, int from, int to, Eigen::VectorXd& p, Eigen::VectorXd& q) override;
};

/// Perfect forecast times (1 + sigma * N(0,1)) per bus and request.
class NoisyForecaster : public Forecaster {
 public:
  NoisyForecaster(double sigma, std::uint64_t seed) : sigma_(sigma), rng_(seed) {}
  void predict(const Scenario& sc, int now, int from, int to, Eigen::VectorXd& p, Eigen::VectorXd& q) override;

 private:
  double sigma_;
  std::mt19937_64 rng_;
  PerfectForecaster exact_;
};

enum class DesignerKind { baseline, direct, optbench, opfpc };
enum class ForecasterKind { perfect, persistence, noisy };

const char* to_string(DesignerKind d);
const char* to_string(ForecasterKind f);
DesignerKind parse_designer(const std::string& s);
ForecasterKind parse_forecaster(const std::string& s);

struct RhoConfig {
  double epsilon = 0.1;
  DesignerKind designer = DesignerKind::opfpc;
  HorizonScheme scheme = HorizonScheme::standard();
  double reopt_min = 15.0;        // re-optimisation cadence
  double gain_update_min = 5.0;   // dispatch cadence (must equal the scenario resolution)
  ForecasterKind forecaster = ForecasterKind::perfect;
  double forecast_noise = 0.1;
  std::uint64_t seed = 0;
  bool final_charge_enforced = false;
  bool include_voltage_eq = false;
  Linearization linearization = Linearization::taylor_at_zero;
  int inner_max_iter = 200;
  double inner_tol = 1e-6;
  AcOptions ac;
  bool compare_cold_start = true;
  SolveOptions solver;
};

void validate(const RhoConfig& config);

std::unique_ptr<Forecaster> make_forecaster(const RhoConfig& config);

enum class ScheduleSource { designed, held, zeroed };
const char* to_string(ScheduleSource s);

/// State owned by the receding-horizon loop.
struct RhoState {
  int interval = 0;                  // current 5-min interval
  std::vector<double> soc;           // kWh per battery (roster order)
  GainSchedule schedule;             // active schedule
  double schedule_anchor_h = 0.0;    // time of its first period
  bool has_schedule = false;
  int consecutive_failures = 0;
};

struct RhoStepResult {
  GainSchedule schedule;
  ScheduleSource source = ScheduleSource::designed;
  std::string message;  // solver failure details
  double solve_time = 0.0;
  int solver_iterations = 0;
  int num_variables = 0;
  int num_constraints = 0;
};

/// Network data shared by every step of a run.
struct RhoContext {
  const RadialFeeder& feeder;
  const SensitivityMatrices& m;
  const Scenario& scenario;
  const std::vector<BatterySpec>& batteries;  // c_init is the start-of-day charge
};

/// One re-optimisation: forecasts the horizon from `state.interval`, designs
/// gains with the configured method from the current state of charge and
/// returns the new schedule. A failed solve holds the previous schedule once,
/// then falls back to zero gains.
RhoStepResult rho_step(const RhoContext& ctx, const RhoState& state, Forecaster& forecaster,
                       const RhoConfig& config);

struct IntervalRecord {
  double time_min = 0.0;
  GainVector gains;
  Eigen::VectorXd voltage;  // |V| p.u. per bus
  Eigen::VectorXd u_kw;     // device real power per bus (consumption positive)
  Eigen::VectorXd v_kvar;
  Eigen::VectorXd soc_kwh;  // end of interval, per bus (NaN where no battery)
  Eigen::VectorXd p_kw;     // uncontrollable load
  Eigen::VectorXd q_kvar;
  double loss_kw = 0.0;
  double p_sub_kw = 0.0;
  double q_sub_kvar = 0.0;
  bool converged = true;
  int iterations = 0;        // inner loop, warm start
  int cold_iterations = -1;  // inner loop, cold start (-1 when not compared)
  ScheduleSource source = ScheduleSource::designed;
  bool envelope_active = false;  // plant-side energy clipping bound u
};

struct RunDiagnostics {
  int solves = 0;
  int failures = 0;
  int held = 0;
  int zeroed = 0;
  int flagged_intervals = 0;
  int envelope_intervals = 0;
  int soc_clamps = 0;
  int max_iterations = 0;
  int warm_worse_than_cold = 0;
  double total_solve_time = 0.0;
  double max_solve_time = 0.0;
  int num_variables = 0;
  int num_constraints = 0;
  std::vector<std::string> log;  // one line per design failure
};

struct ScenarioTrace {
  std::vector<int> bus_ids;  // non-slack bus numbers, row order
  double resolution_min = 5.0;
  std::vector<IntervalRecord> intervals;
  RunDiagnostics diagnostics;
};

struct Metrics {
  double max_volt = 1.0;
  double min_volt = 1.0;
  double energy_loss_kwh = 0.0;
  double peak_substation_kva = 0.0;
};

/// Runs a whole scenario: re-optimises every reopt_min, applies the active
/// gains on each interval, iterates the measure -> actuate loop against the
/// AC plant to steady state (warm-started from the previous interval),
/// clips device powers to the disk and to the energy still available, and
/// integrates the state of charge.
ScenarioTrace run_rho(const RadialFeeder& feeder, const Scenario& scenario,
                      const std::vector<BatterySpec>& batteries, const RhoConfig& config);

Metrics metrics(const ScenarioTrace& trace);

}  // namespace gainsched
