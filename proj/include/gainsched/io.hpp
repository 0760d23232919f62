#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "gainsched/control.hpp"
#include "gainsched/designer.hpp"
#include "gainsched/network.hpp"
#include "gainsched/rho.hpp"
#include "gainsched/storage.hpp"

namespace gainsched {

namespace fs = std::filesystem;

/// Feeder JSON: {power_base_va, voltage_base_v, slack_voltage_pu, buses,
/// segments: [{from, to, r_pu, x_pu}]}. The result has passed validate_radial.
Feeder feeder_from_json(const nlohmann::json& j);
nlohmann::json feeder_to_json(const Feeder& f);
Feeder load_feeder(const fs::path& path);

/// Scenario CSV: time_min, then p_<bus> (kW) and optional q_<bus> (kvar)
/// columns. Buses without a column carry no load; missing q columns are
/// derived as p * tan(acos(pf)).
Scenario scenario_from_csv(std::istream& in, int n_buses, double power_factor);
Scenario load_scenario(const fs::path& path, int n_buses, double power_factor = 0.95);
void write_scenario_csv(std::ostream& out, const Scenario& sc);

/// {"batteries": [{bus, s_rated_kva, c_max_kwh, c_min_kwh, c_init_kwh, c_final_kwh?}]}
std::vector<BatterySpec> batteries_from_json(const nlohmann::json& j);
nlohmann::json batteries_to_json(const std::vector<BatterySpec>& b);
std::vector<BatterySpec> load_batteries(const fs::path& path);

struct RunConfig {
  RhoConfig rho;
  double power_factor = 0.95;
};

/// Every key is optional; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const fs::path& path);

nlohmann::json schedule_to_json(const GainSchedule& s, const std::vector<int>& bus_ids);
GainSchedule schedule_from_json(const nlohmann::json& j);

/// One row per interval per bus, doubles printed with 17 significant digits.
void write_trace_csv(std::ostream& out, const ScenarioTrace& trace);
ScenarioTrace read_trace_csv(std::istream& in);

/// One row per iteration per bus: k, bus, E, u, v (p.u.).
void write_dynamics_csv(std::ostream& out, const DynamicTrace& trace);

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json diagnostics_to_json(const RunDiagnostics& d);

nlohmann::json read_json(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace gainsched
