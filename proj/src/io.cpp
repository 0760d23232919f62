#include "gainsched/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "gainsched/error.hpp"

namespace gainsched {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("schema", "cannot parse '" + s + "' as a number in " + what);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error("schema", std::string("missing field '") + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error("schema", std::string("field '") + key + "' in " + where + ": " + e.what());
  }
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  return in;
}

}  // namespace

json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("schema", path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
}

Feeder feeder_from_json(const json& j) {
  if (!j.is_object()) throw Error("schema", "feeder must be a JSON object");
  if (!j.contains("power_base_va") || !j.contains("voltage_base_v"))
    throw Error("schema", "base required: power_base_va and voltage_base_v must be given");
  Feeder f;
  f.power_base = get<double>(j, "power_base_va", "feeder");
  f.voltage_base = get<double>(j, "voltage_base_v", "feeder");
  if (!(f.power_base > 0.0) || !(f.voltage_base > 0.0))
    throw Error("schema", "base required: power_base_va and voltage_base_v must be positive");
  f.slack_voltage = j.value("slack_voltage_pu", 1.0);
  for (int b : get<std::vector<int>>(j, "buses", "feeder")) f.buses.push_back({b});
  const json segs = get<json>(j, "segments", "feeder");
  if (!segs.is_array()) throw Error("schema", "segments must be an array");
  for (const auto& s : segs) {
    f.segments.push_back({{get<int>(s, "from", "segment")},
                          {get<int>(s, "to", "segment")},
                          get<double>(s, "r_pu", "segment"),
                          get<double>(s, "x_pu", "segment")});
  }
  validate_radial(f);
  return f;
}

json feeder_to_json(const Feeder& f) {
  json j;
  j["power_base_va"] = f.power_base;
  j["voltage_base_v"] = f.voltage_base;
  j["slack_voltage_pu"] = f.slack_voltage;
  std::vector<int> buses;
  for (auto b : f.buses) buses.push_back(b.index);
  j["buses"] = buses;
  j["segments"] = json::array();
  for (const auto& s : f.segments)
    j["segments"].push_back({{"from", s.from.index}, {"to", s.to.index}, {"r_pu", s.resistance}, {"x_pu", s.reactance}});
  return j;
}

Feeder load_feeder(const fs::path& path) { return feeder_from_json(read_json(path)); }

Scenario scenario_from_csv(std::istream& in, int n_buses, double power_factor) {
  if (!(power_factor > 0.0 && power_factor <= 1.0)) throw Error("schema", "power factor must lie in (0, 1]");
  std::string line;
  if (!std::getline(in, line)) throw Error("scenario", "empty scenario file");
  const auto header = split(line);
  if (header.empty() || header[0] != "time_min") throw Error("scenario", "first column must be time_min");
  std::vector<std::pair<char, int>> cols;  // ('p' | 'q', row)
  std::map<std::pair<char, int>, bool> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h.size() < 3 || (h[0] != 'p' && h[0] != 'q') || h[1] != '_')
      throw Error("scenario", "unexpected column '" + h + "'");
    int bus = 0;
    try {
      bus = std::stoi(h.substr(2));
    } catch (const std::exception&) {
      throw Error("scenario", "unexpected column '" + h + "'");
    }
    if (bus < 1 || bus > n_buses) throw Error("scenario", "column '" + h + "' refers to an unknown bus");
    if (seen[{h[0], bus}]) throw Error("scenario", "duplicate column '" + h + "'");
    seen[{h[0], bus}] = true;
    cols.push_back({h[0], bus - 1});
  }
  const double k = std::tan(std::acos(power_factor));

  Scenario sc;
  std::vector<double> times;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error("scenario", "ragged row at line " + std::to_string(lineno));
    const double t = parse_double(cells[0], "line " + std::to_string(lineno));
    if (!times.empty() && !(t > times.back()))
      throw Error("scenario", "timestamps must increase (line " + std::to_string(lineno) + ")");
    times.push_back(t);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_buses), q = Eigen::VectorXd::Zero(n_buses);
    std::vector<bool> has_q(n_buses, false);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = parse_double(cells[c + 1], "line " + std::to_string(lineno));
      if (std::isnan(v)) throw Error("scenario", "empty cell at line " + std::to_string(lineno));
      if (cols[c].first == 'p') {
        p(cols[c].second) = v;
      } else {
        q(cols[c].second) = v;
        has_q[cols[c].second] = true;
      }
    }
    for (int i = 0; i < n_buses; ++i)
      if (!has_q[i]) q(i) = p(i) * k;
    sc.p_kw.push_back(p);
    sc.q_kvar.push_back(q);
  }
  if (times.empty()) throw Error("scenario", "scenario has no rows");
  sc.start_min = times.front();
  if (times.size() > 1) {
    sc.resolution_min = times[1] - times[0];
    for (std::size_t i = 2; i < times.size(); ++i)
      if (std::abs(times[i] - times[i - 1] - sc.resolution_min) > 1e-9)
        throw Error("scenario", "timestamps must be evenly spaced");
  }
  return sc;
}

Scenario load_scenario(const fs::path& path, int n_buses, double power_factor) {
  std::ifstream in = open_in(path);
  return scenario_from_csv(in, n_buses, power_factor);
}

void write_scenario_csv(std::ostream& out, const Scenario& sc) {
  const int n = sc.size() ? static_cast<int>(sc.p_kw[0].size()) : 0;
  out << "time_min";
  for (int i = 1; i <= n; ++i) out << ",p_" << i;
  for (int i = 1; i <= n; ++i) out << ",q_" << i;
  out << "\n";
  for (int k = 0; k < sc.size(); ++k) {
    out << fmt(sc.start_min + k * sc.resolution_min);
    for (int i = 0; i < n; ++i) out << ',' << fmt(sc.p_kw[k](i));
    for (int i = 0; i < n; ++i) out << ',' << fmt(sc.q_kvar[k](i));
    out << "\n";
  }
}

std::vector<BatterySpec> batteries_from_json(const json& j) {
  const json arr = j.is_array() ? j : get<json>(j, "batteries", "battery roster");
  if (!arr.is_array()) throw Error("schema", "batteries must be an array");
  std::vector<BatterySpec> out;
  for (const auto& b : arr) {
    BatterySpec s;
    s.bus = {get<int>(b, "bus", "battery")};
    s.s_rated = get<double>(b, "s_rated_kva", "battery");
    s.c_max = get<double>(b, "c_max_kwh", "battery");
    s.c_min = b.value("c_min_kwh", 0.0);
    s.c_init = get<double>(b, "c_init_kwh", "battery");
    if (b.contains("c_final_kwh")) s.c_final = get<double>(b, "c_final_kwh", "battery");
    validate(s);
    out.push_back(s);
  }
  return out;
}

json batteries_to_json(const std::vector<BatterySpec>& bs) {
  json arr = json::array();
  for (const auto& b : bs) {
    json o{{"bus", b.bus.index}, {"s_rated_kva", b.s_rated}, {"c_max_kwh", b.c_max},
           {"c_min_kwh", b.c_min}, {"c_init_kwh", b.c_init}};
    if (b.c_final) o["c_final_kwh"] = *b.c_final;
    arr.push_back(o);
  }
  return {{"batteries", arr}};
}

std::vector<BatterySpec> load_batteries(const fs::path& path) { return batteries_from_json(read_json(path)); }

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error("schema", "config must be a JSON object");
  RunConfig c;
  RhoConfig& r = c.rho;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "epsilon") r.epsilon = val.get<double>();
      else if (key == "designer") r.designer = parse_designer(val.get<std::string>());
      else if (key == "horizon") {
        r.scheme.segments.clear();
        for (const auto& s : val) r.scheme.segments.push_back({s.at(0).get<int>(), s.at(1).get<double>()});
      } else if (key == "reopt_min") r.reopt_min = val.get<double>();
      else if (key == "gain_update_min") r.gain_update_min = val.get<double>();
      else if (key == "forecaster") r.forecaster = parse_forecaster(val.get<std::string>());
      else if (key == "forecast_noise") r.forecast_noise = val.get<double>();
      else if (key == "seed") r.seed = val.get<std::uint64_t>();
      else if (key == "final_charge_enforced") r.final_charge_enforced = val.get<bool>();
      else if (key == "include_voltage_eq") r.include_voltage_eq = val.get<bool>();
      else if (key == "linearization") {
        const auto s = val.get<std::string>();
        if (s == "taylor_at_zero") r.linearization = Linearization::taylor_at_zero;
        else if (s == "previous_steady_state") r.linearization = Linearization::previous_steady_state;
        else throw Error("config", "unknown linearization '" + s + "'");
      } else if (key == "inner_max_iter") r.inner_max_iter = val.get<int>();
      else if (key == "inner_tol") r.inner_tol = val.get<double>();
      else if (key == "ac_tol") r.ac.tol = val.get<double>();
      else if (key == "ac_max_iter") r.ac.max_iter = val.get<int>();
      else if (key == "compare_cold_start") r.compare_cold_start = val.get<bool>();
      else if (key == "solver_tol") r.solver.tol = val.get<double>();
      else if (key == "solver_max_iter") r.solver.max_iter = val.get<int>();
      else if (key == "power_factor") c.power_factor = val.get<double>();
      else throw Error("config", "unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error("config", "config key '" + key + "': " + e.what());
    }
  }
  validate(r);
  if (!(c.power_factor > 0.0 && c.power_factor <= 1.0)) throw Error("config", "power factor must lie in (0, 1]");
  return c;
}

json config_to_json(const RunConfig& c) {
  const RhoConfig& r = c.rho;
  json horizon = json::array();
  for (const auto& s : r.scheme.segments) horizon.push_back({s.count, s.minutes});
  return {{"epsilon", r.epsilon},
          {"designer", to_string(r.designer)},
          {"horizon", horizon},
          {"reopt_min", r.reopt_min},
          {"gain_update_min", r.gain_update_min},
          {"forecaster", to_string(r.forecaster)},
          {"forecast_noise", r.forecast_noise},
          {"seed", r.seed},
          {"final_charge_enforced", r.final_charge_enforced},
          {"include_voltage_eq", r.include_voltage_eq},
          {"linearization", r.linearization == Linearization::taylor_at_zero ? "taylor_at_zero" : "previous_steady_state"},
          {"inner_max_iter", r.inner_max_iter},
          {"inner_tol", r.inner_tol},
          {"ac_tol", r.ac.tol},
          {"ac_max_iter", r.ac.max_iter},
          {"compare_cold_start", r.compare_cold_start},
          {"solver_tol", r.solver.tol},
          {"solver_max_iter", r.solver.max_iter},
          {"power_factor", c.power_factor}};
}

RunConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

json schedule_to_json(const GainSchedule& s, const std::vector<int>& bus_ids) {
  json periods = json::array();
  for (const auto& p : s.periods) {
    periods.push_back({{"start_h", p.start_h},
                       {"duration_h", p.duration_h},
                       {"alpha", std::vector<double>(p.gains.alpha.data(), p.gains.alpha.data() + p.gains.alpha.size())},
                       {"beta", std::vector<double>(p.gains.beta.data(), p.gains.beta.data() + p.gains.beta.size())},
                       {"frobenius", p.frobenius},
                       {"spectral_radius", p.spectral_radius}});
  }
  return {{"buses", bus_ids}, {"periods", periods}};
}

GainSchedule schedule_from_json(const json& j) {
  GainSchedule s;
  for (const auto& p : get<json>(j, "periods", "gain schedule")) {
    const auto a = get<std::vector<double>>(p, "alpha", "period");
    const auto b = get<std::vector<double>>(p, "beta", "period");
    if (a.size() != b.size()) throw Error("schema", "alpha and beta lengths differ");
    GainPeriod gp;
    gp.start_h = get<double>(p, "start_h", "period");
    gp.duration_h = get<double>(p, "duration_h", "period");
    gp.gains.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    gp.gains.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    gp.frobenius = p.value("frobenius", 0.0);
    gp.spectral_radius = p.value("spectral_radius", 0.0);
    s.periods.push_back(gp);
  }
  return s;
}

namespace {

const char* kTraceHeader =
    "time_min,bus,alpha,beta,voltage_pu,p_kw,q_kvar,u_kw,v_kvar,soc_kwh,loss_kw,p_sub_kw,q_sub_kvar,"
    "converged,iterations,cold_iterations,source,envelope";

ScheduleSource parse_source(const std::string& s) {
  for (auto v : {ScheduleSource::designed, ScheduleSource::held, ScheduleSource::zeroed})
    if (s == to_string(v)) return v;
  throw Error("schema", "unknown schedule source '" + s + "'");
}

}  // namespace

void write_trace_csv(std::ostream& out, const ScenarioTrace& trace) {
  out << kTraceHeader << "\n";
  const int n = static_cast<int>(trace.bus_ids.size());
  for (const auto& r : trace.intervals) {
    for (int i = 0; i < n; ++i) {
      out << fmt(r.time_min) << ',' << trace.bus_ids[i] << ',' << fmt(r.gains.alpha(i)) << ','
          << fmt(r.gains.beta(i)) << ',' << fmt(r.voltage(i)) << ',' << fmt(r.p_kw(i)) << ',' << fmt(r.q_kvar(i))
          << ',' << fmt(r.u_kw(i)) << ',' << fmt(r.v_kvar(i)) << ',' << fmt(r.soc_kwh(i)) << ','
          << fmt(r.loss_kw) << ',' << fmt(r.p_sub_kw) << ',' << fmt(r.q_sub_kvar) << ',' << (r.converged ? 1 : 0)
          << ',' << r.iterations << ',' << r.cold_iterations << ',' << to_string(r.source) << ','
          << (r.envelope_active ? 1 : 0) << "\n";
    }
  }
}

ScenarioTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) throw Error("schema", "not a trace file (header mismatch)");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (cells.size() != 18) throw Error("schema", "ragged trace row");
    rows.push_back(std::move(cells));
  }
  ScenarioTrace t;
  if (rows.empty()) return t;
  const std::string first_time = rows[0][0];
  for (const auto& r : rows) {
    if (r[0] != first_time) break;
    t.bus_ids.push_back(std::stoi(r[1]));
  }
  const int n = static_cast<int>(t.bus_ids.size());
  if (rows.size() % n != 0) throw Error("schema", "trace rows do not cover every bus per interval");
  for (std::size_t k = 0; k < rows.size() / n; ++k) {
    IntervalRecord rec;
    rec.gains = GainVector::zeros(n);
    rec.voltage = rec.p_kw = rec.q_kvar = rec.u_kw = rec.v_kvar = rec.soc_kwh = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      const auto& r = rows[k * n + i];
      if (std::stoi(r[1]) != t.bus_ids[i] || r[0] != rows[k * n][0])
        throw Error("schema", "trace rows are not grouped by interval");
      rec.gains.alpha(i) = parse_double(r[2], "trace");
      rec.gains.beta(i) = parse_double(r[3], "trace");
      rec.voltage(i) = parse_double(r[4], "trace");
      rec.p_kw(i) = parse_double(r[5], "trace");
      rec.q_kvar(i) = parse_double(r[6], "trace");
      rec.u_kw(i) = parse_double(r[7], "trace");
      rec.v_kvar(i) = parse_double(r[8], "trace");
      rec.soc_kwh(i) = parse_double(r[9], "trace");
    }
    const auto& r = rows[k * n];
    rec.time_min = parse_double(r[0], "trace");
    rec.loss_kw = parse_double(r[10], "trace");
    rec.p_sub_kw = parse_double(r[11], "trace");
    rec.q_sub_kvar = parse_double(r[12], "trace");
    rec.converged = r[13] == "1";
    rec.iterations = std::stoi(r[14]);
    rec.cold_iterations = std::stoi(r[15]);
    rec.source = parse_source(r[16]);
    rec.envelope_active = r[17] == "1";
    t.intervals.push_back(std::move(rec));
  }
  if (t.intervals.size() > 1) t.resolution_min = t.intervals[1].time_min - t.intervals[0].time_min;
  return t;
}

void write_dynamics_csv(std::ostream& out, const DynamicTrace& trace) {
  out << "k,bus,E,u,v\n";
  for (std::size_t k = 0; k < trace.E.size(); ++k) {
    for (Eigen::Index i = 0; i < trace.E[k].size(); ++i) {
      out << k << ',' << i + 1 << ',' << fmt(trace.E[k](i)) << ',' << fmt(trace.u[k](i)) << ','
          << fmt(trace.v[k](i)) << "\n";
    }
  }
}

json metrics_to_json(const Metrics& m) {
  return {{"max_volt_pu", m.max_volt},
          {"min_volt_pu", m.min_volt},
          {"energy_loss_kwh", m.energy_loss_kwh},
          {"peak_substation_kva", m.peak_substation_kva}};
}

json diagnostics_to_json(const RunDiagnostics& d) {
  return {{"solves", d.solves},
          {"solver_failures", d.failures},
          {"held_schedules", d.held},
          {"zeroed_schedules", d.zeroed},
          {"flagged_intervals", d.flagged_intervals},
          {"envelope_intervals", d.envelope_intervals},
          {"soc_clamps", d.soc_clamps},
          {"max_inner_iterations", d.max_iterations},
          {"warm_worse_than_cold", d.warm_worse_than_cold},
          {"num_variables", d.num_variables},
          {"num_constraints", d.num_constraints},
          {"log", d.log}};
}

}  // namespace gainsched
