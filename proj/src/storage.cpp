#include "gainsched/storage.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "gainsched/error.hpp"

namespace gainsched {

void validate(const BatterySpec& spec) {
  const std::string where = "battery at bus " + std::to_string(spec.bus.index);
  if (spec.s_rated < 0.0) throw Error("battery", where + ": negative rating");
  if (!(0.0 <= spec.c_min && spec.c_min <= spec.c_init && spec.c_init <= spec.c_max))
    throw Error("battery", where + ": requires 0 <= c_min <= c_init <= c_max");
  if (spec.c_final && (*spec.c_final < spec.c_min || *spec.c_final > spec.c_max))
    throw Error("battery", where + ": final charge outside [c_min, c_max]");
}

double TimeGrid::span() const { return std::accumulate(deltas.begin(), deltas.end(), 0.0); }

Eigen::MatrixXd energy_matrix(const TimeGrid& grid) {
  const int t = grid.size();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(t, t);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j <= i; ++j) L(i, j) = grid.deltas[j];
  return L;
}

Eigen::VectorXd soc_trajectory(const BatterySpec& spec, const Eigen::VectorXd& u_kw,
                               const TimeGrid& grid) {
  if (u_kw.size() != grid.size()) throw Error("shape", "power series length differs from grid");
  Eigen::VectorXd soc(grid.size());
  double c = spec.c_init;
  for (int t = 0; t < grid.size(); ++t) {
    c += grid.deltas[t] * u_kw(t);
    soc(t) = c;
  }
  return soc;
}

const std::array<HalfPlane, 8>& octagon_normals() {
  static const std::array<HalfPlane, 8> normals = [] {
    std::array<HalfPlane, 8> out{};
    for (int k = 0; k < 8; ++k) {
      const double angle = k * std::numbers::pi / 4.0;
      out[k] = {std::cos(angle), std::sin(angle)};
    }
    // Exact zeros keep axis-aligned faces free of 1e-17 coupling terms.
    for (auto& h : out) {
      if (std::abs(h.a) < 1e-15) h.a = 0.0;
      if (std::abs(h.b) < 1e-15) h.b = 0.0;
    }
    return out;
  }();
  return normals;
}

double octagon_vertex_ratio() { return 1.0 / std::cos(std::numbers::pi / 8.0); }

FeasibilityReport check_feasible(double s_rated, double u, double v) {
  FeasibilityReport rep;
  rep.norm = std::hypot(u, v);
  rep.octagon_support = -1e300;
  for (const auto& h : octagon_normals()) rep.octagon_support = std::max(rep.octagon_support, h.a * u + h.b * v);
  rep.circle = rep.norm <= s_rated;
  rep.octagon = rep.octagon_support <= s_rated;
  return rep;
}

void saturate(const PowerLimits& limits, double& u, double& v) {
  const double s = limits.s_rated;
  if (limits.shape == LimitShape::circle) {
    const double norm = std::hypot(u, v);
    if (norm > s) {
      const double scale = norm > 0.0 ? s / norm : 0.0;
      u *= scale;
      v *= scale;
    }
    u = std::clamp(u, limits.u_min, limits.u_max);
    const double room = s * s - u * u;
    const double v_cap = room > 0.0 ? std::sqrt(room) : 0.0;
    v = std::clamp(v, -v_cap, v_cap);
    return;
  }
  const double support = check_feasible(s, u, v).octagon_support;
  if (support > s) {
    const double scale = support > 0.0 ? s / support : 0.0;
    u *= scale;
    v *= scale;
  }
  u = std::clamp(u, limits.u_min, limits.u_max);
  double v_hi = 1e300, v_lo = -1e300;
  for (const auto& h : octagon_normals()) {
    if (h.b > 1e-12) v_hi = std::min(v_hi, (s - h.a * u) / h.b);
    if (h.b < -1e-12) v_lo = std::max(v_lo, (s - h.a * u) / h.b);
  }
  if (v_lo > v_hi) v_lo = v_hi = 0.0;
  v = std::clamp(v, v_lo, v_hi);
}

}  // namespace gainsched
