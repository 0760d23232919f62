#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gainsched/network.hpp"

namespace gainsched {

/// Battery as specified by the roster (device units: kVA, kWh).
struct BatterySpec {
  BusId bus;
  double s_rated = 0.0;  // kVA; 0 models a bus without a battery
  double c_max = 0.0;    // kWh
  double c_min = 0.0;    // kWh
  double c_init = 0.0;   // kWh
  std::optional<double> c_final;  // kWh target at the end of the horizon
};

/// Throws Error("battery") unless 0 <= c_min <= c_init <= c_max and s_rated >= 0.
void validate(const BatterySpec& spec);

/// Step lengths of a horizon in hours.
struct TimeGrid {
  std::vector<double> deltas;

  int size() const { return static_cast<int>(deltas.size()); }
  double span() const;
};

/// Lower-triangular L with L(i,j) = delta(j) for j <= i.
Eigen::MatrixXd energy_matrix(const TimeGrid& grid);

/// SOC(t) = c_init + (L u)(t) with u in kW (consumption charges the battery).
Eigen::VectorXd soc_trajectory(const BatterySpec& spec, const Eigen::VectorXd& u_kw,
                               const TimeGrid& grid);

struct HalfPlane {
  double a = 0.0;  // coefficient of u
  double b = 0.0;  // coefficient of v
};

/// Unit normals (cos k pi/4, sin k pi/4), k = 0..7; the polygon is
/// {a u + b v <= s} and circumscribes the disk of radius s.
const std::array<HalfPlane, 8>& octagon_normals();

/// Distance from the centre to an octagon vertex, as a multiple of the rating.
double octagon_vertex_ratio();

struct FeasibilityReport {
  bool circle = false;
  bool octagon = false;
  double norm = 0.0;             // sqrt(u^2 + v^2)
  double octagon_support = 0.0;  // max_k a_k u + b_k v
};

FeasibilityReport check_feasible(double s_rated, double u, double v);

enum class LimitShape { circle, octagon };

/// Plant-side limits for one bus: apparent-power region plus a box on u.
struct PowerLimits {
  double s_rated = 0.0;
  double u_min = -1e300;
  double u_max = 1e300;
  LimitShape shape = LimitShape::circle;
};

/// Radially projects (u, v) onto the disk (or octagon), clamps u into its box
/// and finally shrinks v to the region's extent at that u.
void saturate(const PowerLimits& limits, double& u, double& v);

}  // namespace gainsched
