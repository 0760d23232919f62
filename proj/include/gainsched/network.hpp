#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace gainsched {

/// Bus index; 0 is the slack (substation) bus.
struct BusId {
  int index = 0;

  friend bool operator==(BusId, BusId) = default;
  friend auto operator<=>(BusId, BusId) = default;
};

inline constexpr BusId kSlackBus{0};

struct LineSegment {
  BusId from;
  BusId to;
  double resistance = 0.0;  // per unit
  double reactance = 0.0;   // per unit
};

/// Feeder as read from disk. Nothing about it is trusted until it has been
/// through validate_radial().
struct Feeder {
  std::vector<BusId> buses;
  std::vector<LineSegment> segments;
  double slack_voltage = 1.0;  // per unit
  double power_base = 0.0;     // VA
  double voltage_base = 0.0;   // V
};

/// A feeder whose tree property has been checked. Segments are stored in
/// breadth-first order from the slack bus and oriented parent -> child, so
/// segment k always feeds exactly one child bus.
class RadialFeeder {
 public:
  /// Number of non-slack buses (N).
  int size() const { return static_cast<int>(parent_.size()) - 1; }

  const std::vector<LineSegment>& segments() const { return segments_; }
  double slack_voltage() const { return slack_voltage_; }
  double power_base() const { return power_base_; }
  double voltage_base() const { return voltage_base_; }

  BusId parent(BusId bus) const { return BusId{parent_.at(bus.index)}; }
  /// Index of the segment whose child is `bus` (bus != 0).
  int feeding_segment(BusId bus) const { return feeding_segment_.at(bus.index); }
  const std::vector<int>& children(BusId bus) const { return children_.at(bus.index); }
  /// Non-slack buses in breadth-first order (same order as segments()).
  const std::vector<int>& bfs_order() const { return bfs_order_; }

  /// Row of a non-slack bus in every N-dimensional vector or matrix.
  static int row(BusId bus) { return bus.index - 1; }

 private:
  friend RadialFeeder validate_radial(const Feeder& feeder);

  std::vector<LineSegment> segments_;
  std::vector<int> parent_;
  std::vector<int> feeding_segment_;
  std::vector<std::vector<int>> children_;
  std::vector<int> bfs_order_;
  double slack_voltage_ = 1.0;
  double power_base_ = 0.0;
  double voltage_base_ = 0.0;
};

/// Ordered segment indices on the unique path from bus 0 down to a bus.
using Path = std::vector<int>;

struct SensitivityMatrices {
  Eigen::MatrixXd R;
  Eigen::MatrixXd X;
};

/// Node-arc incidence matrix; rows are non-slack buses, columns segments.
struct IncidenceMatrix {
  Eigen::MatrixXd D;
};

/// Throws Error with kind "cycle", "disconnected", "duplicate_segment",
/// "zero_impedance" or "schema".
RadialFeeder validate_radial(const Feeder& feeder);

/// Throws Error("unknown_bus") for bus 0 or a bus outside the feeder.
Path path_to_root(const RadialFeeder& feeder, BusId bus);

SensitivityMatrices build_rx(const RadialFeeder& feeder);

IncidenceMatrix build_incidence(const RadialFeeder& feeder);

}  // namespace gainsched
