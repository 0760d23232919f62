#include "gainsched/network.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <utility>

#include "gainsched/error.hpp"

namespace gainsched {
namespace {

std::string describe(const LineSegment& s) {
  return "(" + std::to_string(s.from.index) + "," + std::to_string(s.to.index) + ")";
}

struct DisjointSets {
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
  std::vector<int> parent;
};

}  // namespace

RadialFeeder validate_radial(const Feeder& feeder) {
  std::vector<int> ids;
  ids.reserve(feeder.buses.size());
  for (BusId b : feeder.buses) ids.push_back(b.index);
  std::sort(ids.begin(), ids.end());
  if (ids.empty() || ids.front() != 0)
    throw Error("schema", "feeder must contain the slack bus 0");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<int>(i))
      throw Error("schema", "bus indices must be exactly 0..N without gaps or repeats");
  }
  if (!(feeder.slack_voltage > 0.0)) throw Error("schema", "slack voltage must be positive");

  const int n_buses = static_cast<int>(ids.size());
  std::set<std::pair<int, int>> seen;
  for (const auto& s : feeder.segments) {
    if (s.from.index < 0 || s.from.index >= n_buses || s.to.index < 0 || s.to.index >= n_buses)
      throw Error("schema", "segment " + describe(s) + " references an unknown bus");
    if (s.resistance < 0.0 || s.reactance < 0.0)
      throw Error("schema", "segment " + describe(s) + " has negative impedance");
    if (!(s.resistance > 0.0 || s.reactance > 0.0))
      throw Error("zero_impedance", "zero-impedance segment " + describe(s));
    auto key = std::minmax(s.from.index, s.to.index);
    if (!seen.insert(key).second)
      throw Error("duplicate_segment", "duplicate segment " + describe(s));
  }

  DisjointSets sets(n_buses);
  for (const auto& s : feeder.segments) {
    if (s.from == s.to || !sets.unite(s.from.index, s.to.index))
      throw Error("cycle", "cycle detected at segment " + describe(s));
  }
  std::vector<int> unreachable;
  for (int b = 1; b < n_buses; ++b) {
    if (sets.find(b) != 0) unreachable.push_back(b);
  }
  if (!unreachable.empty()) {
    std::string list;
    for (int b : unreachable) list += (list.empty() ? "" : ",") + std::to_string(b);
    throw Error("disconnected", "disconnected buses not reachable from bus 0: " + list);
  }

  // Acyclic and connected: orient every segment away from the slack bus.
  std::vector<std::vector<std::pair<int, int>>> adjacency(n_buses);
  for (int k = 0; k < static_cast<int>(feeder.segments.size()); ++k) {
    const auto& s = feeder.segments[k];
    adjacency[s.from.index].emplace_back(s.to.index, k);
    adjacency[s.to.index].emplace_back(s.from.index, k);
  }
  for (auto& nbrs : adjacency) std::sort(nbrs.begin(), nbrs.end());

  RadialFeeder out;
  out.slack_voltage_ = feeder.slack_voltage;
  out.power_base_ = feeder.power_base;
  out.voltage_base_ = feeder.voltage_base;
  out.parent_.assign(n_buses, -1);
  out.feeding_segment_.assign(n_buses, -1);
  out.children_.assign(n_buses, {});

  std::vector<bool> visited(n_buses, false);
  std::queue<int> frontier;
  frontier.push(0);
  visited[0] = true;
  while (!frontier.empty()) {
    const int m = frontier.front();
    frontier.pop();
    for (auto [n, k] : adjacency[m]) {
      if (visited[n]) continue;
      visited[n] = true;
      const auto& src = feeder.segments[k];
      out.parent_[n] = m;
      out.feeding_segment_[n] = static_cast<int>(out.segments_.size());
      out.segments_.push_back({BusId{m}, BusId{n}, src.resistance, src.reactance});
      out.children_[m].push_back(n);
      out.bfs_order_.push_back(n);
      frontier.push(n);
    }
  }
  return out;
}

Path path_to_root(const RadialFeeder& feeder, BusId bus) {
  if (bus.index <= 0 || bus.index > feeder.size())
    throw Error("unknown_bus", "no path for bus " + std::to_string(bus.index));
  Path path;
  for (BusId b = bus; b.index != 0; b = feeder.parent(b)) path.push_back(feeder.feeding_segment(b));
  std::reverse(path.begin(), path.end());
  return path;
}

SensitivityMatrices build_rx(const RadialFeeder& feeder) {
  const int n = feeder.size();
  SensitivityMatrices m{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  // Path impedance sums from the root; the shared part of two paths ends at
  // their deepest common ancestor, so entry (i,j) is that ancestor's sum.
  std::vector<double> r_sum(n + 1, 0.0), x_sum(n + 1, 0.0);
  std::vector<int> depth(n + 1, 0);
  for (int b : feeder.bfs_order()) {
    const auto& seg = feeder.segments()[feeder.feeding_segment(BusId{b})];
    const int p = feeder.parent(BusId{b}).index;
    r_sum[b] = r_sum[p] + 2.0 * seg.resistance;
    x_sum[b] = x_sum[p] + 2.0 * seg.reactance;
    depth[b] = depth[p] + 1;
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      int a = i, b = j;
      while (a != b) {
        if (depth[a] >= depth[b]) a = feeder.parent(BusId{a}).index;
        else b = feeder.parent(BusId{b}).index;
      }
      m.R(i - 1, j - 1) = m.R(j - 1, i - 1) = r_sum[a];
      m.X(i - 1, j - 1) = m.X(j - 1, i - 1) = x_sum[a];
    }
  }
  return m;
}

IncidenceMatrix build_incidence(const RadialFeeder& feeder) {
  const int n = feeder.size();
  IncidenceMatrix inc{Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(feeder.segments().size()))};
  for (int k = 0; k < static_cast<int>(feeder.segments().size()); ++k) {
    const auto& s = feeder.segments()[k];
    if (s.from.index != 0) inc.D(RadialFeeder::row(s.from), k) = 1.0;
    inc.D(RadialFeeder::row(s.to), k) = -1.0;
  }
  return inc;
}

}  // namespace gainsched
