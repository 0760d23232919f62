#include <random>

#include <Eigen/Cholesky>

#include "doctest.h"
#include "gainsched/error.hpp"
#include "gainsched/network.hpp"
#include "gainsched/powerflow.hpp"
#include "oracles.hpp"

using namespace gainsched;

namespace {

Feeder chain(double r01, double r12, double x01 = 0.0, double x12 = 0.0) {
  Feeder f;
  f.buses = {{0}, {1}, {2}};
  f.segments = {{{0}, {1}, r01, x01}, {{1}, {2}, r12, x12}};
  f.power_base = 1e3;
  f.voltage_base = 230.0;
  return f;
}

Feeder star() {
  Feeder f;
  f.buses = {{0}, {1}, {2}};
  f.segments = {{{0}, {1}, 0.1, 0.1}, {{0}, {2}, 0.2, 0.1}};
  return f;
}

std::string kind_of(const Feeder& f) {
  try {
    validate_radial(f);
  } catch (const Error& e) {
    return e.kind();
  }
  return "ok";
}

}  // namespace

TEST_CASE("validate_radial") {
  CHECK(kind_of(chain(0.1, 0.2)) == "ok");

  Feeder loop;
  loop.buses = {{0}, {1}, {2}};
  loop.segments = {{{0}, {1}, 0.1, 0.0}, {{1}, {2}, 0.1, 0.0}, {{2}, {0}, 0.1, 0.0}};
  CHECK(kind_of(loop) == "cycle");

  Feeder split;
  split.buses = {{0}, {1}, {2}, {3}};
  split.segments = {{{0}, {1}, 0.1, 0.0}, {{2}, {3}, 0.1, 0.0}};
  CHECK(kind_of(split) == "disconnected");

  Feeder dup = chain(0.1, 0.2);
  dup.segments.push_back({{1}, {0}, 0.3, 0.0});
  CHECK(kind_of(dup) == "duplicate_segment");

  CHECK(kind_of(chain(0.1, 0.0)) == "zero_impedance");

  Feeder no_slack;
  no_slack.buses = {{1}, {2}};
  no_slack.segments = {{{1}, {2}, 0.1, 0.1}};
  CHECK(kind_of(no_slack) == "schema");
}

TEST_CASE("orientation is normalised toward the slack bus") {
  Feeder f;
  f.buses = {{0}, {1}, {2}};
  f.segments = {{{2}, {1}, 0.2, 0.0}, {{1}, {0}, 0.1, 0.0}};
  const RadialFeeder rf = validate_radial(f);
  REQUIRE(rf.segments().size() == 2);
  CHECK(rf.segments()[0].from.index == 0);
  CHECK(rf.segments()[0].to.index == 1);
  CHECK(rf.segments()[1].from.index == 1);
  CHECK(rf.segments()[1].resistance == 0.2);
  CHECK(rf.parent(BusId{2}).index == 1);
}

TEST_CASE("path_to_root") {
  const RadialFeeder c = validate_radial(chain(0.1, 0.2));
  CHECK(path_to_root(c, BusId{2}) == Path{0, 1});
  CHECK(path_to_root(c, BusId{1}) == Path{0});
  const RadialFeeder s = validate_radial(star());
  const Path p2 = path_to_root(s, BusId{2});
  REQUIRE(p2.size() == 1);
  CHECK(s.segments()[p2[0]].from.index == 0);
  CHECK(s.segments()[p2[0]].to.index == 2);
  CHECK_THROWS_AS(path_to_root(c, BusId{0}), Error);
  CHECK_THROWS_AS(path_to_root(c, BusId{3}), Error);
}

TEST_CASE("build_rx examples") {
  const RadialFeeder c = validate_radial(chain(0.1, 0.2));
  const auto m = build_rx(c);
  Eigen::Matrix2d expected;
  expected << 0.2, 0.2, 0.2, 0.6;
  CHECK((m.R - expected).cwiseAbs().maxCoeff() < 1e-15);

  Feeder one;
  one.buses = {{0}, {1}};
  one.segments = {{{0}, {1}, 0.05, 0.05}};
  const auto m1 = build_rx(validate_radial(one));
  CHECK(m1.R(0, 0) == doctest::Approx(0.1));
  CHECK(m1.X(0, 0) == doctest::Approx(0.1));

  const auto ms = build_rx(validate_radial(star()));
  CHECK(ms.R(0, 1) == 0.0);
  CHECK(ms.X(1, 0) == 0.0);
}

TEST_CASE("build_incidence examples") {
  const RadialFeeder c = validate_radial(chain(0.1, 0.2));
  const auto d = build_incidence(c).D;
  Eigen::Matrix2d expected;
  expected << -1, 1, 0, -1;
  CHECK(d == expected);

  Feeder one;
  one.buses = {{0}, {1}};
  one.segments = {{{0}, {1}, 0.05, 0.05}};
  CHECK(build_incidence(validate_radial(one)).D == Eigen::MatrixXd::Constant(1, 1, -1.0));

  const auto ds = build_incidence(validate_radial(star())).D;
  CHECK(ds == Eigen::Matrix2d(Eigen::Vector2d(-1, -1).asDiagonal()));

  // Power balance on the chain by hand: P01 = p1 + p2, P12 = p2.
  Eigen::Vector2d p(0.3, 0.5), flows(0.8, 0.5);
  CHECK((d * flows + p).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("random trees: R, X match path intersections and are symmetric positive definite") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    const RadialFeeder f = validate_radial(oracle::random_feeder(rng, n, 0.001, 0.05, 0.0, 0.05));
    const auto m = build_rx(f);
    CHECK((m.R - oracle::path_intersection_matrix(f, false)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((m.X - oracle::path_intersection_matrix(f, true)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(m.R == m.R.transpose());
    CHECK(m.R.minCoeff() >= 0.0);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(m.R).info() == Eigen::Success);
    for (int i = 0; i < n; ++i) CHECK(m.R(i, i) >= m.R.row(i).maxCoeff());
    // Diagonal entry is twice the path resistance.
    double path_r = 0.0;
    for (int k : path_to_root(f, BusId{n})) path_r += f.segments()[k].resistance;
    CHECK(m.R(n - 1, n - 1) == doctest::Approx(2.0 * path_r));
  }
}

TEST_CASE("incidence identity: -D P equals nodal consumption") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    const RadialFeeder f = validate_radial(oracle::random_feeder(rng, n, 0.01, 0.05, 0.01, 0.05));
    const auto m = build_rx(f);
    InjectionProfile inj = InjectionProfile::zeros(n);
    for (int i = 0; i < n; ++i) {
      inj.u(i) = nd(rng);
      inj.p_load(i) = nd(rng);
      inj.v(i) = nd(rng);
      inj.q_load(i) = nd(rng);
    }
    const auto st = lindistflow_solve(f, m, inj);
    const auto D = build_incidence(f).D;
    CHECK((D * st.P + inj.u + inj.p_load).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((D * st.Q + inj.v + inj.q_load).cwiseAbs().maxCoeff() < 1e-12);
    // Each column has exactly one -1.
    for (int k = 0; k < n; ++k) CHECK((D.col(k).array() == -1.0).count() == 1);
  }
}
