#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gainsched/error.hpp"
#include "gainsched/storage.hpp"

using namespace gainsched;

TEST_CASE("battery validation") {
  BatterySpec ok{{1}, 5.0, 10.0, 0.0, 3.0, std::nullopt};
  CHECK_NOTHROW(validate(ok));
  BatterySpec low = ok;
  low.c_init = -1.0;
  CHECK_THROWS_AS(validate(low), Error);
  BatterySpec high = ok;
  high.c_init = 11.0;
  CHECK_THROWS_AS(validate(high), Error);
  BatterySpec neg = ok;
  neg.s_rated = -1.0;
  CHECK_THROWS_AS(validate(neg), Error);
}

TEST_CASE("energy matrix and SOC") {
  const TimeGrid grid{{0.5, 0.5, 2.0}};
  CHECK(grid.span() == 3.0);
  const Eigen::MatrixXd L = energy_matrix(grid);
  Eigen::Matrix3d expected;
  expected << 0.5, 0, 0, 0.5, 0.5, 0, 0.5, 0.5, 2.0;
  CHECK(L == expected);

  const BatterySpec b{{1}, 5.0, 10.0, 0.0, 3.0, std::nullopt};
  const Eigen::VectorXd soc = soc_trajectory(b, Eigen::Vector3d(2.0, -4.0, 1.0), grid);
  CHECK(soc(0) == doctest::Approx(4.0));
  CHECK(soc(1) == doctest::Approx(2.0));
  CHECK(soc(2) == doctest::Approx(4.0));
}

TEST_CASE("octagon geometry") {
  const auto& n = octagon_normals();
  for (int k = 0; k < 8; ++k) {
    CHECK(std::hypot(n[k].a, n[k].b) == doctest::Approx(1.0));
    CHECK(std::atan2(n[k].b, n[k].a) == doctest::Approx(std::remainder(k * std::numbers::pi / 4, 2 * std::numbers::pi)));
  }
  CHECK(octagon_vertex_ratio() == doctest::Approx(1.0824).epsilon(1e-4));

  const auto a = check_feasible(5.0, 3.0, 4.0);
  CHECK(a.circle);
  CHECK(a.octagon);
  CHECK(a.norm == doctest::Approx(5.0));

  const auto b = check_feasible(5.0, 6.0, 0.0);
  CHECK_FALSE(b.circle);
  CHECK_FALSE(b.octagon);

  // On the 45 degree normal a rounded point just inside the disk.
  const auto c = check_feasible(5.0, 3.5355, 3.5355);
  CHECK(c.circle);
  CHECK(c.octagon);
  CHECK(c.norm < 5.0);

  // Toward a vertex (22.5 degrees) the octagon reaches 1.0824 s.
  const double ang = std::numbers::pi / 8;
  const auto d = check_feasible(5.0, 5.3 * std::cos(ang), 5.3 * std::sin(ang));
  CHECK_FALSE(d.circle);
  CHECK(d.octagon);
  const auto e = check_feasible(5.0, 5.5 * std::cos(ang), 5.5 * std::sin(ang));
  CHECK_FALSE(e.octagon);

  const auto z = check_feasible(0.0, 0.0, 0.0);
  CHECK(z.circle);
  CHECK(z.octagon);
  CHECK_FALSE(check_feasible(0.0, 1e-3, 0.0).octagon);
}

TEST_CASE("octagon contains the disk and stays within the vertex ratio") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), rad(0.0, 1.0), srat(0.1, 20.0);
  for (int i = 0; i < 10000; ++i) {
    const double s = srat(rng);
    const double t = ang(rng);
    const double r = s * std::sqrt(rad(rng));
    const auto inside = check_feasible(s, r * std::cos(t), r * std::sin(t));
    CHECK(inside.circle);
    CHECK(inside.octagon);
    // Anything beyond the vertex radius is outside the octagon.
    const double far = s * octagon_vertex_ratio() * (1.0 + 1e-9 + rad(rng));
    CHECK_FALSE(check_feasible(s, far * std::cos(t), far * std::sin(t)).octagon);
  }
}

TEST_CASE("saturate projects into the disk and box") {
  double u = 6.0, v = 8.0;
  saturate({5.0}, u, v);
  CHECK(u == doctest::Approx(3.0));
  CHECK(v == doctest::Approx(4.0));

  u = 1.0;
  v = 2.0;
  saturate({5.0}, u, v);
  CHECK(u == 1.0);
  CHECK(v == 2.0);

  u = 4.0;
  v = 1.0;
  saturate({5.0, -5.0, 0.5}, u, v);
  CHECK(u == 0.5);
  CHECK(v == 1.0);

  u = 0.0;
  v = 3.0;
  saturate({0.0}, u, v);
  CHECK(u == 0.0);
  CHECK(v == 0.0);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    u = nd(rng);
    v = nd(rng);
    const PowerLimits lim{3.0, -1.0, 2.0};
    saturate(lim, u, v);
    CHECK(std::hypot(u, v) <= 3.0 * (1 + 1e-12));
    CHECK(u >= -1.0);
    CHECK(u <= 2.0);
  }
}

TEST_CASE("SOC over two five-minute steps") {
  const TimeGrid grid{{5.0 / 60.0, 5.0 / 60.0}};
  const BatterySpec b{{1}, 5.0, 10.0, 0.0, 3.0, std::nullopt};
  const Eigen::VectorXd soc = soc_trajectory(b, Eigen::Vector2d(6.0, -6.0), grid);
  CHECK(soc(0) == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(soc(1) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("octagon saturation") {
  PowerLimits lim{5.0};
  lim.shape = LimitShape::octagon;
  double u = 10.0, v = 0.0;
  saturate(lim, u, v);
  CHECK(u == doctest::Approx(5.0));
  CHECK(v == doctest::Approx(0.0));

  // Beyond the disk but inside the octagon: left alone.
  const double a = std::numbers::pi / 8.0;
  u = 5.3 * std::cos(a);
  v = 5.3 * std::sin(a);
  const double u0 = u, v0 = v;
  saturate(lim, u, v);
  CHECK(u == u0);
  CHECK(v == v0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    u = nd(rng);
    v = nd(rng);
    PowerLimits box{3.0, -1.0, 2.0, LimitShape::octagon};
    saturate(box, u, v);
    CHECK(check_feasible(3.0, u, v).octagon_support <= 3.0 * (1 + 1e-12));
    CHECK(u >= -1.0);
    CHECK(u <= 2.0);
  }
}
