#pragma once

// Test-only reference computations, independent of the library code paths
// they are used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gainsched/network.hpp"

namespace oracle {

struct GridResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
};

// Dense grid search over a box with successive zooming around the incumbent.
// Only feasible grid points are considered.
inline GridResult grid_minimize(const std::function<double(const std::vector<double>&)>& f,
                                const std::function<bool(const std::vector<double>&)>& feasible,
                                std::vector<double> lo, std::vector<double> hi,
                                int points = 41, int rounds = 12) {
  const int dim = static_cast<int>(lo.size());
  GridResult best;
  for (int round = 0; round < rounds; ++round) {
    std::vector<int> idx(dim, 0);
    std::vector<double> x(dim);
    bool done = false;
    while (!done) {
      for (int d = 0; d < dim; ++d) x[d] = lo[d] + (hi[d] - lo[d]) * idx[d] / (points - 1);
      if (feasible(x)) {
        const double v = f(x);
        if (v < best.value) {
          best.value = v;
          best.x = x;
        }
      }
      int d = 0;
      while (d < dim && ++idx[d] == points) idx[d++] = 0;
      done = d == dim;
    }
    if (best.x.empty()) return best;
    for (int d = 0; d < dim; ++d) {
      const double half = (hi[d] - lo[d]) / 8.0;
      const double c = best.x[d];
      const double new_lo = std::max(lo[d], c - half);
      const double new_hi = std::min(hi[d], c + half);
      lo[d] = new_lo;
      hi[d] = new_hi;
    }
  }
  return best;
}

// Entry (i,j) of the R or X matrix straight from the definition: twice the
// summed impedance over segments shared by the two root paths.
inline Eigen::MatrixXd path_intersection_matrix(const gainsched::RadialFeeder& feeder, bool reactance) {
  const int n = feeder.size();
  std::vector<std::vector<int>> paths(n + 1);
  for (int b = 1; b <= n; ++b) paths[b] = gainsched::path_to_root(feeder, gainsched::BusId{b});
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      for (int k : paths[i]) {
        if (std::find(paths[j].begin(), paths[j].end(), k) == paths[j].end()) continue;
        const auto& s = feeder.segments()[k];
        M(i - 1, j - 1) += 2.0 * (reactance ? s.reactance : s.resistance);
      }
    }
  }
  return M;
}

// Random radial feeder: bus b attaches to a uniformly chosen earlier bus.
inline gainsched::Feeder random_feeder(std::mt19937_64& rng, int n, double r_lo, double r_hi,
                                       double x_lo, double x_hi) {
  gainsched::Feeder f;
  f.power_base = 10e3;
  f.voltage_base = 230.0;
  for (int b = 0; b <= n; ++b) f.buses.push_back({b});
  std::uniform_real_distribution<double> ur(r_lo, r_hi), ux(x_lo, x_hi);
  for (int b = 1; b <= n; ++b) {
    std::uniform_int_distribution<int> pick(0, b - 1);
    f.segments.push_back({{pick(rng)}, {b}, ur(rng), ux(rng)});
  }
  return f;
}

// Largest root magnitude of a real polynomial c[0] + c[1] z + ... + z^d,
// found from its companion matrix eigenvalues computed by Durand-Kerner
// iteration (no dependence on the library's eigen-solver route).
inline double max_root_modulus(const std::vector<double>& monic_low_to_high) {
  const int d = static_cast<int>(monic_low_to_high.size());
  using cd = std::complex<double>;
  std::vector<cd> z(d);
  const cd seed(0.4, 0.9);
  for (int i = 0; i < d; ++i) z[i] = std::pow(seed, i);
  auto poly = [&](cd x) {
    cd v = 1.0;
    for (int k = d - 1; k >= 0; --k) v = v * x + monic_low_to_high[k];
    return v;
  };
  for (int it = 0; it < 2000; ++it) {
    for (int i = 0; i < d; ++i) {
      cd denom = 1.0;
      for (int j = 0; j < d; ++j)
        if (j != i) denom *= (z[i] - z[j]);
      z[i] -= poly(z[i]) / denom;
    }
  }
  double r = 0.0;
  for (auto v : z) r = std::max(r, std::abs(v));
  return r;
}

// Characteristic polynomial of a 3x3 matrix: z^3 - tr z^2 + c2 z - det.
inline double spectral_radius_3x3(const Eigen::Matrix3d& A) {
  const double tr = A.trace();
  const double c2 = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0) + A(0, 0) * A(2, 2) - A(0, 2) * A(2, 0) +
                    A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1);
  const double det = A.determinant();
  return max_root_modulus({-det, c2, -tr});
}

}  // namespace oracle
