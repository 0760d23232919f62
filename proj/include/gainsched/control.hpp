#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gainsched/network.hpp"
#include "gainsched/powerflow.hpp"
#include "gainsched/storage.hpp"

namespace gainsched {

/// Proportional volt-var-watt gains, one entry per non-slack bus.
struct GainVector {
  Eigen::VectorXd alpha;  // real power per unit squared-voltage deviation
  Eigen::VectorXd beta;   // reactive power per unit squared-voltage deviation

  static GainVector zeros(int n);
  static GainVector uniform(int n, double g);
};

/// u = -alpha E_prev, v = -beta E_prev.
std::pair<double, double> local_step(double alpha, double beta, double e_prev);

struct MatrixNorms {
  double frobenius = 0.0;
  double one = 0.0;       // max absolute column sum
  double infinity = 0.0;  // max absolute row sum
  double two = 0.0;       // largest singular value
};

struct ClosedLoop {
  Eigen::MatrixXd HG;  // R A + X B
  Eigen::MatrixXd GH;  // [A R, A X; B R, B X]
  double spectral_radius = 0.0;
  MatrixNorms norms;   // of GH
};

/// Largest eigenvalue magnitude of a real square matrix.
double spectral_radius(const Eigen::MatrixXd& M);

MatrixNorms matrix_norms(const Eigen::MatrixXd& M);

ClosedLoop closed_loop(const SensitivityMatrices& m, const GainVector& gains);

/// ||GH||_F without forming GH: sum_i (alpha_i^2 + beta_i^2) * ||row_i [R X]||^2.
double stability_frobenius(const SensitivityMatrices& m, const GainVector& gains);

enum class Plant { linear, ac };

struct DynamicsOptions {
  int iterations = 100;      // K
  double tol = 1e-6;         // on ||E(k) - E(k-1)||_inf
  bool stop_at_tolerance = false;
  Plant plant = Plant::linear;
  AcOptions ac;
  /// Per-bus saturation; empty means unrestricted devices.
  std::vector<PowerLimits> limits;
};

struct DynamicTrace {
  std::vector<Eigen::VectorXd> E;  // E(0) .. E(k_end)
  std::vector<Eigen::VectorXd> u;  // u(0) is the initial power
  std::vector<Eigen::VectorXd> v;
  bool converged = false;
  int iterations_to_tolerance = -1;
  AcState last_ac;  // final plant state in AC mode

  int steps() const { return static_cast<int>(E.size()) - 1; }
};

/// Measure -> actuate loop: E(0) is the plant response to the initial
/// powers, then u(k) = -alpha E(k-1), v(k) = -beta E(k-1) and E(k) is the
/// plant response to (u(k), v(k)). Convergence is the first k with
/// ||E(k) - E(k-1)||_inf <= tol.
DynamicTrace simulate_dynamics(const RadialFeeder& feeder, const SensitivityMatrices& m,
                               const GainVector& gains, const Eigen::VectorXd& p_load,
                               const Eigen::VectorXd& q_load, const Eigen::VectorXd& u0,
                               const Eigen::VectorXd& v0, const DynamicsOptions& options);

struct SteadyState {
  Eigen::VectorXd E;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

/// Solves (I - HG) E = E_tilde. Throws Error("unstable") when rho(HG) >= 1.
SteadyState steady_state(const SensitivityMatrices& m, const GainVector& gains,
                         const Eigen::VectorXd& e_tilde);

}  // namespace gainsched
