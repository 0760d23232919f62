#include "gainsched/control.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gainsched/error.hpp"

namespace gainsched {

GainVector GainVector::zeros(int n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)}; }

GainVector GainVector::uniform(int n, double g) {
  return {Eigen::VectorXd::Constant(n, g), Eigen::VectorXd::Constant(n, g)};
}

std::pair<double, double> local_step(double alpha, double beta, double e_prev) {
  return {-alpha * e_prev, -beta * e_prev};
}

double spectral_radius(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw Error("shape", "spectral radius needs a square matrix");
  if (M.size() == 0) return 0.0;
  if (!M.allFinite()) throw Error("eigen_failure", "matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(M, false);
  if (solver.info() != Eigen::Success)
    throw Error("eigen_failure", "eigenvalue iteration did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixNorms matrix_norms(const Eigen::MatrixXd& M) {
  MatrixNorms n;
  if (M.size() == 0) return n;
  n.frobenius = M.norm();
  n.one = M.cwiseAbs().colwise().sum().maxCoeff();
  n.infinity = M.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  n.two = svd.singularValues()(0);
  return n;
}

ClosedLoop closed_loop(const SensitivityMatrices& m, const GainVector& gains) {
  const Eigen::Index n = m.R.rows();
  if (gains.alpha.size() != n || gains.beta.size() != n)
    throw Error("shape", "gain vector length differs from network size");
  ClosedLoop cl;
  const Eigen::VectorXd a = -gains.alpha;
  const Eigen::VectorXd b = -gains.beta;
  cl.HG = m.R * a.asDiagonal() + m.X * b.asDiagonal();
  cl.GH.resize(2 * n, 2 * n);
  cl.GH.topLeftCorner(n, n) = a.asDiagonal() * m.R;
  cl.GH.topRightCorner(n, n) = a.asDiagonal() * m.X;
  cl.GH.bottomLeftCorner(n, n) = b.asDiagonal() * m.R;
  cl.GH.bottomRightCorner(n, n) = b.asDiagonal() * m.X;
  cl.spectral_radius = spectral_radius(cl.HG);
  cl.norms = matrix_norms(cl.GH);
  return cl;
}

double stability_frobenius(const SensitivityMatrices& m, const GainVector& gains) {
  const Eigen::VectorXd row_sq = m.R.rowwise().squaredNorm() + m.X.rowwise().squaredNorm();
  return std::sqrt((gains.alpha.cwiseAbs2() + gains.beta.cwiseAbs2()).dot(row_sq));
}

DynamicTrace simulate_dynamics(const RadialFeeder& feeder, const SensitivityMatrices& m,
                               const GainVector& gains, const Eigen::VectorXd& p_load,
                               const Eigen::VectorXd& q_load, const Eigen::VectorXd& u0,
                               const Eigen::VectorXd& v0, const DynamicsOptions& options) {
  const int n = feeder.size();
  if (!options.limits.empty() && static_cast<int>(options.limits.size()) != n)
    throw Error("shape", "saturation limits must cover every bus");

  DynamicTrace trace;
  InjectionProfile inj{u0, v0, p_load, q_load};
  auto measure = [&](const InjectionProfile& x) -> Eigen::VectorXd {
    if (options.plant == Plant::linear) return m.R * (x.u + x.p_load) + m.X * (x.v + x.q_load);
    trace.last_ac = ac_power_flow(feeder, x, options.ac);
    require_converged(trace.last_ac);
    return ac_deviation(feeder, trace.last_ac);
  };

  trace.u.push_back(u0);
  trace.v.push_back(v0);
  trace.E.push_back(measure(inj));
  for (int k = 1; k <= options.iterations; ++k) {
    const Eigen::VectorXd& e_prev = trace.E.back();
    for (int i = 0; i < n; ++i) {
      auto [u, v] = local_step(gains.alpha(i), gains.beta(i), e_prev(i));
      if (!options.limits.empty()) saturate(options.limits[i], u, v);
      inj.u(i) = u;
      inj.v(i) = v;
    }
    trace.u.push_back(inj.u);
    trace.v.push_back(inj.v);
    trace.E.push_back(measure(inj));
    const double change = (trace.E[k] - trace.E[k - 1]).lpNorm<Eigen::Infinity>();
    if (trace.iterations_to_tolerance < 0 && change <= options.tol) {
      trace.iterations_to_tolerance = k;
      trace.converged = true;
      if (options.stop_at_tolerance) break;
    }
  }
  return trace;
}

SteadyState steady_state(const SensitivityMatrices& m, const GainVector& gains,
                         const Eigen::VectorXd& e_tilde) {
  const ClosedLoop cl = closed_loop(m, gains);
  if (cl.spectral_radius >= 1.0)
    throw Error("unstable", "closed loop has spectral radius " + std::to_string(cl.spectral_radius));
  const Eigen::Index n = e_tilde.size();
  SteadyState ss;
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - cl.HG;
  ss.E = system.partialPivLu().solve(e_tilde);
  ss.u = -gains.alpha.cwiseProduct(ss.E);
  ss.v = -gains.beta.cwiseProduct(ss.E);
  return ss;
}

}  // namespace gainsched
