// Primal-dual interior-point solver for ConvexProgram.
//
// Standard form after scaling (every row divided by its largest coefficient,
// the objective by its own):
//   min  x'Q0 x + c'x        s.t.  A x = b,  g(x) = G x + h + [x'Q_i x] <= 0
// Slacks s >= 0 turn the inequalities into g(x) + s = 0; the Newton system is
// reduced to the quasi-definite form
//   [ W + J' (Z/S) J   A' ] [dx]
//   [ A              -dI  ] [dy]
// and factorised with a sparse LU.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "gainsched/error.hpp"
#include "gainsched/program.hpp"

namespace gainsched {
namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

struct QuadRow {
  int row = 0;
  std::vector<Trip> q;  // symmetric, both triangles stored
};

struct StandardForm {
  int n = 0, p = 0, m = 0;
  std::vector<Trip> q0;  // symmetric, both triangles
  Vec c;
  double c0 = 0.0;
  double obj_scale = 1.0;
  SpMat A;
  Vec b;
  SpMat G;
  Vec h;
  std::vector<QuadRow> quads;
};

void append_symmetric(std::vector<Trip>& out, const std::vector<QuadTerm>& quad, double scale) {
  for (const auto& t : quad) {
    if (t.i.id == t.j.id) {
      out.emplace_back(t.i.id, t.i.id, t.coef * scale);
    } else {
      out.emplace_back(t.i.id, t.j.id, 0.5 * t.coef * scale);
      out.emplace_back(t.j.id, t.i.id, 0.5 * t.coef * scale);
    }
  }
}

double largest_coef(const QuadExpr& e) {
  double s = 0.0;
  for (const auto& t : e.quad) s = std::max(s, std::abs(t.coef));
  for (const auto& t : e.affine.terms) s = std::max(s, std::abs(t.coef));
  return s;
}

StandardForm standardize(const ConvexProgram& prog) {
  StandardForm f;
  f.n = prog.num_variables();
  const auto& obj = prog.objective();
  const double big = largest_coef(obj);
  f.obj_scale = big > 0.0 ? 1.0 / big : 1.0;
  append_symmetric(f.q0, obj.quad, f.obj_scale);
  f.c = Vec::Zero(f.n);
  for (const auto& t : obj.affine.terms) f.c(t.var.id) += t.coef * f.obj_scale;
  f.c0 = obj.affine.constant * f.obj_scale;

  std::vector<Trip> a_trips;
  std::vector<double> b;
  for (const auto& e : prog.equalities()) {
    const double s = std::max(largest_coef(e.expr), 1e-300);
    const int row = static_cast<int>(b.size());
    for (const auto& t : e.expr.affine.terms) a_trips.emplace_back(row, t.var.id, t.coef / s);
    b.push_back(-e.expr.affine.constant / s);
  }
  f.p = static_cast<int>(b.size());
  f.A.resize(f.p, f.n);
  f.A.setFromTriplets(a_trips.begin(), a_trips.end());
  f.b = Eigen::Map<Vec>(b.data(), f.p);

  std::vector<Trip> g_trips;
  std::vector<double> h;
  for (const auto& e : prog.inequalities()) {
    const double s = std::max(largest_coef(e.expr), 1e-300);
    const int row = static_cast<int>(h.size());
    for (const auto& t : e.expr.affine.terms) g_trips.emplace_back(row, t.var.id, t.coef / s);
    if (!e.expr.quad.empty()) {
      QuadRow qr{row, {}};
      append_symmetric(qr.q, e.expr.quad, 1.0 / s);
      f.quads.push_back(std::move(qr));
    }
    h.push_back(e.expr.affine.constant / s);
  }
  for (int i = 0; i < f.n; ++i) {
    const auto& v = prog.variables()[i];
    if (std::isfinite(v.lo)) {
      g_trips.emplace_back(static_cast<int>(h.size()), i, -1.0);
      h.push_back(v.lo);
    }
    if (std::isfinite(v.hi)) {
      g_trips.emplace_back(static_cast<int>(h.size()), i, 1.0);
      h.push_back(-v.hi);
    }
  }
  f.m = static_cast<int>(h.size());
  f.G.resize(f.m, f.n);
  f.G.setFromTriplets(g_trips.begin(), g_trips.end());
  f.h = Eigen::Map<Vec>(h.data(), f.m);
  return f;
}

double quad_form(const std::vector<Trip>& q, const Vec& x) {
  double v = 0.0;
  for (const auto& t : q) v += t.value() * x(t.row()) * x(t.col());
  return v;
}

Vec eval_g(const StandardForm& f, const Vec& x) {
  Vec g = f.G * x + f.h;
  for (const auto& qr : f.quads) g(qr.row) += quad_form(qr.q, x);
  return g;
}

SpMat jacobian(const StandardForm& f, const Vec& x) {
  std::vector<Trip> trips;
  trips.reserve(f.G.nonZeros());
  for (int k = 0; k < f.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(f.G, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  for (const auto& qr : f.quads)
    for (const auto& t : qr.q) trips.emplace_back(qr.row, t.row(), 2.0 * t.value() * x(t.col()));
  SpMat J(f.m, f.n);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

Vec objective_gradient(const StandardForm& f, const Vec& x) {
  Vec g = f.c;
  for (const auto& t : f.q0) g(t.row()) += 2.0 * t.value() * x(t.col());
  return g;
}

double objective(const StandardForm& f, const Vec& x) { return quad_form(f.q0, x) + f.c.dot(x) + f.c0; }

struct IpmResult {
  SolveStatus status = SolveStatus::numeric_failure;
  Vec x;
  int iterations = 0;
  bool diverging_x = false;
};

class KktSystem {
 public:
  KktSystem(const StandardForm& f) : f_(f) {}

  bool factor(const Vec& z, const Vec& d, const SpMat& J, double prox = kPrimalReg) {
    const int n = f_.n, p = f_.p;
    std::vector<Trip> trips;
    for (const auto& t : f_.q0) trips.emplace_back(t.row(), t.col(), 2.0 * t.value());
    for (const auto& qr : f_.quads)
      for (const auto& t : qr.q) trips.emplace_back(t.row(), t.col(), 2.0 * z(qr.row) * t.value());
    const SpMat jtdj = SpMat(J.transpose()) * d.asDiagonal() * J;
    for (int k = 0; k < jtdj.outerSize(); ++k)
      for (SpMat::InnerIterator it(jtdj, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, prox);
    for (int k = 0; k < f_.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(f_.A, k); it; ++it) {
        trips.emplace_back(n + it.row(), it.col(), it.value());
        trips.emplace_back(it.col(), n + it.row(), it.value());
      }
    for (int i = 0; i < p; ++i) trips.emplace_back(n + i, n + i, -kDualReg);
    kkt_.resize(n + p, n + p);
    kkt_.setFromTriplets(trips.begin(), trips.end());
    kkt_.makeCompressed();
    std::vector<int> outer(kkt_.outerIndexPtr(), kkt_.outerIndexPtr() + kkt_.outerSize() + 1);
    std::vector<int> inner(kkt_.innerIndexPtr(), kkt_.innerIndexPtr() + kkt_.nonZeros());
    if (outer != outer_ || inner != inner_) {
      lu_.analyzePattern(kkt_);
      outer_ = std::move(outer);
      inner_ = std::move(inner);
    }
    lu_.factorize(kkt_);
    return lu_.info() == Eigen::Success;
  }

  Vec solve(const Vec& rhs) {
    Vec sol = lu_.solve(rhs);
    // Iterative refinement against the assembled matrix.
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
      const Vec r = rhs - kkt_ * sol;
      const double rn = r.lpNorm<Eigen::Infinity>();
      if (!(rn < 0.5 * prev) || rn <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      prev = rn;
      sol += lu_.solve(r);
    }
    return sol;
  }

 private:
  static constexpr double kPrimalReg = 1e-11;
  static constexpr double kDualReg = 1e-11;
  const StandardForm& f_;
  SpMat kkt_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<int> outer_, inner_;
};

double max_step(const Vec& v, const Vec& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

IpmResult interior_point(const StandardForm& f, const SolveOptions& opt) {
  const int n = f.n, p = f.p, m = f.m;
  IpmResult res;
  KktSystem kkt(f);

  // Start from the proximally regularised equality-constrained minimiser;
  // the origin is the fallback.
  Vec x = Vec::Zero(n), y = Vec::Zero(p);
  {
    SpMat J0(m, n);
    if (kkt.factor(Vec::Zero(m), Vec::Zero(m), J0, 1.0)) {
      Vec rhs(n + p);
      rhs << -f.c, f.b;
      const Vec sol = kkt.solve(rhs);
      if (sol.allFinite()) x = sol.head(n);
    }
  }
  Vec g = eval_g(f, x);
  Vec s = (-g).cwiseMax(1.0);
  Vec z = Vec::Ones(m);

  const double b_norm = 1.0 + (p ? f.b.lpNorm<Eigen::Infinity>() : 0.0);
  const double h_norm = 1.0 + (m ? f.h.lpNorm<Eigen::Infinity>() : 0.0);
  const double c_norm = 1.0 + (n ? f.c.lpNorm<Eigen::Infinity>() : 0.0);

  int stalled = 0;
  double best_merit = std::numeric_limits<double>::infinity();
  Vec best_x = x;
  double best_pres = std::numeric_limits<double>::infinity();
  int best_pres_iter = 0;
  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    res.iterations = iter;
    g = eval_g(f, x);
    const SpMat J = jacobian(f, x);
    const Vec r_d = objective_gradient(f, x) + (p ? Vec(f.A.transpose() * y) : Vec::Zero(n)) +
                    (m ? Vec(J.transpose() * z) : Vec::Zero(n));
    const Vec r_p = p ? Vec(f.A * x - f.b) : Vec();
    const Vec r_g = g + s;
    const double mu = m ? s.dot(z) / m : 0.0;

    const double pres = std::max(p ? r_p.lpNorm<Eigen::Infinity>() / b_norm : 0.0,
                                 m ? r_g.lpNorm<Eigen::Infinity>() / h_norm : 0.0);
    const double dres = n ? r_d.lpNorm<Eigen::Infinity>() / c_norm : 0.0;
    const double gap = m ? s.dot(z) / std::max(1.0, std::abs(objective(f, x))) : 0.0;
    if (!x.allFinite() || !s.allFinite() || !z.allFinite()) {
      res.status = SolveStatus::numeric_failure;
      break;
    }
    const double merit = std::max({pres, dres, gap});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
    }
    const bool loose = pres <= opt.tol && dres <= opt.tol && gap <= opt.tol;
    if (loose && (gap <= opt.gap_tol || stalled >= 3)) {
      res.status = SolveStatus::optimal;
      break;
    }
    if (x.lpNorm<Eigen::Infinity>() > 1e10) {
      res.diverging_x = true;
      res.status = SolveStatus::unbounded;
      break;
    }
    if ((m && z.lpNorm<Eigen::Infinity>() > 1e13) || (p && y.lpNorm<Eigen::Infinity>() > 1e13)) {
      res.status = SolveStatus::infeasible;
      break;
    }
    if (pres < 0.5 * best_pres) {
      best_pres = pres;
      best_pres_iter = iter;
    }
    // Primal residual stuck while everything else converges: hand over to
    // the infeasibility check instead of burning the iteration budget.
    if (!loose && iter - best_pres_iter > 30) {
      res.status = SolveStatus::iteration_limit;
      break;
    }
    if (iter == opt.max_iter) {
      res.status = loose ? SolveStatus::optimal : SolveStatus::iteration_limit;
      break;
    }

    const Vec d = z.cwiseQuotient(s);
    if (!kkt.factor(z, d, J)) {
      res.status = SolveStatus::numeric_failure;
      break;
    }

    auto newton = [&](const Vec& r_c, Vec& dx, Vec& dy, Vec& dz, Vec& ds) {
      Vec rhs(n + p);
      const Vec inner = d.cwiseProduct(r_g) - r_c.cwiseQuotient(s);
      rhs.head(n) = -r_d - (m ? Vec(J.transpose() * inner) : Vec::Zero(n));
      if (p) rhs.tail(p) = -r_p;
      const Vec sol = kkt.solve(rhs);
      dx = sol.head(n);
      dy = sol.tail(p);
      dz = d.cwiseProduct(J * dx + r_g) - r_c.cwiseQuotient(s);
      ds = -(r_c + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    Vec dx, dy, dz, ds;
    // Predictor.
    const Vec rc_aff = s.cwiseProduct(z);
    newton(rc_aff, dx, dy, dz, ds);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = m ? (s + a_aff * ds).dot(z + a_aff * dz) / m : 0.0;
    double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;
    // Centring is not reduced while the (nonlinear) primal residual lags far
    // behind complementarity; otherwise the KKT system degenerates first.
    if (pres > 100.0 * std::max(gap, opt.tol)) sigma = std::max(sigma, 0.3);
    // Corrector.
    const Vec rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vec::Constant(m, sigma * mu);
    newton(rc, dx, dy, dz, ds);
    if (!dx.allFinite() || !dz.allFinite()) {
      res.status = SolveStatus::numeric_failure;
      break;
    }
    double step = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(z, dz)));
    // Quadratic rows pick up alpha^2 dx'Q dx beyond the linearised
    // prediction; backtrack until the step does not add infeasibility.
    if (!f.quads.empty()) {
      const double allowed = std::max({10.0 * r_g.lpNorm<Eigen::Infinity>(), opt.tol * h_norm, 10.0 * mu});
      for (int bt = 0; bt < 40; ++bt) {
        const Vec trial = eval_g(f, x + step * dx) + s + step * ds;
        if (trial.lpNorm<Eigen::Infinity>() <= allowed) break;
        step *= 0.5;
      }
    }
    stalled = step < 1e-6 ? stalled + 1 : 0;
    x += step * dx;
    y += step * dy;
    z += step * dz;
    s += step * ds;
    // Keep strictly interior against round-off.
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);
  }
  res.x = x;
  // Round-off can stall the last digits; an iterate that met the acceptance
  // level earlier is still a valid answer.
  if (res.status != SolveStatus::optimal && !res.diverging_x && best_merit <= opt.accept_tol) {
    res.status = SolveStatus::optimal;
    res.x = best_x;
  }
  return res;
}

// min sum(t) + sum(e+) + sum(e-) s.t. g(x) <= t, A x - b = e+ - e-, t, e+, e- >= 0.
StandardForm elastic(const StandardForm& f) {
  StandardForm e;
  const int n = f.n + f.m + 2 * f.p;
  e.n = n;
  e.p = f.p;
  e.c = Vec::Zero(n);
  e.c.tail(f.m + 2 * f.p).setOnes();
  std::vector<Trip> a;
  for (int k = 0; k < f.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(f.A, k); it; ++it) a.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < f.p; ++i) {
    a.emplace_back(i, f.n + f.m + i, -1.0);
    a.emplace_back(i, f.n + f.m + f.p + i, 1.0);
  }
  e.A.resize(e.p, n);
  e.A.setFromTriplets(a.begin(), a.end());
  e.b = f.b;

  std::vector<Trip> g;
  for (int k = 0; k < f.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(f.G, k); it; ++it) g.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < f.m; ++i) g.emplace_back(i, f.n + i, -1.0);
  const int extra = f.m + 2 * f.p;
  for (int i = 0; i < extra; ++i) g.emplace_back(f.m + i, f.n + i, -1.0);
  e.m = f.m + extra;
  e.G.resize(e.m, n);
  e.G.setFromTriplets(g.begin(), g.end());
  e.h = Vec::Zero(e.m);
  e.h.head(f.m) = f.h;
  e.quads = f.quads;
  return e;
}

}  // namespace

Solution solve(const ConvexProgram& program, const SolveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const StandardForm f = standardize(program);
  IpmResult r = interior_point(f, options);

  Solution sol;
  sol.iterations = r.iterations;
  sol.status = r.status;
  if (r.status != SolveStatus::optimal) {
    // Classify: an elastic problem with positive optimum certifies infeasibility.
    const StandardForm e = elastic(f);
    const IpmResult er = interior_point(e, options);
    if (er.status == SolveStatus::optimal) {
      const double violation = objective(e, er.x);
      if (violation > 1e-7) sol.status = SolveStatus::infeasible;
      else if (r.diverging_x) sol.status = SolveStatus::unbounded;
      else if (r.status == SolveStatus::infeasible) sol.status = SolveStatus::numeric_failure;
    }
  }
  sol.values.assign(r.x.data(), r.x.data() + r.x.size());
  sol.objective_value = program.objective_value(sol.values);
  sol.max_primal_violation = program.max_violation(sol.values);
  sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

}  // namespace gainsched
