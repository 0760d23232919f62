#include "gainsched/program.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "gainsched/error.hpp"

namespace gainsched {
namespace {

// Positive semidefiniteness of the symmetric form sum coef x_i x_j.
bool is_psd(const std::vector<QuadTerm>& quad) {
  if (quad.empty()) return true;
  std::map<int, int> local;
  bool diagonal = true;
  for (const auto& t : quad) {
    local.emplace(t.i.id, 0);
    local.emplace(t.j.id, 0);
    if (t.i.id != t.j.id && t.coef != 0.0) diagonal = false;
  }
  int next = 0;
  for (auto& [var, idx] : local) idx = next++;
  if (diagonal) {
    std::vector<double> d(local.size(), 0.0);
    for (const auto& t : quad) d[local[t.i.id]] += t.coef;
    return std::all_of(d.begin(), d.end(), [](double v) { return v >= 0.0; });
  }
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(next, next);
  for (const auto& t : quad) {
    const int a = local[t.i.id], b = local[t.j.id];
    if (a == b) {
      Q(a, a) += t.coef;
    } else {
      Q(a, b) += 0.5 * t.coef;
      Q(b, a) += 0.5 * t.coef;
    }
  }
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-12 * scale;
}

double row_scale(const QuadExpr& e) {
  double s = 1.0;
  for (const auto& t : e.quad) s = std::max(s, std::abs(t.coef));
  for (const auto& t : e.affine.terms) s = std::max(s, std::abs(t.coef));
  return s;
}

void write_expr(std::ostream& os, const QuadExpr& e, const std::vector<Variable>& vars) {
  for (const auto& t : e.quad) os << ' ' << t.coef << '*' << vars[t.i.id].name << '*' << vars[t.j.id].name;
  for (const auto& t : e.affine.terms) os << ' ' << t.coef << '*' << vars[t.var.id].name;
  os << ' ' << e.affine.constant;
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numeric_failure: return "numeric_failure";
  }
  return "unknown";
}

VarId ConvexProgram::add_variable(std::string name, double lo, double hi) {
  if (lo > hi) throw Error("schema", "variable " + name + " has empty bounds");
  variables_.push_back({std::move(name), lo, hi});
  return VarId{static_cast<int>(variables_.size()) - 1};
}

void ConvexProgram::check_vars(const QuadExpr& expr) const {
  auto ok = [&](VarId v) { return v.id >= 0 && v.id < num_variables(); };
  for (const auto& t : expr.quad)
    if (!ok(t.i) || !ok(t.j)) throw Error("schema", "expression references an unknown variable");
  for (const auto& t : expr.affine.terms)
    if (!ok(t.var)) throw Error("schema", "expression references an unknown variable");
}

void ConvexProgram::add_affine_eq(AffineExpr expr, std::string label) {
  QuadExpr q{{}, std::move(expr)};
  check_vars(q);
  equalities_.push_back({std::move(q), std::move(label)});
}

void ConvexProgram::add_affine_ineq(AffineExpr expr, std::string label) {
  QuadExpr q{{}, std::move(expr)};
  check_vars(q);
  inequalities_.push_back({std::move(q), std::move(label)});
}

void ConvexProgram::add_quad_ineq(QuadExpr expr, std::string label) {
  check_vars(expr);
  if (!is_psd(expr.quad))
    throw Error("non_convex", "quadratic constraint '" + label + "' is not convex");
  inequalities_.push_back({std::move(expr), std::move(label)});
}

void ConvexProgram::set_quad_objective(QuadExpr expr) {
  check_vars(expr);
  if (!is_psd(expr.quad)) throw Error("non_convex", "objective is not convex");
  objective_ = std::move(expr);
}

double ConvexProgram::evaluate(const QuadExpr& expr, const std::vector<double>& x) const {
  double v = expr.affine.constant;
  for (const auto& t : expr.affine.terms) v += t.coef * x.at(t.var.id);
  for (const auto& t : expr.quad) v += t.coef * x.at(t.i.id) * x.at(t.j.id);
  return v;
}

double ConvexProgram::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (const auto& c : equalities_)
    worst = std::max(worst, std::abs(evaluate(c.expr, x)) / row_scale(c.expr));
  for (const auto& c : inequalities_)
    worst = std::max(worst, std::max(0.0, evaluate(c.expr, x)) / row_scale(c.expr));
  for (int i = 0; i < num_variables(); ++i) {
    worst = std::max(worst, variables_[i].lo - x.at(i));
    worst = std::max(worst, x.at(i) - variables_[i].hi);
  }
  return worst;
}

void ConvexProgram::write_text(std::ostream& os) const {
  os << "variables " << variables_.size() << '\n';
  for (const auto& v : variables_) os << "var " << v.name << ' ' << v.lo << ' ' << v.hi << '\n';
  os << "minimize";
  write_expr(os, objective_, variables_);
  os << '\n';
  for (const auto& c : equalities_) {
    os << "eq " << (c.label.empty() ? "-" : c.label);
    write_expr(os, c.expr, variables_);
    os << '\n';
  }
  for (const auto& c : inequalities_) {
    os << (c.is_quadratic() ? "qle " : "le ") << (c.label.empty() ? "-" : c.label);
    write_expr(os, c.expr, variables_);
    os << '\n';
  }
}

}  // namespace gainsched
