#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace gainsched {

struct VarId {
  int id = -1;
  friend bool operator==(VarId, VarId) = default;
};

struct LinearTerm {
  VarId var;
  double coef = 0.0;
};

/// sum coef * x + constant
struct AffineExpr {
  std::vector<LinearTerm> terms;
  double constant = 0.0;

  AffineExpr& add(VarId v, double coef) {
    terms.push_back({v, coef});
    return *this;
  }
};

/// coef * x_i * x_j; (i, j) and (j, i) describe the same monomial.
struct QuadTerm {
  VarId i;
  VarId j;
  double coef = 0.0;
};

struct QuadExpr {
  std::vector<QuadTerm> quad;
  AffineExpr affine;

  QuadExpr& add_square(VarId v, double coef) {
    quad.push_back({v, v, coef});
    return *this;
  }
};

struct Variable {
  std::string name;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct Constraint {
  QuadExpr expr;  // expr <= 0 (or == 0 for equalities, which are affine)
  std::string label;
  bool is_quadratic() const { return !expr.quad.empty(); }
};

/// Convex quadratically constrained quadratic program:
///   minimise objective(x)
///   subject to  eq_k(x) == 0  (affine)
///               ineq_k(x) <= 0  (affine or convex quadratic)
///               lo <= x <= hi
/// Quadratic parts are checked for positive semidefiniteness on insertion,
/// so every instance that can be built is convex.
class ConvexProgram {
 public:
  VarId add_variable(std::string name,
                     double lo = -std::numeric_limits<double>::infinity(),
                     double hi = std::numeric_limits<double>::infinity());

  /// expr == 0
  void add_affine_eq(AffineExpr expr, std::string label = {});
  /// expr <= 0
  void add_affine_ineq(AffineExpr expr, std::string label = {});
  /// expr <= 0; throws Error("non_convex") if the quadratic part is not PSD.
  void add_quad_ineq(QuadExpr expr, std::string label = {});
  /// Throws Error("non_convex") if the quadratic part is not PSD.
  void set_quad_objective(QuadExpr expr);

  int num_variables() const { return static_cast<int>(variables_.size()); }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& equalities() const { return equalities_; }
  const std::vector<Constraint>& inequalities() const { return inequalities_; }
  const QuadExpr& objective() const { return objective_; }

  double evaluate(const QuadExpr& expr, const std::vector<double>& x) const;
  double objective_value(const std::vector<double>& x) const { return evaluate(objective_, x); }

  /// Largest violation of any equality, inequality or bound, each divided by
  /// max(1, largest coefficient magnitude of its row).
  double max_violation(const std::vector<double>& x) const;

  /// Human-readable dump, one item per line (see docs/formats.md).
  void write_text(std::ostream& os) const;

 private:
  void check_vars(const QuadExpr& expr) const;

  std::vector<Variable> variables_;
  std::vector<Constraint> equalities_;
  std::vector<Constraint> inequalities_;
  QuadExpr objective_;
};

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit, numeric_failure };

const char* to_string(SolveStatus status);

struct SolveOptions {
  double tol = 1e-9;       // relative primal/dual residuals and duality gap
  double gap_tol = 1e-14;  // complementarity target once residuals are met;
                           // drives degenerate bound variables to their bound
  double accept_tol = 1e-6;  // fallback when round-off stalls before tol
  int max_iter = 150;
};

struct Solution {
  SolveStatus status = SolveStatus::numeric_failure;
  std::vector<double> values;
  double objective_value = 0.0;
  double max_primal_violation = 0.0;
  double solve_time = 0.0;  // seconds
  int iterations = 0;

  bool optimal() const { return status == SolveStatus::optimal; }
  double operator[](VarId v) const { return values.at(v.id); }
};

/// Primal-dual interior-point method (infeasible start, Mehrotra
/// predictor-corrector). Non-convergence is classified with an elastic
/// feasibility problem: positive minimum violation means infeasible.
Solution solve(const ConvexProgram& program, const SolveOptions& options = {});

}  // namespace gainsched
