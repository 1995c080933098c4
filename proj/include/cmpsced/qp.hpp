#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace cmpsced {

/// Dense convex program
///
///     minimize    1/2 x'Qx + q'x + constant_cost
///     subject to  A_eq x = b_eq
///                 G x <= h
///                 lb <= x <= ub      (entries may be +-inf)
///
/// Each equality row may carry a tag so callers can look up its dual by name.
struct ConvexProgram {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  double constant_cost = 0.0;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  std::vector<std::string> eq_tags;

  /// An empty program over `n` free variables.
  explicit ConvexProgram(Eigen::Index n = 0);

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_eq() const { return b_eq.size(); }
  Eigen::Index num_ineq() const { return h.size(); }

  double objective(const Eigen::VectorXd& x) const;

  /// Throws std::invalid_argument on inconsistent dimensions, asymmetric or
  /// indefinite Q, or lb > ub.
  void check() const;

  /// Row index of the equality carrying `tag`, if any.
  std::optional<Eigen::Index> find_eq(const std::string& tag) const;
};

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

std::string to_string(SolveStatus s);

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
};

/// Multipliers follow the sensitivity convention: eq_duals[i] is the rate of
/// change of the optimal objective with respect to b_eq[i]. Inequality and
/// bound multipliers are nonnegative, so stationarity reads
///
///     Qx + q - A_eq' y + G' z + z_ub - z_lb = 0.
struct SolverSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  Eigen::VectorXd lower_bound_duals;
  Eigen::VectorXd upper_bound_duals;
  double objective = 0.0;
  double dual_objective = 0.0;
  KktResiduals kkt;
  int iterations = 0;

  bool ok() const { return status == SolveStatus::optimal; }
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 100;
};

/// Primal-dual interior point (Mehrotra predictor-corrector) on dense data.
SolverSolution solve(const ConvexProgram& prog, const SolverOptions& opts = {});

/// KKT residuals of (x, duals) against `prog`, using the sign conventions of
/// SolverSolution.
KktResiduals kkt_residuals(const ConvexProgram& prog, const SolverSolution& sol);

/// Incremental assembly of a ConvexProgram from sparse row descriptions.
class ProgramBuilder {
 public:
  struct Term {
    Eigen::Index var;
    double coef;
  };

  Eigen::Index add_variable(double lb, double ub, double linear_cost = 0.0);
  Eigen::Index num_vars() const { return static_cast<Eigen::Index>(lb_.size()); }

  void add_equality(std::vector<Term> terms, double rhs, std::string tag = {});
  void add_inequality(std::vector<Term> terms, double rhs);  // sum(coef*x) <= rhs

  void add_linear_cost(Eigen::Index var, double coef) { cost_[var] += coef; }
  void add_quadratic(Eigen::Index i, Eigen::Index j, double value);  // Q(i,j) and Q(j,i)
  void add_constant_cost(double c) { constant_ += c; }

  /// Intersects the current bounds of `var` with [lb, ub].
  void tighten_bounds(Eigen::Index var, double lb, double ub);
  double lower(Eigen::Index var) const { return lb_[var]; }
  double upper(Eigen::Index var) const { return ub_[var]; }

  std::size_t num_equalities() const { return eqs_.size(); }
  std::size_t num_inequalities() const { return ineqs_.size(); }

  ConvexProgram build() const;

 private:
  struct Row {
    std::vector<Term> terms;
    double rhs;
    std::string tag;
  };
  std::vector<double> lb_, ub_, cost_;
  std::vector<Row> eqs_, ineqs_;
  std::vector<std::pair<std::pair<Eigen::Index, Eigen::Index>, double>> quad_;
  double constant_ = 0.0;
};

}  // namespace cmpsced
