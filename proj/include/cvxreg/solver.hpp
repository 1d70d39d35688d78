#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvxreg/linalg.hpp"

namespace cvxreg {

/// One sparse inequality row: sum_k value[k] * z[index[k]] <= rhs.
struct LinearConstraint {
  std::vector<int> index;
  std::vector<double> value;
  double rhs = 0.0;
};

/// Per-variable box; +-inf entries mean unbounded.
struct VariableBounds {
  Vector lower;
  Vector upper;
};

/// ||z[index] - center|| <= radius.
struct SocConstraint {
  std::vector<int> index;
  Vector center;
  double radius = 0.0;
};

/// Optional block-arrow hint: variables [0, head) may couple arbitrarily,
/// the tail is partitioned into blocks of `block` consecutive variables that
/// couple only with the head. The KKT solve then eliminates the tail blocks
/// before factorizing the head Schur complement. Ignored (dense fallback)
/// whenever the problem does not actually have this pattern.
struct BlockStructure {
  int head = 0;
  int block = 0;
  bool enabled() const { return head > 0 && block > 0; }
};

/// Convex QP over linear inequalities, boxes, and second-order cones:
/// minimize 0.5 z'Pz + q'z.
struct QuadraticConicProgram {
  int num_vars = 0;
  SparseMatrix quadratic;  ///< P, symmetric PSD
  Vector linear;           ///< q
  std::vector<LinearConstraint> inequalities;
  std::optional<VariableBounds> bounds;
  std::vector<SocConstraint> cones;
  BlockStructure structure;

  /// Throws on violated invariants: P symmetric within 1e-12, radius >= 0,
  /// lower <= upper where both finite, indices in range.
  void validate() const;
};

enum class SolveStatus { Optimal, MaxIters, NumericalFailure, Infeasible };

const char* to_string(SolveStatus status);

struct SolverSettings {
  double tol_kkt = 1e-8;
  int max_iters = 200;
  double static_reg = 1e-9;  ///< static regularization on the KKT diagonal
  /// Newton crossover onto the identified active set after convergence.
  /// Pins the solution to the exact optimal face (so e.g. two solves of the
  /// same problem agree to machine precision) at the cost of one dense
  /// factorization; rejected automatically if it does not improve the
  /// certificate.
  bool polish = false;
  bool verbose = false;
};

struct Solution {
  Vector z;
  double objective = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  /// Max of normalized primal, dual, and complementarity residuals.
  double kkt_residual = kInf;
  int iterations = 0;

  // Dual multipliers, for independent KKT certification.
  Vector ineq_dual;                ///< one per inequality row, >= 0
  Vector lower_dual, upper_dual;   ///< per variable, 0 where the bound is absent
  std::vector<Vector> cone_dual;   ///< one (1+|index|)-vector per cone
  std::vector<int> fixed;          ///< variables pinned by presolve (lo == hi, radius 0)
  int working_rows = -1;           ///< rows materialized by constraint generation
};

/// Primal-dual interior-point solve with Nesterov-Todd scaling on the
/// second-order cones and Mehrotra predictor-corrector steps.
Solution solve(const QuadraticConicProgram& problem, const SolverSettings& settings = {});

/// Recomputes the KKT residual of a solution from scratch (primal feasibility,
/// stationarity, dual cone feasibility, complementarity; each normalized).
/// Deliberately independent of the solver's internal residual bookkeeping.
/// Stationarity rows of presolve-fixed variables are skipped.
double certify(const QuadraticConicProgram& problem, const Solution& solution);

/// Debug dump of a problem to JSON, for reproducing solver issues offline.
void dump_problem(const QuadraticConicProgram& problem, const std::string& path);
QuadraticConicProgram load_problem(const std::string& path);

/// Lazy source of inequality rows for constraint generation.
class ConstraintSource {
 public:
  virtual ~ConstraintSource() = default;
  /// Rows for the initial working set.
  virtual std::vector<LinearConstraint> initial() const = 0;
  /// Up to max_rows rows most violated at z (violation > tol), sorted by
  /// decreasing violation. Rows already satisfied must not be returned.
  virtual std::vector<LinearConstraint> violated(const Vector& z, double tol,
                                                 int max_rows) const = 0;
};

struct ConstraintGenSettings {
  SolverSettings solver;
  int max_rounds = 50;
  int rows_per_round = 500;
  /// A row counts as violated when its residual exceeds
  /// violation_tol * max(1, ||z||_inf).
  double violation_tol = 1e-8;
};

/// Outer cutting loop: solves `base` plus a growing working set of rows from
/// the source until no violated rows remain. The returned solution satisfies
/// every row the source can produce within the violation tolerance.
Solution solve_with_constraint_generation(const QuadraticConicProgram& base,
                                          const ConstraintSource& source,
                                          const ConstraintGenSettings& settings = {});

}  // namespace cvxreg
