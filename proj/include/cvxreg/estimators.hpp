#pragma once

#include <optional>

#include "cvxreg/model.hpp"
#include "cvxreg/solver.hpp"

namespace cvxreg {

struct FitOptions {
  SolverSettings solver;
  /// Force the dense or lazy constraint path; unset picks by problem size.
  std::optional<bool> dense;
  /// Materialize all n(n-1) pairwise rows up to this n, generate lazily above.
  int dense_threshold = 300;
  /// Neighbors per point for the initial working set when d > 1.
  int knn = 10;
  int cg_max_rounds = 50;
  int cg_rows_per_round = 500;
};

/// Canonical program for (data, config): variables (f_1..f_n, beta_1..beta_n),
/// objective (1/n) sum (y_i - f_i)^2 [+ (lambda/n) sum ||beta_i||^2 for PCR],
/// one inequality per ordered pair i != j, boxes for WRCR/monotone, one
/// second-order cone per point for LCR/ALCR. Constant objective terms
/// (sum y^2 / n) are dropped.
QuadraticConicProgram build_problem(const Dataset& data, const EstimatorConfig& config);

/// Lazy generator of the pairwise convexity rows of build_problem. The
/// initial working set is the sorted chain in d = 1 and k-nearest-neighbor
/// pairs in d > 1.
class PairwiseConvexitySource : public ConstraintSource {
 public:
  PairwiseConvexitySource(const Dataset& data, int knn = 10);
  std::vector<LinearConstraint> initial() const override;
  std::vector<LinearConstraint> violated(const Vector& z, double tol,
                                         int max_rows) const override;

 private:
  const Dataset& data_;
  int knn_;
};

/// Solves the estimator's program and assembles the fitted model.
PwlModel fit(const Dataset& data, const EstimatorConfig& config, const FitOptions& options = {});

/// Minimum-norm subgradients consistent with fixed fitted values: the unique
/// minimizer of sum ||beta_i||^2 subject to f_j >= f_i + beta_i'(x_j - x_i).
/// With `shape` set, that configuration's subgradient constraints (bounds,
/// cones, monotonicity) are added. The problem decouples across anchors and
/// is solved as n small cone QPs.
Matrix min_norm_subgradients(const Dataset& data, const Vector& fitted,
                             const EstimatorConfig* shape = nullptr,
                             const SolverSettings& settings = {});

/// Lipschitz CR: the ALCR program with b0 = 0 and L0 = L.
PwlModel lcr_fit(const Dataset& data, double L, const FitOptions& options = {});

}  // namespace cvxreg
