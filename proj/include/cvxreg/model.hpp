#pragma once

#include <string>
#include <vector>

#include "cvxreg/linalg.hpp"
#include "cvxreg/solver.hpp"

namespace cvxreg {

/// n observations of d covariates with scalar responses. Immutable by
/// convention once built; every operation takes it by const reference.
struct Dataset {
  Matrix x;                          ///< n x d
  Vector y;                          ///< length n
  std::vector<std::string> columns;  ///< optional covariate names
  std::vector<std::string> tags;     ///< optional row tags (firm/year)

  int n() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }
  void validate() const;
};

enum class Variant { Cr, Pcr, Lcr, Alcr, Wrcr };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

/// Estimator choice with its parameters.
///
/// The minimum-norm refinement replaces the solver's subgradients by the
/// unique minimizer of sum ||beta_i||^2 over the optimal face; it is on by
/// default for CR (where it defines the estimator) and off elsewhere.
struct EstimatorConfig {
  Variant variant = Variant::Cr;
  double lambda = 0.0;     ///< PCR penalty weight
  Vector reference;        ///< ALCR b0 (LCR uses 0)
  double radius = 0.0;     ///< ALCR L0 / LCR L
  Vector lower, upper;     ///< WRCR l0, u0
  bool monotone = false;   ///< adds beta >= 0
  bool min_norm_refinement = true;
  bool standardize = false;

  static EstimatorConfig cr();
  static EstimatorConfig pcr(double lambda);
  static EstimatorConfig lcr(double L);
  static EstimatorConfig alcr(Vector b0, double L0);
  static EstimatorConfig wrcr(Vector l0, Vector u0);

  EstimatorConfig with_monotone(bool on = true) const;
  EstimatorConfig with_min_norm(bool on) const;

  /// Checks parameter invariants against covariate dimension d.
  void validate(int d) const;
};

/// One affine piece of a max-affine model: x -> value + beta . (x - anchor).
struct AffinePiece {
  double value = 0.0;
  Vector beta;
  Vector anchor;
};

struct FitStats {
  double sse = 0.0;  ///< (1/n) sum (y_i - f_i)^2
  SolveStatus solver_status = SolveStatus::Optimal;
  double kkt_residual = 0.0;
};

/// Fitted max-affine convex model; the deployable estimator.
struct PwlModel {
  std::vector<AffinePiece> pieces;
  EstimatorConfig config;
  FitStats fit_stats;

  int size() const { return static_cast<int>(pieces.size()); }
  int dim() const { return pieces.empty() ? 0 : static_cast<int>(pieces[0].beta.size()); }

  /// Verifies pairwise convexity at the anchors plus the config's subgradient
  /// bounds. Residuals are normalized by max(1, max |value|) so the tolerance
  /// is meaningful at any data scale. Throws ValidationError naming the first
  /// violated pair (i, j).
  void validate(double tol = kFeasTol) const;
};

/// Max over pieces at the query point.
double evaluate(const PwlModel& model, const Vector& query);

/// Row-wise evaluation.
Vector evaluate_all(const PwlModel& model, const Matrix& queries);

/// Subgradient of the piece attaining the max at the query; ties broken by
/// lowest piece index.
Vector subgradient_at(const PwlModel& model, const Vector& query);

/// Intercept-form view: alpha_i = value_i - beta_i . anchor_i.
Vector intercepts(const PwlModel& model);

/// Subgradients stacked as an n x d matrix.
Matrix subgradient_matrix(const PwlModel& model);

std::string model_to_json(const PwlModel& model);
PwlModel model_from_json(const std::string& text);
void save_model(const PwlModel& model, const std::string& path);
PwlModel load_model(const std::string& path);

}  // namespace cvxreg
