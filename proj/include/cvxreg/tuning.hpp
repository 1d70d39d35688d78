#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cvxreg/estimators.hpp"

namespace cvxreg {

struct Grid {
  std::string parameter;       ///< "lambda", "L", "L0", or "q"
  std::vector<double> values;  ///< non-empty, strictly increasing
  void validate() const;
};

struct CvResult {
  double best = 0.0;
  std::vector<std::pair<double, double>> curve;  ///< (candidate, cv score)
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_sizes;
};

/// Disjoint index sets partitioning {0..n-1}; sizes differ by at most one.
/// Shuffle: Fisher-Yates on SplitMix64(seed), folds are contiguous chunks of
/// the shuffled order, the first n mod k folds one element larger.
std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed);

enum class TunedParameter { Lambda, Lipschitz, Radius, Quantile };

/// The estimator with every parameter fixed except the tuned one. For
/// Quantile, each fold fits CR on its training part and turns the candidate q
/// into percentile bounds of those subgradients (the WRCR pipeline).
struct TuneSpec {
  EstimatorConfig base;
  TunedParameter parameter = TunedParameter::Lambda;
};

/// CV(v) = (1/k) sum_folds sum_{held-out} (y_j - model_fold(x_j))^2; best is
/// the argmin with ties to the smallest candidate.
CvResult cross_validate(const Dataset& data, const TuneSpec& spec, const Grid& grid, int k = 5,
                        std::uint64_t seed = 0, int jobs = 1, const FitOptions& options = {});

/// Slope part of the OLS fit of y on (1, x). A rank-deficient design throws
/// unless ridge > 0, in which case (A'A + ridge I) backs the solve.
Vector reference_vector_ols(const Dataset& data, double ridge = 0.0);

/// Componentwise q-th / (1-q)-th percentiles of the rows of betas
/// (type-7 linear interpolation); requires 0 <= q < 0.5.
std::pair<Vector, Vector> percentile_bounds(const Matrix& betas, double q);

enum class GridProfile { Paper6, Paper7 };

/// The tuning grids used by the experiments: q is always {0.01,...,0.49};
/// under Paper6, L uses 50 equally spaced values on [0.1, 5.0], L0 50 values
/// on [0, max_i ||cr_betas_i - b0||], and lambda 50 values on [0.1, 5.0];
/// under Paper7, lambda/L/L0 all use 50 values on [1, 500].
Grid default_grid(Variant variant, GridProfile profile, const Matrix* cr_betas = nullptr,
                  const Vector* b0 = nullptr);

std::string cv_result_to_json(const CvResult& result, const Grid& grid);

}  // namespace cvxreg
