#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cvxreg/model.hpp"
#include "cvxreg/tuning.hpp"

namespace cvxreg {

enum class TestFunction { TypeA, TypeB, TypeI, TypeII, Inverse1D };

const char* to_string(TestFunction f);
TestFunction test_function_from_string(const std::string& name);

struct TruthFn {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Closed-form test functions and their gradients.
TruthFn truth(TestFunction function, int d);

enum class DesignKind { UniformBox, EvenlySpaced1D };

/// Synthetic data description. UniformBox draws covariates uniformly from
/// [1, 10]^d; EvenlySpaced1D places x_i = 0.2 + 0.8 i/n - 0.8/(2n) on
/// [0.2, 1.0]. Noise is N(0, sigma^2) with sigma^2 = Var[f0(x)] / snr unless
/// sigma is given directly (Inverse1D defaults to sigma = 1).
struct SyntheticSpec {
  TestFunction function = TestFunction::TypeA;
  int n = 100;
  int d = 3;
  double snr = 3.0;
  std::optional<double> sigma;
  DesignKind design = DesignKind::UniformBox;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws the design row-major, then the noise vector, from SplitMix64(seed).
std::pair<Dataset, TruthFn> generate(const SyntheticSpec& spec);

struct CiSummary {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +- t_{0.975, m-1} sd / sqrt(m); needs at least two values.
CiSummary confidence_interval(const std::vector<double>& values);

struct MetricSummary {
  std::string name;
  std::vector<double> values;
  double mean = 0.0;
  double half_width = 0.0;
  bool ci_available = false;
};

struct LongRow {
  std::string estimator;
  int n = 0;
  int d = 0;
  double snr = 0.0;
  int replication = 0;
  double mse = 0.0;
};

struct ExperimentReport {
  std::string preset;
  std::string config_echo;  ///< JSON text
  std::vector<MetricSummary> metrics;
  std::vector<LongRow> rows;
  int failed_replications = 0;
  double runtime_seconds = 0.0;
  std::uint64_t seed = 0;

  std::string to_json() const;
  std::string rows_to_csv() const;  ///< header estimator,n,d,snr,replication,mse
  const MetricSummary* find(const std::string& name) const;
};

/// Boundary overfitting diagnostic on the 1/x setup: per replication the max
/// absolute error of the fitted values and of the fitted subgradients against
/// f0 and f0' over the design points, aggregated into 95% CIs.
ExperimentReport boundary_diagnostic(int n, int replications, const EstimatorConfig& config,
                                     std::uint64_t seed, int jobs = 1,
                                     const FitOptions& options = {});

struct McStudyConfig {
  TestFunction function = TestFunction::TypeA;
  std::vector<int> n_list{100};
  std::vector<int> d_list{3};
  std::vector<double> snr_list{3.0};
  int replications = 20;
  std::vector<Variant> estimators{Variant::Cr, Variant::Pcr, Variant::Lcr, Variant::Alcr,
                                  Variant::Wrcr};
  GridProfile profile = GridProfile::Paper6;
  /// Replaces the default grid for the given variants (e.g. a singleton
  /// lambda grid {0} to pin PCR to CR).
  std::vector<std::pair<Variant, Grid>> grid_overrides;
  bool retune_each_replication = true;
  int eval_points = 1000;
  int cv_folds = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  FitOptions fit;
};

/// The Monte Carlo comparison: per replication draw 2n observations, split
/// into training and validation halves, tune each estimator by 5-fold CV on
/// the validation set (b0 from its OLS slope, the L0 grid from the training
/// CR subgradients), fit on the training half, and score the MSE against f0
/// at freshly drawn evaluation points.
ExperimentReport mc_study(const McStudyConfig& config);

struct FrontierOutcome {
  double in_rmse = 0.0;
  double out_rmse = 0.0;
  /// 7 x d: mean, sd, min, p10, p50, p90, max of the subgradients.
  Matrix subgradient_summary;
  PwlModel model;
};

/// Fits the (monotone) estimator on train and scores both samples.
FrontierOutcome frontier_workflow(const Dataset& train, const Dataset& test,
                                  const EstimatorConfig& config, const FitOptions& options = {});

struct FrontierPresetRow {
  std::string estimator;
  double tuned_value = 0.0;
  bool has_tuned_value = false;
  double in_rmse = 0.0;
  double out_rmse = 0.0;
};

/// The five-estimator comparison on a frontier dataset: monotone variants,
/// parameters tuned by k-fold CV on the training years, b0 and the WRCR
/// bounds derived from the training CR subgradients.
std::vector<FrontierPresetRow> run_frontier_preset(const Dataset& train, const Dataset& test,
                                                   GridProfile profile, int folds,
                                                   std::uint64_t seed, int jobs,
                                                   const FitOptions& options = {});

/// Synthetic stand-in for the proprietary frontier data: per-firm sizes with
/// yearly drift, four cost drivers, and a known nondecreasing convex cost.
/// Tags are "F<firm>:<year>" over 2008..2020.
Dataset make_frontier_fixture(std::uint64_t seed = 20240817);

/// Temporal split: first 9 years (2008-2016) train, last 4 years test.
std::pair<Dataset, Dataset> frontier_split(const Dataset& data);

}  // namespace cvxreg
