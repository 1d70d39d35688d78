#include "cvxreg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <json.hpp>
#include <mutex>
#include <sstream>

#include "cvxreg/errors.hpp"
#include "cvxreg/parallel.hpp"
#include "cvxreg/rng.hpp"
#include "cvxreg/stats.hpp"

namespace cvxreg {

using nlohmann::json;

namespace {

// Sub-seed for the Monte Carlo estimate of Var[f0(x)] used in SNR
// calibration; fixed so sigma is identical across replications.
constexpr std::uint64_t kVarianceProbeSeed = 0x9d2c5680u;
constexpr int kVarianceProbeDraws = 100000;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

const char* to_string(TestFunction f) {
  switch (f) {
    case TestFunction::TypeA: return "typeA";
    case TestFunction::TypeB: return "typeB";
    case TestFunction::TypeI: return "typeI";
    case TestFunction::TypeII: return "typeII";
    case TestFunction::Inverse1D: return "inverse1d";
  }
  return "typeA";
}

TestFunction test_function_from_string(const std::string& name) {
  if (name == "typeA") return TestFunction::TypeA;
  if (name == "typeB") return TestFunction::TypeB;
  if (name == "typeI") return TestFunction::TypeI;
  if (name == "typeII") return TestFunction::TypeII;
  if (name == "inverse1d") return TestFunction::Inverse1D;
  throw ParseError("unknown test function '" + name + "'");
}

TruthFn truth(TestFunction function, int d) {
  switch (function) {
    case TestFunction::TypeA:
      if (d != 3) throw ConfigError("Type A is defined for d = 3");
      return {[](const Vector& x) {
                return 0.1 * x[0] + 0.1 * x[1] + 0.1 * x[2] +
                       0.3 * std::cbrt(x[0] * x[1] * x[2]);
              },
              [](const Vector& x) {
                const double g = std::cbrt(x[0] * x[1] * x[2]);
                Vector grad(3);
                for (int k = 0; k < 3; ++k) grad[k] = 0.1 + 0.1 * g / x[k];
                return grad;
              }};
    case TestFunction::TypeB:
      return {[d](const Vector& x) {
                double v = 1.0;
                for (int k = 0; k < d; ++k) v *= std::pow(x[k], 0.8 / d);
                return v;
              },
              [d](const Vector& x) {
                double v = 1.0;
                for (int k = 0; k < d; ++k) v *= std::pow(x[k], 0.8 / d);
                Vector grad(d);
                for (int k = 0; k < d; ++k) grad[k] = (0.8 / d) * v / x[k];
                return grad;
              }};
    case TestFunction::TypeI:
      return {[](const Vector& x) { return x.squaredNorm(); },
              [](const Vector& x) { return Vector(2.0 * x); }};
    case TestFunction::TypeII:
      return {[](const Vector& x) { return (x.array() - 0.2).square().sum(); },
              [](const Vector& x) { return Vector(2.0 * (x.array() - 0.2).matrix()); }};
    case TestFunction::Inverse1D:
      if (d != 1) throw ConfigError("the 1/x setup is one-dimensional");
      return {[](const Vector& x) { return 1.0 / x[0]; },
              [](const Vector& x) {
                Vector grad(1);
                grad[0] = -1.0 / (x[0] * x[0]);
                return grad;
              }};
  }
  throw ConfigError("unknown test function");
}

void SyntheticSpec::validate() const {
  if (n < 1 || d < 1) throw ConfigError("synthetic spec needs n >= 1 and d >= 1");
  if (function == TestFunction::TypeA && d != 3) throw ConfigError("Type A requires d = 3");
  if (function == TestFunction::Inverse1D && d != 1)
    throw ConfigError("the 1/x setup requires d = 1");
  if (design == DesignKind::EvenlySpaced1D && d != 1)
    throw ConfigError("the evenly spaced design is one-dimensional");
  if (!sigma && !(snr > 0.0)) throw ConfigError("synthetic spec needs snr > 0 or a direct sigma");
  if (sigma && (*sigma < 0.0 || !std::isfinite(*sigma)))
    throw ConfigError("sigma must be finite and >= 0");
}

namespace {

Vector draw_design_point(SplitMix64& rng, const SyntheticSpec& spec) {
  Vector x(spec.d);
  for (int k = 0; k < spec.d; ++k) x[k] = 1.0 + 9.0 * rng.next_uniform();
  return x;
}

double design_variance(const SyntheticSpec& spec, const TruthFn& f0) {
  SplitMix64 rng(kVarianceProbeSeed);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < kVarianceProbeDraws; ++i) {
    Vector x(spec.d);
    if (spec.design == DesignKind::UniformBox) {
      for (int k = 0; k < spec.d; ++k) x[k] = 1.0 + 9.0 * rng.next_uniform();
    } else {
      x[0] = 0.2 + 0.8 * rng.next_uniform();
    }
    const double v = f0.value(x);
    s += v;
    s2 += v * v;
  }
  const double m = s / kVarianceProbeDraws;
  return s2 / kVarianceProbeDraws - m * m;
}

}  // namespace

std::pair<Dataset, TruthFn> generate(const SyntheticSpec& spec) {
  spec.validate();
  TruthFn f0 = truth(spec.function, spec.d);
  SplitMix64 rng(spec.seed);
  Dataset data;
  data.x.resize(spec.n, spec.d);
  data.y.resize(spec.n);
  if (spec.design == DesignKind::EvenlySpaced1D) {
    for (int i = 0; i < spec.n; ++i)
      data.x(i, 0) = 0.2 + 0.8 * (i + 1.0) / spec.n - 0.8 / (2.0 * spec.n);
  } else {
    for (int i = 0; i < spec.n; ++i)
      for (int k = 0; k < spec.d; ++k) data.x(i, k) = 1.0 + 9.0 * rng.next_uniform();
  }
  double sigma;
  if (spec.sigma) {
    sigma = *spec.sigma;
  } else if (spec.function == TestFunction::Inverse1D) {
    sigma = 1.0;
  } else {
    sigma = std::sqrt(design_variance(spec, f0) / spec.snr);
  }
  for (int i = 0; i < spec.n; ++i) {
    const Vector xi = data.x.row(i);
    data.y[i] = f0.value(xi) + sigma * rng.next_gaussian();
  }
  return {std::move(data), std::move(f0)};
}

CiSummary confidence_interval(const std::vector<double>& values) {
  if (values.size() < 2) throw DataError("confidence_interval needs at least two values");
  const double m = mean(values);
  const double sd = sample_sd(values);
  const double t = student_t_quantile(0.975, static_cast<int>(values.size()) - 1);
  return {m, t * sd / std::sqrt(static_cast<double>(values.size()))};
}

const MetricSummary* ExperimentReport::find(const std::string& name) const {
  for (const auto& metric : metrics)
    if (metric.name == name) return &metric;
  return nullptr;
}

std::string ExperimentReport::to_json() const {
  json out;
  out["schema"] = "cvxreg-report/1";
  out["preset"] = preset;
  out["seed"] = seed;
  out["runtime_seconds"] = runtime_seconds;
  out["failed_replications"] = failed_replications;
  if (!config_echo.empty()) out["config"] = json::parse(config_echo);
  json ms = json::array();
  for (const auto& metric : metrics) {
    json mj;
    mj["name"] = metric.name;
    mj["values"] = metric.values;
    if (metric.ci_available) {
      mj["mean"] = metric.mean;
      mj["ci_half_width"] = metric.half_width;
    } else {
      mj["ci"] = "unavailable";
      if (!metric.values.empty()) mj["mean"] = mean(metric.values);
    }
    ms.push_back(std::move(mj));
  }
  out["metrics"] = std::move(ms);
  return out.dump(2);
}

std::string ExperimentReport::rows_to_csv() const {
  std::ostringstream out;
  out << "estimator,n,d,snr,replication,mse\n";
  for (const auto& row : rows) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", row.mse);
    out << row.estimator << "," << row.n << "," << row.d << "," << row.snr << ","
        << row.replication << "," << buf << "\n";
  }
  return out.str();
}

namespace {

MetricSummary summarize(std::string name, std::vector<double> values) {
  MetricSummary m;
  m.name = std::move(name);
  m.values = std::move(values);
  if (m.values.size() >= 2) {
    const auto ci = confidence_interval(m.values);
    m.mean = ci.mean;
    m.half_width = ci.half_width;
    m.ci_available = true;
  } else if (m.values.size() == 1) {
    m.mean = m.values[0];
  }
  return m;
}

}  // namespace

ExperimentReport boundary_diagnostic(int n, int replications, const EstimatorConfig& config,
                                     std::uint64_t seed, int jobs, const FitOptions& options) {
  if (replications < 1) throw ConfigError("boundary_diagnostic needs replications >= 1");
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> ferr(static_cast<std::size_t>(replications),
                           std::numeric_limits<double>::quiet_NaN());
  std::vector<double> gerr(static_cast<std::size_t>(replications),
                           std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> failures(static_cast<std::size_t>(replications));

  parallel_for(replications, jobs, [&](int rep) {
    SyntheticSpec spec;
    spec.function = TestFunction::Inverse1D;
    spec.n = n;
    spec.d = 1;
    spec.design = DesignKind::EvenlySpaced1D;
    spec.seed = substream(seed, static_cast<std::uint64_t>(rep)).next_u64();
    try {
      auto [data, f0] = generate(spec);
      const PwlModel model = fit(data, config, options);
      double fe = 0.0, ge = 0.0;
      for (int i = 0; i < data.n(); ++i) {
        const Vector xi = data.x.row(i);
        fe = std::max(fe, std::abs(model.pieces[static_cast<std::size_t>(i)].value - f0.value(xi)));
        ge = std::max(ge, (model.pieces[static_cast<std::size_t>(i)].beta - f0.gradient(xi))
                              .cwiseAbs()
                              .maxCoeff());
      }
      ferr[static_cast<std::size_t>(rep)] = fe;
      gerr[static_cast<std::size_t>(rep)] = ge;
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(rep)] = e.what();
    }
  });

  ExperimentReport report;
  report.preset = "boundary";
  report.seed = seed;
  json echo;
  echo["n"] = n;
  echo["replications"] = replications;
  echo["estimator"] = to_string(config.variant);
  report.config_echo = echo.dump();
  std::vector<double> fvals, gvals;
  for (int rep = 0; rep < replications; ++rep) {
    if (failures[static_cast<std::size_t>(rep)].empty()) {
      fvals.push_back(ferr[static_cast<std::size_t>(rep)]);
      gvals.push_back(gerr[static_cast<std::size_t>(rep)]);
    } else {
      ++report.failed_replications;
    }
  }
  report.metrics.push_back(summarize("max_function_error", std::move(fvals)));
  report.metrics.push_back(summarize("max_subgradient_error", std::move(gvals)));
  report.runtime_seconds = elapsed_seconds(start);
  return report;
}

// ---------------------------------------------------------------------------
// Monte Carlo comparison of the estimators.
// ---------------------------------------------------------------------------

namespace {

struct TunedChoice {
  EstimatorConfig config;
  double value = 0.0;
  bool tuned = false;
};

// Tunes one estimator for a replication: CV on the validation half, b0 from
// its OLS slope, L0 grid and WRCR percentile bounds from the training CR.
TunedChoice tune_for_replication(Variant variant, const Dataset& validation,
                                 const Matrix& train_cr_betas, const Vector& b0,
                                 GridProfile profile, const Grid* grid_override, int folds,
                                 std::uint64_t fold_seed, const FitOptions& options) {
  TunedChoice out;
  if (variant == Variant::Cr) {
    out.config = EstimatorConfig::cr();
    return out;
  }
  TuneSpec spec;
  switch (variant) {
    case Variant::Pcr:
      spec.base = EstimatorConfig::pcr(0.0);
      spec.parameter = TunedParameter::Lambda;
      break;
    case Variant::Lcr:
      spec.base = EstimatorConfig::lcr(1.0);
      spec.parameter = TunedParameter::Lipschitz;
      break;
    case Variant::Alcr:
      spec.base = EstimatorConfig::alcr(b0, 1.0);
      spec.parameter = TunedParameter::Radius;
      break;
    case Variant::Wrcr: {
      auto [lo, hi] = percentile_bounds(train_cr_betas, 0.25);
      spec.base = EstimatorConfig::wrcr(lo, hi);
      spec.parameter = TunedParameter::Quantile;
      break;
    }
    default:
      throw ConfigError("cr is handled above");
  }
  const Grid grid =
      grid_override ? *grid_override : default_grid(variant, profile, &train_cr_betas, &b0);
  const CvResult cv = cross_validate(validation, spec, grid, folds, fold_seed, 1, options);
  out.value = cv.best;
  out.tuned = true;
  switch (variant) {
    case Variant::Pcr:
      out.config = EstimatorConfig::pcr(cv.best);
      break;
    case Variant::Lcr:
      out.config = EstimatorConfig::lcr(cv.best);
      break;
    case Variant::Alcr:
      out.config = EstimatorConfig::alcr(b0, cv.best);
      break;
    case Variant::Wrcr: {
      auto [lo, hi] = percentile_bounds(train_cr_betas, cv.best);
      out.config = EstimatorConfig::wrcr(lo, hi);
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace

ExperimentReport mc_study(const McStudyConfig& config) {
  if (config.replications < 1) throw ConfigError("mc_study needs replications >= 1");
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.preset = "mc_study";
  report.seed = config.seed;
  {
    json echo;
    echo["function"] = to_string(config.function);
    echo["n"] = config.n_list;
    echo["d"] = config.d_list;
    echo["snr"] = config.snr_list;
    echo["replications"] = config.replications;
    echo["eval_points"] = config.eval_points;
    echo["profile"] = config.profile == GridProfile::Paper6 ? "paper6" : "paper7";
    echo["retune_each_replication"] = config.retune_each_replication;
    json est = json::array();
    for (Variant v : config.estimators) est.push_back(to_string(v));
    echo["estimators"] = est;
    report.config_echo = echo.dump();
  }

  std::mutex report_mutex;
  std::uint64_t cell_index = 0;
  for (int d : config.d_list) {
    for (int n : config.n_list) {
      for (double snr : config.snr_list) {
        ++cell_index;
        const std::uint64_t cell_seed =
            mix64(config.seed ^ (0x51ed2700d1b54a33ULL * cell_index));
        const std::size_t ne = config.estimators.size();
        Matrix mse(config.replications, static_cast<Eigen::Index>(ne));
        mse.setConstant(std::numeric_limits<double>::quiet_NaN());
        std::vector<std::string> failures(static_cast<std::size_t>(config.replications));
        std::vector<TunedChoice> frozen(ne);
        bool have_frozen = false;

        auto run_replication = [&](int rep, bool allow_tuning) {
          auto master = substream(cell_seed, static_cast<std::uint64_t>(rep));
          const std::uint64_t data_seed = master.next_u64();
          const std::uint64_t fold_seed = master.next_u64();
          const std::uint64_t eval_seed = master.next_u64();

          SyntheticSpec spec;
          spec.function = config.function;
          spec.n = 2 * n;
          spec.d = d;
          spec.snr = snr;
          spec.seed = data_seed;
          auto [both, f0] = generate(spec);
          Dataset train, validation;
          train.x = both.x.topRows(n);
          train.y = both.y.head(n);
          validation.x = both.x.bottomRows(n);
          validation.y = both.y.tail(n);

          const PwlModel cr_model = fit(train, EstimatorConfig::cr(), config.fit);
          const Matrix cr_betas = subgradient_matrix(cr_model);
          const Vector b0 = reference_vector_ols(validation);

          SplitMix64 eval_rng(eval_seed);
          Matrix eval_x(config.eval_points, d);
          for (int i = 0; i < config.eval_points; ++i)
            for (int k = 0; k < d; ++k) eval_x(i, k) = 1.0 + 9.0 * eval_rng.next_uniform();
          Vector eval_truth(config.eval_points);
          for (int i = 0; i < config.eval_points; ++i) {
            const Vector xi = eval_x.row(i);
            eval_truth[i] = f0.value(xi);
          }

          for (std::size_t e = 0; e < ne; ++e) {
            const Variant variant = config.estimators[e];
            PwlModel model;
            if (variant == Variant::Cr) {
              model = cr_model;
            } else {
              TunedChoice choice;
              if (allow_tuning) {
                const Grid* grid_override = nullptr;
                for (const auto& [ov, og] : config.grid_overrides)
                  if (ov == variant) grid_override = &og;
                choice = tune_for_replication(variant, validation, cr_betas, b0,
                                              config.profile, grid_override, config.cv_folds,
                                              fold_seed, config.fit);
                if (!config.retune_each_replication) {
                  std::lock_guard<std::mutex> lock(report_mutex);
                  frozen[e] = choice;
                }
              } else {
                std::lock_guard<std::mutex> lock(report_mutex);
                choice = frozen[e];
              }
              // PCR at lambda = 0 is the CR program; reuse the CR estimator
              // (with its minimum-norm subgradients) rather than refitting.
              if (variant == Variant::Pcr && choice.config.lambda == 0.0) {
                model = cr_model;
              } else {
                model = fit(train, choice.config, config.fit);
              }
            }
            double s = 0.0;
            for (int i = 0; i < config.eval_points; ++i) {
              const Vector xi = eval_x.row(i);
              const double err = evaluate(model, xi) - eval_truth[i];
              s += err * err;
            }
            mse(rep, static_cast<Eigen::Index>(e)) = s / config.eval_points;
          }
        };

        auto guarded = [&](int rep, bool allow_tuning) {
          try {
            run_replication(rep, allow_tuning);
          } catch (const Error& e) {
            failures[static_cast<std::size_t>(rep)] = e.what();
          }
        };

        if (config.retune_each_replication) {
          parallel_for(config.replications, config.jobs, [&](int rep) { guarded(rep, true); });
        } else {
          guarded(0, true);
          have_frozen = failures[0].empty();
          if (!have_frozen)
            throw Error("mc_study: tuning replication failed: " + failures[0]);
          parallel_for(config.replications - 1, config.jobs,
                       [&](int rep) { guarded(rep + 1, false); });
        }

        for (std::size_t e = 0; e < ne; ++e) {
          std::vector<double> values;
          for (int rep = 0; rep < config.replications; ++rep) {
            if (!failures[static_cast<std::size_t>(rep)].empty()) continue;
            values.push_back(mse(rep, static_cast<Eigen::Index>(e)));
            report.rows.push_back(LongRow{to_string(config.estimators[e]), n, d, snr, rep,
                                          mse(rep, static_cast<Eigen::Index>(e))});
          }
          std::ostringstream name;
          name << "mse[" << to_string(config.estimators[e]) << ",n=" << n << ",d=" << d
               << ",snr=" << snr << "]";
          report.metrics.push_back(summarize(name.str(), std::move(values)));
        }
        for (int rep = 0; rep < config.replications; ++rep)
          if (!failures[static_cast<std::size_t>(rep)].empty()) ++report.failed_replications;
      }
    }
  }
  report.runtime_seconds = elapsed_seconds(start);
  return report;
}

// ---------------------------------------------------------------------------
// Frontier workflow.
// ---------------------------------------------------------------------------

FrontierOutcome frontier_workflow(const Dataset& train, const Dataset& test,
                                  const EstimatorConfig& config, const FitOptions& options) {
  train.validate();
  test.validate();
  if (train.dim() != test.dim())
    throw DimensionError("train and test datasets have different dimensions");
  FrontierOutcome out;
  out.model = fit(train, config, options);
  out.in_rmse = std::sqrt(out.model.fit_stats.sse);
  double s = 0.0;
  for (int i = 0; i < test.n(); ++i) {
    const Vector xi = test.x.row(i);
    const double e = test.y[i] - evaluate(out.model, xi);
    s += e * e;
  }
  out.out_rmse = std::sqrt(s / test.n());

  const Matrix betas = subgradient_matrix(out.model);
  const int d = train.dim();
  out.subgradient_summary.resize(7, d);
  for (int k = 0; k < d; ++k) {
    std::vector<double> column(betas.col(k).data(), betas.col(k).data() + betas.rows());
    out.subgradient_summary(0, k) = mean(column);
    out.subgradient_summary(1, k) = column.size() > 1 ? sample_sd(column) : 0.0;
    out.subgradient_summary(2, k) = percentile(column, 0.0);
    out.subgradient_summary(3, k) = percentile(column, 0.10);
    out.subgradient_summary(4, k) = percentile(column, 0.50);
    out.subgradient_summary(5, k) = percentile(column, 0.90);
    out.subgradient_summary(6, k) = percentile(column, 1.0);
  }
  return out;
}

std::vector<FrontierPresetRow> run_frontier_preset(const Dataset& train, const Dataset& test,
                                                   GridProfile profile, int folds,
                                                   std::uint64_t seed, int jobs,
                                                   const FitOptions& options) {
  const auto cr_config = EstimatorConfig::cr().with_monotone();
  const PwlModel cr_model = fit(train, cr_config, options);
  const Matrix cr_betas = subgradient_matrix(cr_model);
  const int d = train.dim();
  Vector b0(d);
  for (int k = 0; k < d; ++k) {
    std::vector<double> column(cr_betas.col(k).data(), cr_betas.col(k).data() + cr_betas.rows());
    b0[k] = percentile(std::move(column), 0.5);  // per-coordinate medians
  }

  std::vector<FrontierPresetRow> rows;
  const std::vector<Variant> variants{Variant::Cr, Variant::Pcr, Variant::Lcr, Variant::Alcr,
                                      Variant::Wrcr};
  for (Variant variant : variants) {
    FrontierPresetRow row;
    row.estimator = to_string(variant);
    // Final fits all carry the minimum-norm refinement so the comparison is
    // between estimators, not between arbitrary solver-chosen subgradients;
    // fold fits inside CV stay unrefined for speed.
    EstimatorConfig config = cr_config;
    if (variant != Variant::Cr) {
      TuneSpec spec;
      spec.base = [&] {
        switch (variant) {
          case Variant::Pcr:
            spec.parameter = TunedParameter::Lambda;
            return EstimatorConfig::pcr(0.0);
          case Variant::Lcr:
            spec.parameter = TunedParameter::Lipschitz;
            return EstimatorConfig::lcr(1.0);
          case Variant::Alcr:
            spec.parameter = TunedParameter::Radius;
            return EstimatorConfig::alcr(b0, 1.0);
          default:
            spec.parameter = TunedParameter::Quantile;
            return EstimatorConfig::wrcr(Vector::Zero(d), Vector::Ones(d));
        }
      }();
      spec.base.monotone = true;
      const Grid grid = default_grid(variant, profile, &cr_betas, &b0);
      const CvResult cv = cross_validate(train, spec, grid, folds, seed, jobs, options);
      row.tuned_value = cv.best;
      row.has_tuned_value = true;
      switch (variant) {
        case Variant::Pcr:
          config = EstimatorConfig::pcr(cv.best).with_monotone();
          break;
        case Variant::Lcr:
          config = EstimatorConfig::lcr(cv.best).with_monotone();
          break;
        case Variant::Alcr:
          config = EstimatorConfig::alcr(b0, cv.best).with_monotone();
          break;
        case Variant::Wrcr: {
          auto [lo, hi] = percentile_bounds(cr_betas, cv.best);
          config = EstimatorConfig::wrcr(lo, hi).with_monotone();
          break;
        }
        default:
          break;
      }
      config.min_norm_refinement = true;
    }
    const auto outcome = frontier_workflow(train, test, config, options);
    row.in_rmse = outcome.in_rmse;
    row.out_rmse = outcome.out_rmse;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Synthetic frontier fixture.
// ---------------------------------------------------------------------------

namespace {

constexpr int kFixtureFirms = 20;
constexpr int kFixtureFirstYear = 2008;
constexpr int kFixtureYears = 13;

// Known nondecreasing convex cost on the fixture's covariate ranges.
double fixture_cost(const Vector& x) {
  return 2.2 * x[0] + 0.75 * x[1] + 28.0 * x[2] + 4.5 * x[3] + 0.020 * x[0] * x[0] +
         0.35 * x[2] * x[2];
}

}  // namespace

Dataset make_frontier_fixture(std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> base(kFixtureFirms), growth(kFixtureFirms);
  for (int f = 0; f < kFixtureFirms; ++f) {
    base[static_cast<std::size_t>(f)] = std::exp(2.2 + 1.0 * rng.next_gaussian());
    growth[static_cast<std::size_t>(f)] = 0.035 + 0.02 * rng.next_gaussian();
  }
  const int n = kFixtureFirms * kFixtureYears;
  Dataset data;
  data.x.resize(n, 4);
  data.y.resize(n);
  data.columns = {"x1", "x2", "x3", "x4"};
  int row = 0;
  for (int f = 0; f < kFixtureFirms; ++f) {
    for (int t = 0; t < kFixtureYears; ++t) {
      const double size =
          base[static_cast<std::size_t>(f)] * std::pow(1.0 + growth[static_cast<std::size_t>(f)], t);
      const double u1 = std::exp(0.10 * rng.next_gaussian());
      const double u2 = std::exp(0.15 * rng.next_gaussian());
      const double u3 = std::exp(0.12 * rng.next_gaussian());
      const double u4 = std::exp(0.15 * rng.next_gaussian());
      Vector x(4);
      x[0] = size * u1;                       // energy supply
      x[1] = 6.0 * std::pow(size, 0.85) * u2; // network length
      x[2] = 0.65 * size * u3;                // user points (thousands)
      x[3] = 1.8 * size * u4;                 // capital stock
      const double noise = 25.0 * rng.next_gaussian();
      data.x.row(row) = x;
      data.y[row] = fixture_cost(x) + noise;
      std::ostringstream tag;
      tag << "F" << (f + 1 < 10 ? "0" : "") << (f + 1) << ":" << (kFixtureFirstYear + t);
      data.tags.push_back(tag.str());
      ++row;
    }
  }
  data.validate();
  return data;
}

std::pair<Dataset, Dataset> frontier_split(const Dataset& data) {
  if (data.tags.empty()) throw DataError("frontier split needs tagged rows (firm:year)");
  std::vector<int> years(static_cast<std::size_t>(data.n()));
  int first_year = std::numeric_limits<int>::max();
  for (int i = 0; i < data.n(); ++i) {
    const std::string& tag = data.tags[static_cast<std::size_t>(i)];
    const auto pos = tag.rfind(':');
    if (pos == std::string::npos)
      throw DataError("tag '" + tag + "' has no ':<year>' suffix");
    years[static_cast<std::size_t>(i)] = std::stoi(tag.substr(pos + 1));
    first_year = std::min(first_year, years[static_cast<std::size_t>(i)]);
  }
  std::vector<int> train_rows, test_rows;
  for (int i = 0; i < data.n(); ++i) {
    if (years[static_cast<std::size_t>(i)] < first_year + 9) {
      train_rows.push_back(i);
    } else {
      test_rows.push_back(i);
    }
  }
  if (train_rows.empty() || test_rows.empty())
    throw DataError("frontier split produced an empty train or test set");
  auto take = [&](const std::vector<int>& rows) {
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.columns = data.columns;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
      out.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
      out.tags.push_back(data.tags[static_cast<std::size_t>(rows[i])]);
    }
    return out;
  };
  return {take(train_rows), take(test_rows)};
}

}  // namespace cvxreg
