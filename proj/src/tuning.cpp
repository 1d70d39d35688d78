#include "cvxreg/tuning.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "cvxreg/errors.hpp"
#include "cvxreg/parallel.hpp"
#include "cvxreg/rng.hpp"
#include "cvxreg/stats.hpp"

namespace cvxreg {

void Grid::validate() const {
  if (values.empty()) throw ConfigError("grid '" + parameter + "' is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ConfigError("grid '" + parameter + "' has non-finite value");
    if (i > 0 && values[i] <= values[i - 1])
      throw ConfigError("grid '" + parameter + "' must be strictly increasing");
  }
}

std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_split requires k >= 2");
  if (k > n) throw ConfigError("kfold_split requires k <= n");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  const int base = n / k, rem = n % k;
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < rem ? 1 : 0);
    folds[static_cast<std::size_t>(f)].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  return folds;
}

namespace {

Dataset subset(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
    out.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
  }
  out.columns = data.columns;
  if (!data.tags.empty())
    for (int r : rows) out.tags.push_back(data.tags[static_cast<std::size_t>(r)]);
  return out;
}

void check_spec(const TuneSpec& spec) {
  const Variant v = spec.base.variant;
  switch (spec.parameter) {
    case TunedParameter::Lambda:
      if (v != Variant::Pcr) throw ConfigError("lambda tuning needs a pcr template");
      break;
    case TunedParameter::Lipschitz:
      if (v != Variant::Lcr) throw ConfigError("L tuning needs an lcr template");
      break;
    case TunedParameter::Radius:
      if (v != Variant::Alcr) throw ConfigError("L0 tuning needs an alcr template");
      break;
    case TunedParameter::Quantile:
      if (v != Variant::Wrcr) throw ConfigError("q tuning needs a wrcr template");
      break;
  }
}

EstimatorConfig candidate_config(const TuneSpec& spec, double value, const Matrix* fold_betas) {
  EstimatorConfig config = spec.base;
  switch (spec.parameter) {
    case TunedParameter::Lambda:
      config.lambda = value;
      break;
    case TunedParameter::Lipschitz:
      config.radius = value;
      break;
    case TunedParameter::Radius:
      config.radius = value;
      break;
    case TunedParameter::Quantile: {
      auto [lo, hi] = percentile_bounds(*fold_betas, value);
      config.lower = std::move(lo);
      config.upper = std::move(hi);
      break;
    }
  }
  return config;
}

}  // namespace

CvResult cross_validate(const Dataset& data, const TuneSpec& spec, const Grid& grid, int k,
                        std::uint64_t seed, int jobs, const FitOptions& options) {
  data.validate();
  grid.validate();
  check_spec(spec);
  const int n = data.n();
  auto folds = kfold_split(n, k, seed);

  std::vector<Dataset> train(static_cast<std::size_t>(k)), heldout(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    std::vector<int> rest;
    rest.reserve(static_cast<std::size_t>(n));
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      rest.insert(rest.end(), folds[static_cast<std::size_t>(g)].begin(),
                  folds[static_cast<std::size_t>(g)].end());
    }
    std::sort(rest.begin(), rest.end());
    train[static_cast<std::size_t>(f)] = subset(data, rest);
    heldout[static_cast<std::size_t>(f)] = subset(data, folds[static_cast<std::size_t>(f)]);
  }

  // The WRCR pipeline derives the candidate bounds from the CR subgradients
  // of each fold's training part; those fits are shared across candidates.
  std::vector<Matrix> fold_betas(static_cast<std::size_t>(k));
  if (spec.parameter == TunedParameter::Quantile) {
    parallel_for(k, jobs, [&](int f) {
      try {
        const auto cr = fit(train[static_cast<std::size_t>(f)],
                            EstimatorConfig::cr().with_monotone(spec.base.monotone), options);
        fold_betas[static_cast<std::size_t>(f)] = subgradient_matrix(cr);
      } catch (const Error& e) {
        throw Error("cross-validation CR fit failed at fold " + std::to_string(f + 1) + ": " +
                    e.what());
      }
    });
  }

  const int m = static_cast<int>(grid.values.size());
  Matrix scores = Matrix::Zero(m, k);
  parallel_for(m * k, jobs, [&](int task) {
    const int c = task / k, f = task % k;
    const double value = grid.values[static_cast<std::size_t>(c)];
    try {
      const auto config =
          candidate_config(spec, value, &fold_betas[static_cast<std::size_t>(f)]);
      const auto model = fit(train[static_cast<std::size_t>(f)], config, options);
      const auto& ho = heldout[static_cast<std::size_t>(f)];
      double s = 0.0;
      for (int r = 0; r < ho.n(); ++r) {
        const Vector q = ho.x.row(r);
        const double e = ho.y[r] - evaluate(model, q);
        s += e * e;
      }
      scores(c, f) = s;
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "cross-validation fit failed at fold " << (f + 1) << ", candidate " << value << ": "
          << e.what();
      throw Error(msg.str());
    }
  });

  CvResult result;
  result.folds = k;
  result.seed = seed;
  for (const auto& fold : folds) result.fold_sizes.push_back(static_cast<int>(fold.size()));
  double best_score = kInf;
  for (int c = 0; c < m; ++c) {
    double s = 0.0;
    for (int f = 0; f < k; ++f) s += scores(c, f);  // fixed order for reproducibility
    s /= k;
    result.curve.emplace_back(grid.values[static_cast<std::size_t>(c)], s);
    if (s < best_score) {
      best_score = s;
      result.best = grid.values[static_cast<std::size_t>(c)];
    }
  }
  return result;
}

Vector reference_vector_ols(const Dataset& data, double ridge) {
  data.validate();
  const int n = data.n(), d = data.dim();
  Matrix design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = data.x;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < d + 1) {
    if (ridge <= 0.0)
      throw DataError(
          "design matrix with intercept is rank-deficient; rerun with a ridge fallback "
          "(e.g. ridge=1e-8)");
    const Matrix gram =
        design.transpose() * design + ridge * Matrix::Identity(d + 1, d + 1);
    const Vector coef = gram.ldlt().solve(design.transpose() * data.y);
    return coef.tail(d);
  }
  const Vector coef = qr.solve(data.y);
  return coef.tail(d);
}

std::pair<Vector, Vector> percentile_bounds(const Matrix& betas, double q) {
  if (betas.rows() < 1) throw ConfigError("percentile_bounds needs at least one row");
  if (!(q >= 0.0) || q >= 0.5) throw ConfigError("percentile_bounds requires 0 <= q < 0.5");
  const int d = static_cast<int>(betas.cols());
  Vector lo(d), hi(d);
  for (int k = 0; k < d; ++k) {
    std::vector<double> column(betas.col(k).data(), betas.col(k).data() + betas.rows());
    lo[k] = percentile(column, q);
    hi[k] = percentile(std::move(column), 1.0 - q);
  }
  return {lo, hi};
}

Grid default_grid(Variant variant, GridProfile profile, const Matrix* cr_betas, const Vector* b0) {
  auto spaced = [](double a, double b, int count) {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (count - 1);
    return v;
  };
  Grid grid;
  switch (variant) {
    case Variant::Cr:
      throw ConfigError("cr has no tuning parameter");
    case Variant::Pcr:
      grid.parameter = "lambda";
      grid.values = profile == GridProfile::Paper7 ? spaced(1.0, 500.0, 50) : spaced(0.1, 5.0, 50);
      break;
    case Variant::Lcr:
      grid.parameter = "L";
      grid.values = profile == GridProfile::Paper7 ? spaced(1.0, 500.0, 50) : spaced(0.1, 5.0, 50);
      break;
    case Variant::Alcr: {
      grid.parameter = "L0";
      if (profile == GridProfile::Paper7) {
        grid.values = spaced(1.0, 500.0, 50);
      } else {
        if (cr_betas == nullptr || b0 == nullptr)
          throw ConfigError("the L0 grid needs CR subgradients and b0");
        double lbar = 0.0;
        for (Eigen::Index i = 0; i < cr_betas->rows(); ++i)
          lbar = std::max(lbar, (cr_betas->row(i).transpose() - *b0).norm());
        if (lbar <= 0.0) lbar = 1.0;
        grid.values = spaced(0.0, lbar, 50);
      }
      break;
    }
    case Variant::Wrcr: {
      grid.parameter = "q";
      std::vector<double> v;
      for (int i = 1; i <= 49; ++i) v.push_back(i / 100.0);
      grid.values = std::move(v);
      break;
    }
  }
  return grid;
}

std::string cv_result_to_json(const CvResult& result, const Grid& grid) {
  nlohmann::json out;
  out["schema"] = "cvxreg-cv/1";
  out["parameter"] = grid.parameter;
  out["grid"] = grid.values;
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [value, score] : result.curve) scores.push_back(score);
  out["scores"] = std::move(scores);
  out["best"] = result.best;
  out["folds"] = result.folds;
  out["fold_sizes"] = result.fold_sizes;
  out["seed"] = result.seed;
  return out.dump(2);
}

}  // namespace cvxreg
