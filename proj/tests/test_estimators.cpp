#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvxreg/errors.hpp"
#include "cvxreg/estimators.hpp"
#include "cvxreg/rng.hpp"

using namespace cvxreg;

namespace {

Dataset make_data(std::initializer_list<double> xs, std::initializer_list<double> ys) {
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(xs.size()), 1);
  d.y.resize(static_cast<Eigen::Index>(ys.size()));
  int i = 0;
  for (double v : xs) d.x(i++, 0) = v;
  i = 0;
  for (double v : ys) d.y[i++] = v;
  return d;
}

Dataset sample_data(SplitMix64& rng, int n, int d) {
  Dataset data;
  data.x.resize(n, d);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) data.x(i, k) = 4.0 * rng.next_uniform() - 2.0;
    data.y[i] = 2.0 * rng.next_uniform() - 1.0;
  }
  return data;
}

Vector fitted_values(const PwlModel& m) {
  Vector f(m.size());
  for (int i = 0; i < m.size(); ++i) f[i] = m.pieces[static_cast<std::size_t>(i)].value;
  return f;
}

// Independent d=1 oracle: Euclidean projection of y onto the cone of convex
// sequences (nondecreasing secant slopes) by Dykstra's alternating
// projections over the adjacent-triple halfspaces.
Vector dykstra_convex_projection(const Dataset& data, int sweeps = 40000) {
  const int n = data.n();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return data.x(a, 0) < data.x(b, 0); });
  Vector f = data.y;
  if (n < 3) return f;
  Matrix rows = Matrix::Zero(n - 2, n);
  for (int t = 0; t + 2 < n; ++t) {
    const int a = order[static_cast<std::size_t>(t)];
    const int b = order[static_cast<std::size_t>(t + 1)];
    const int c = order[static_cast<std::size_t>(t + 2)];
    const double hl = data.x(b, 0) - data.x(a, 0);
    const double hr = data.x(c, 0) - data.x(b, 0);
    rows(t, a) = 1.0 / hl;
    rows(t, b) = -(1.0 / hl + 1.0 / hr);
    rows(t, c) = 1.0 / hr;
  }
  Matrix corrections = Matrix::Zero(n - 2, n);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int t = 0; t + 2 < n; ++t) {
      const Vector w = f + corrections.row(t).transpose();
      const double viol = rows.row(t).dot(w);
      Vector proj = w;
      if (viol < 0.0) proj -= (viol / rows.row(t).squaredNorm()) * rows.row(t).transpose();
      corrections.row(t) = (w - proj).transpose();
      f = proj;
    }
  }
  return f;
}

// Independent d=1 min-norm oracle: each beta_i is boxed between the steepest
// left secant and the shallowest right secant of the fitted values; the
// minimum-norm choice clamps zero into that interval.
Vector min_norm_oracle_1d(const Dataset& data, const Vector& fitted) {
  const int n = data.n();
  Vector beta(n);
  for (int i = 0; i < n; ++i) {
    double lo = -kInf, hi = kInf;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = data.x(j, 0) - data.x(i, 0);
      const double slope = (fitted[j] - fitted[i]) / dx;
      if (dx > 0.0) {
        hi = std::min(hi, slope);
      } else {
        lo = std::max(lo, slope);
      }
    }
    beta[i] = std::clamp(0.0, lo, hi);
  }
  return beta;
}

double beta_norm_sq(const Matrix& betas) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < betas.rows(); ++i) s += betas.row(i).squaredNorm();
  return s;
}

}  // namespace

TEST_CASE("build_problem shapes") {
  SUBCASE("n=2 d=1 cr") {
    auto data = make_data({0.0, 1.0}, {0.0, 1.0});
    auto prob = build_problem(data, EstimatorConfig::cr());
    CHECK(prob.num_vars == 4);
    CHECK(prob.inequalities.size() == 2);
    CHECK(prob.cones.empty());
    CHECK(!prob.bounds);
  }
  SUBCASE("n=3 d=2 alcr") {
    Dataset data;
    data.x.resize(3, 2);
    data.x << 0, 0, 1, 0, 0, 1;
    data.y.resize(3);
    data.y << 0, 1, 2;
    auto prob = build_problem(data, EstimatorConfig::alcr(Vector::Zero(2), 1.5));
    CHECK(prob.num_vars == 9);
    CHECK(prob.inequalities.size() == 6);
    CHECK(prob.cones.size() == 3);
  }
  SUBCASE("n=3 d=1 monotone wrcr boxes") {
    auto data = make_data({0.0, 1.0, 2.0}, {0.0, 1.0, 2.0});
    Vector lo(1), hi(1);
    lo << 0.5;
    hi << 2.0;
    auto prob = build_problem(data, EstimatorConfig::wrcr(lo, hi).with_monotone());
    REQUIRE(prob.bounds.has_value());
    for (int i = 3; i < 6; ++i) {
      CHECK(prob.bounds->lower[i] == doctest::Approx(0.5));  // monotone 0 dominated by l0
      CHECK(prob.bounds->upper[i] == doctest::Approx(2.0));
    }
    CHECK(prob.bounds->lower.head(3).minCoeff() == -kInf);
  }
}

TEST_CASE("cr interpolates affine data") {
  auto data = make_data({0.0, 1.0}, {0.0, 1.0});
  auto model = fit(data, EstimatorConfig::cr());
  CHECK(model.pieces[0].value == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(model.pieces[1].value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(model.fit_stats.sse <= 1e-12);
}

TEST_CASE("cr halfspace projection oracle") {
  // The single binding constraint in f-space is f1 - 2 f2 + f3 >= 0; the
  // oracle is the Euclidean projection of y onto that halfspace.
  auto data = make_data({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  Vector v(3);
  v << 1.0, -2.0, 1.0;
  const double t = v.dot(data.y) / v.squaredNorm();
  const Vector expected = data.y - t * v;  // (1/3, 1/3, 1/3)
  REQUIRE(expected[0] == doctest::Approx(1.0 / 3.0));

  auto model = fit(data, EstimatorConfig::cr());
  for (int i = 0; i < 3; ++i)
    CHECK(model.pieces[static_cast<std::size_t>(i)].value ==
          doctest::Approx(expected[i]).epsilon(1e-6));
  CHECK(model.fit_stats.sse == doctest::Approx(2.0 / 9.0).epsilon(1e-6));
  // Min-norm subgradients are all zero here; the evaluation at x=1 is 1/3.
  Vector q(1);
  q << 1.0;
  CHECK(evaluate(model, q) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("wrcr with pinned zero slopes fits the mean") {
  auto data = make_data({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 2.0, 4.0});
  auto model = fit(data, EstimatorConfig::wrcr(Vector::Zero(1), Vector::Zero(1)));
  const double ybar = data.y.mean();
  for (const auto& piece : model.pieces) {
    CHECK(piece.value == doctest::Approx(ybar).epsilon(1e-7));
    CHECK(piece.beta[0] == doctest::Approx(0.0));
  }
}

TEST_CASE("dykstra oracle agreement on small random problems") {
  SplitMix64 rng(314159);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 3 + static_cast<int>(rng.next_below(4));  // 3..6
    auto data = sample_data(rng, n, 1);
    auto model = fit(data, EstimatorConfig::cr());
    const Vector oracle = dykstra_convex_projection(data);
    CHECK((fitted_values(model) - oracle).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("min-norm subgradients match the interval oracle") {
  SUBCASE("kink example") {
    auto data = make_data({0.0, 1.0, 2.0}, {0.0, 0.0, 1.0});
    Vector fitted(3);
    fitted << 0.0, 0.0, 1.0;
    const Matrix betas = min_norm_subgradients(data, fitted);
    const Vector oracle = min_norm_oracle_1d(data, fitted);
    REQUIRE(oracle[0] == doctest::Approx(0.0));
    REQUIRE(oracle[1] == doctest::Approx(0.0));  // 0 lies inside [0, 1]
    REQUIRE(oracle[2] == doctest::Approx(1.0));
    for (int i = 0; i < 3; ++i) CHECK(betas(i, 0) == doctest::Approx(oracle[i]).epsilon(1e-6));
  }
  SUBCASE("exact parabola values") {
    auto data = make_data({0.0, 1.0, 2.0}, {0.0, 1.0, 4.0});
    Vector fitted(3);
    fitted << 0.0, 1.0, 4.0;
    const Matrix betas = min_norm_subgradients(data, fitted);
    const Vector oracle = min_norm_oracle_1d(data, fitted);  // (0, 1, 3)
    REQUIRE(oracle[1] == doctest::Approx(1.0));
    REQUIRE(oracle[2] == doctest::Approx(3.0));
    for (int i = 0; i < 3; ++i) CHECK(betas(i, 0) == doctest::Approx(oracle[i]).epsilon(1e-6));
  }
  SUBCASE("random fits") {
    SplitMix64 rng(8887);
    for (int rep = 0; rep < 8; ++rep) {
      auto data = sample_data(rng, 5 + static_cast<int>(rng.next_below(4)), 1);
      auto model = fit(data, EstimatorConfig::cr());
      const Vector fitted = fitted_values(model);
      const Matrix betas = min_norm_subgradients(data, fitted);
      const Vector oracle = min_norm_oracle_1d(data, fitted);
      // The implementation relaxes each row by 1e-7 * scale, which can move
      // an interval endpoint by that slack over the smallest anchor gap.
      double min_gap = kInf;
      for (int i = 0; i < data.n(); ++i)
        for (int j = 0; j < data.n(); ++j)
          if (i != j)
            min_gap = std::min(min_gap, std::abs(data.x(i, 0) - data.x(j, 0)));
      const double slack_bound =
          1e-7 * std::max(1.0, fitted.cwiseAbs().maxCoeff()) / min_gap + 1e-6;
      CHECK((betas.col(0) - oracle).cwiseAbs().maxCoeff() <= slack_bound);
    }
  }
}

TEST_CASE("min-norm rejects inconsistent fitted values") {
  auto data = make_data({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  Vector bad(3);
  bad << 0.0, 1.0, 0.0;  // concave kink, no valid subgradient at the middle
  CHECK_THROWS_AS(min_norm_subgradients(data, bad), ValidationError);
}

TEST_CASE("all-equal fitted values give zero subgradients") {
  SplitMix64 rng(4242);
  auto data = sample_data(rng, 6, 2);
  const Vector fitted = Vector::Constant(6, 1.25);
  const Matrix betas = min_norm_subgradients(data, fitted);
  CHECK(betas.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("minimum-norm never exceeds the primary solve's norm") {
  SplitMix64 rng(660);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_below(2));
    auto data = sample_data(rng, 6, d);
    const auto primary = fit(data, EstimatorConfig::cr().with_min_norm(false));
    const auto refined = min_norm_subgradients(data, fitted_values(primary));
    CHECK(beta_norm_sq(refined) <= beta_norm_sq(subgradient_matrix(primary)) + 1e-7);
  }
}

TEST_CASE("lcr delegates to the augmented program") {
  auto data = make_data({0.0, 1.0}, {0.0, 1.0});
  SUBCASE("large L reproduces cr") {
    auto lcr = lcr_fit(data, 1e6);
    auto cr = fit(data, EstimatorConfig::cr());
    CHECK((fitted_values(lcr) - fitted_values(cr)).cwiseAbs().maxCoeff() <= 1e-5);
  }
  SUBCASE("L = 0 forces the mean") {
    auto lcr = lcr_fit(data, 0.0);
    for (const auto& piece : lcr.pieces) CHECK(piece.value == doctest::Approx(0.5).epsilon(1e-7));
  }
  SUBCASE("L = 0.5 slope-capped closed form") {
    // Best affine fit with slope b <= 0.5: minimize c^2 + (1-c-b)^2 at b=0.5,
    // c=0.25, fitted values (0.25, 0.75).
    auto lcr = lcr_fit(data, 0.5);
    CHECK(lcr.pieces[0].value == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(lcr.pieces[1].value == doctest::Approx(0.75).epsilon(1e-6));
  }
}

TEST_CASE("identity reductions") {
  SplitMix64 rng(11);
  auto data = sample_data(rng, 12, 2);
  const auto cr = fit(data, EstimatorConfig::cr());
  const Vector f_cr = fitted_values(cr);

  SUBCASE("pcr lambda 0") {
    const auto pcr = fit(data, EstimatorConfig::pcr(0.0));
    CHECK((fitted_values(pcr) - f_cr).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("alcr with a slack ball") {
    double max_norm = 0.0;
    for (const auto& piece : cr.pieces) max_norm = std::max(max_norm, piece.beta.norm());
    const auto alcr = fit(data, EstimatorConfig::alcr(Vector::Zero(2), max_norm + 1.0));
    CHECK((fitted_values(alcr) - f_cr).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("wrcr with slack bounds") {
    Vector lo = Vector::Constant(2, kInf), hi = Vector::Constant(2, -kInf);
    for (const auto& piece : cr.pieces) {
      lo = lo.cwiseMin(piece.beta);
      hi = hi.cwiseMax(piece.beta);
    }
    const auto wrcr =
        fit(data, EstimatorConfig::wrcr(lo.array() - 1.0, hi.array() + 1.0));
    CHECK((fitted_values(wrcr) - f_cr).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("wrcr with pinned slope b") {
    Vector b(2);
    b << 0.4, -0.7;
    const auto pinned = fit(data, EstimatorConfig::wrcr(b, b));
    const double base = (data.y - data.x * b).mean();
    for (int i = 0; i < data.n(); ++i)
      CHECK(pinned.pieces[static_cast<std::size_t>(i)].value ==
            doctest::Approx(base + data.x.row(i).dot(b)).epsilon(1e-6));
  }
  SUBCASE("alcr with radius 0 pins the slope to b0") {
    Vector b0(2);
    b0 << 0.2, 0.1;
    const auto pinned = fit(data, EstimatorConfig::alcr(b0, 0.0));
    const double base = (data.y - data.x * b0).mean();
    for (int i = 0; i < data.n(); ++i)
      CHECK(pinned.pieces[static_cast<std::size_t>(i)].value ==
            doctest::Approx(base + data.x.row(i).dot(b0)).epsilon(1e-6));
  }
}

TEST_CASE("sse nesting across estimators") {
  SplitMix64 rng(321);
  auto data = sample_data(rng, 10, 2);
  const auto cr = fit(data, EstimatorConfig::cr());
  const auto lcr_tight = fit(data, EstimatorConfig::alcr(Vector::Zero(2), 0.3));
  const auto lcr_loose = fit(data, EstimatorConfig::alcr(Vector::Zero(2), 0.8));
  CHECK(cr.fit_stats.sse <= lcr_loose.fit_stats.sse + 1e-9);
  CHECK(lcr_loose.fit_stats.sse <= lcr_tight.fit_stats.sse + 1e-9);

  Vector half = Vector::Constant(2, 0.5);
  const auto narrow = fit(data, EstimatorConfig::wrcr(-0.3 * half, 0.3 * half));
  const auto wide = fit(data, EstimatorConfig::wrcr(-2.0 * half, 2.0 * half));
  CHECK(cr.fit_stats.sse <= wide.fit_stats.sse + 1e-9);
  CHECK(wide.fit_stats.sse <= narrow.fit_stats.sse + 1e-9);

  const auto mono = fit(data, EstimatorConfig::cr().with_monotone());
  CHECK(cr.fit_stats.sse <= mono.fit_stats.sse + 1e-9);
  for (const auto& piece : mono.pieces) CHECK(piece.beta.minCoeff() >= -kFeasTol);
}

TEST_CASE("duplicate anchors force equal fitted values") {
  Dataset data;
  data.x.resize(4, 1);
  data.x << 0.0, 1.0, 1.0, 2.0;
  data.y.resize(4);
  data.y << 0.0, 2.0, 0.0, 1.0;
  auto model = fit(data, EstimatorConfig::cr());
  CHECK(model.pieces[1].value == doctest::Approx(model.pieces[2].value).epsilon(1e-6));
}

TEST_CASE("lazy constraint generation matches dense fits") {
  SplitMix64 rng(777);
  auto data = sample_data(rng, 40, 2);
  FitOptions dense_opts;
  dense_opts.dense = true;
  FitOptions lazy_opts;
  lazy_opts.dense = false;
  for (const auto& config : {EstimatorConfig::cr().with_min_norm(false),
                             EstimatorConfig::pcr(0.5),
                             EstimatorConfig::alcr(Vector::Zero(2), 0.6)}) {
    const auto a = fit(data, config, dense_opts);
    const auto b = fit(data, config, lazy_opts);
    CHECK((fitted_values(a) - fitted_values(b)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("standardized fits agree with raw fits") {
  SplitMix64 rng(901);
  Dataset data = sample_data(rng, 14, 2);
  data.x.col(0) *= 300.0;  // poor natural scaling
  data.y = data.y.array() * 50.0 + 400.0;
  for (auto config : {EstimatorConfig::cr(), EstimatorConfig::pcr(0.2),
                      EstimatorConfig::alcr(Vector::Zero(2), 0.5)}) {
    const auto raw = fit(data, config);
    config.standardize = true;
    const auto scaled = fit(data, config);
    CHECK((fitted_values(raw) - fitted_values(scaled)).cwiseAbs().maxCoeff() <=
          1e-5 * 400.0);
  }
}

TEST_CASE("propagates solver diagnostics on failure") {
  auto data = make_data({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  FitOptions opts;
  opts.solver.max_iters = 1;  // cannot converge in one step
  CHECK_THROWS_AS(fit(data, EstimatorConfig::cr(), opts), SolverError);
}
