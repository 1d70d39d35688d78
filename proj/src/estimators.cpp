#include "cvxreg/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cvxreg/errors.hpp"

namespace cvxreg {

namespace {

LinearConstraint pairwise_row(const Dataset& data, int i, int j) {
  // f_i - f_j + beta_i'(x_j - x_i) <= 0
  const int n = data.n(), d = data.dim();
  LinearConstraint row;
  row.index.reserve(static_cast<std::size_t>(d) + 2);
  row.value.reserve(static_cast<std::size_t>(d) + 2);
  row.index.push_back(i);
  row.value.push_back(1.0);
  row.index.push_back(j);
  row.value.push_back(-1.0);
  for (int k = 0; k < d; ++k) {
    const double dx = data.x(j, k) - data.x(i, k);
    if (dx != 0.0) {
      row.index.push_back(n + i * d + k);
      row.value.push_back(dx);
    }
  }
  row.rhs = 0.0;
  return row;
}

// Everything except the pairwise rows.
QuadraticConicProgram build_base(const Dataset& data, const EstimatorConfig& config) {
  const int n = data.n(), d = data.dim();
  QuadraticConicProgram prob;
  prob.num_vars = n * (1 + d);
  prob.linear = Vector::Zero(prob.num_vars);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(prob.num_vars));
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(i, i, 2.0 / n);
    prob.linear[i] = -2.0 * data.y[i] / n;
  }
  if (config.variant == Variant::Pcr && config.lambda > 0.0) {
    for (int i = n; i < prob.num_vars; ++i)
      trips.emplace_back(i, i, 2.0 * config.lambda / n);
  }
  prob.quadratic.resize(prob.num_vars, prob.num_vars);
  prob.quadratic.setFromTriplets(trips.begin(), trips.end());

  const bool box_lower = config.monotone || config.variant == Variant::Wrcr;
  const bool box_upper = config.variant == Variant::Wrcr;
  if (box_lower || box_upper) {
    VariableBounds bounds{Vector::Constant(prob.num_vars, -kInf),
                          Vector::Constant(prob.num_vars, kInf)};
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) {
        const int v = n + i * d + k;
        double lo = config.monotone ? 0.0 : -kInf;
        double hi = kInf;
        if (config.variant == Variant::Wrcr) {
          lo = std::max(lo, config.lower[k]);
          hi = config.upper[k];
        }
        bounds.lower[v] = lo;
        bounds.upper[v] = hi;
      }
    }
    prob.bounds = std::move(bounds);
  }

  if (config.variant == Variant::Lcr || config.variant == Variant::Alcr) {
    const Vector center =
        config.variant == Variant::Lcr ? Vector(Vector::Zero(d)) : config.reference;
    for (int i = 0; i < n; ++i) {
      SocConstraint cone;
      for (int k = 0; k < d; ++k) cone.index.push_back(n + i * d + k);
      cone.center = center;
      cone.radius = config.radius;
      prob.cones.push_back(std::move(cone));
    }
  }

  prob.structure = BlockStructure{n, d};
  return prob;
}

// ----------------------------------------------------------------------------
// Optional input standardization. The transform is exact: the fitted model in
// raw units is identical to the unstandardized fit up to solver tolerance.
// Covariates are z-scored per coordinate for CR/WRCR (boxes transform
// coordinatewise) and by a single geometric-mean scale for PCR/LCR/ALCR so
// that the L2 penalty and Lipschitz balls stay L2 balls. Parameters always
// refer to raw units and are rescaled internally.
// ----------------------------------------------------------------------------

struct Standardizer {
  Vector x_shift, x_scale;
  double y_shift = 0.0, y_scale = 1.0;
  bool active = false;

  static Standardizer make(const Dataset& data, const EstimatorConfig& config) {
    Standardizer s;
    if (!config.standardize) return s;
    const int n = data.n(), d = data.dim();
    s.active = true;
    s.x_shift = data.x.colwise().mean();
    s.x_scale = Vector::Ones(d);
    for (int k = 0; k < d; ++k) {
      const double var =
          (data.x.col(k).array() - s.x_shift[k]).square().sum() / std::max(1, n - 1);
      s.x_scale[k] = std::sqrt(var);
      if (!(s.x_scale[k] > 0.0)) s.x_scale[k] = 1.0;
    }
    const bool needs_isotropic = config.variant == Variant::Pcr ||
                                 config.variant == Variant::Lcr ||
                                 config.variant == Variant::Alcr;
    if (needs_isotropic) {
      double log_sum = 0.0;
      for (int k = 0; k < d; ++k) log_sum += std::log(s.x_scale[k]);
      s.x_scale.setConstant(std::exp(log_sum / d));
    }
    s.y_shift = data.y.mean();
    const double yvar = (data.y.array() - s.y_shift).square().sum() / std::max(1, n - 1);
    s.y_scale = yvar > 0.0 ? std::sqrt(yvar) : 1.0;
    return s;
  }

  Dataset transform_data(const Dataset& data) const {
    if (!active) return data;
    Dataset out = data;
    for (int k = 0; k < data.dim(); ++k)
      out.x.col(k) = (data.x.col(k).array() - x_shift[k]) / x_scale[k];
    out.y = (data.y.array() - y_shift) / y_scale;
    return out;
  }

  // beta_scaled_k = beta_raw_k * x_scale_k / y_scale.
  EstimatorConfig transform_config(const EstimatorConfig& config) const {
    if (!active) return config;
    EstimatorConfig out = config;
    const double g = x_scale[0];  // isotropic variants share one scale
    switch (config.variant) {
      case Variant::Cr:
        break;
      case Variant::Pcr:
        out.lambda = config.lambda / (g * g);
        break;
      case Variant::Lcr:
        out.radius = config.radius * g / y_scale;
        break;
      case Variant::Alcr:
        out.reference = config.reference * g / y_scale;
        out.radius = config.radius * g / y_scale;
        break;
      case Variant::Wrcr:
        out.lower = (config.lower.array() * x_scale.array() / y_scale).matrix();
        out.upper = (config.upper.array() * x_scale.array() / y_scale).matrix();
        break;
    }
    return out;
  }

  double raw_value(double f_std) const { return active ? y_shift + y_scale * f_std : f_std; }

  Vector raw_beta(const Vector& beta_std) const {
    if (!active) return beta_std;
    return (beta_std.array() * y_scale / x_scale.array()).matrix();
  }
};

}  // namespace

QuadraticConicProgram build_problem(const Dataset& data, const EstimatorConfig& config) {
  data.validate();
  config.validate(data.dim());
  QuadraticConicProgram prob = build_base(data, config);
  const int n = data.n();
  prob.inequalities.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) prob.inequalities.push_back(pairwise_row(data, i, j));
  return prob;
}

PairwiseConvexitySource::PairwiseConvexitySource(const Dataset& data, int knn)
    : data_(data), knn_(knn) {}

std::vector<LinearConstraint> PairwiseConvexitySource::initial() const {
  const int n = data_.n(), d = data_.dim();
  std::vector<LinearConstraint> rows;
  if (n < 2) return rows;
  if (d == 1) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return data_.x(a, 0) < data_.x(b, 0); });
    for (int k = 0; k + 1 < n; ++k) {
      rows.push_back(pairwise_row(data_, order[k], order[k + 1]));
      rows.push_back(pairwise_row(data_, order[k + 1], order[k]));
    }
    return rows;
  }
  const int k_eff = std::min(knn_, n - 1);
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      dist[static_cast<std::size_t>(j)] = {
          j == i ? kInf : (data_.x.row(i) - data_.x.row(j)).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + k_eff, dist.end());
    for (int t = 0; t < k_eff; ++t) {
      const int j = dist[static_cast<std::size_t>(t)].second;
      rows.push_back(pairwise_row(data_, i, j));
      rows.push_back(pairwise_row(data_, j, i));
    }
  }
  return rows;
}

std::vector<LinearConstraint> PairwiseConvexitySource::violated(const Vector& z, double tol,
                                                                int max_rows) const {
  const int n = data_.n(), d = data_.dim();
  struct Cut {
    double violation;
    int i, j;
  };
  std::vector<Cut> cuts;
  for (int i = 0; i < n; ++i) {
    const auto beta = z.segment(n + i * d, d);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = z[i] - z[j];
      for (int k = 0; k < d; ++k) v += beta[k] * (data_.x(j, k) - data_.x(i, k));
      if (v > tol) cuts.push_back({v, i, j});
    }
  }
  if (static_cast<int>(cuts.size()) > max_rows) {
    std::nth_element(cuts.begin(), cuts.begin() + max_rows, cuts.end(),
                     [](const Cut& a, const Cut& b) { return a.violation > b.violation; });
    cuts.resize(static_cast<std::size_t>(max_rows));
  }
  std::sort(cuts.begin(), cuts.end(),
            [](const Cut& a, const Cut& b) { return a.violation > b.violation; });
  std::vector<LinearConstraint> rows;
  rows.reserve(cuts.size());
  for (const auto& c : cuts) rows.push_back(pairwise_row(data_, c.i, c.j));
  return rows;
}

PwlModel fit(const Dataset& data, const EstimatorConfig& config, const FitOptions& options) {
  data.validate();
  config.validate(data.dim());
  const Standardizer std_xf = Standardizer::make(data, config);
  const Dataset work = std_xf.transform_data(data);
  const EstimatorConfig work_config = std_xf.transform_config(config);

  const int n = work.n(), d = work.dim();
  const bool dense = options.dense.value_or(n <= options.dense_threshold);

  Solution sol;
  if (dense) {
    sol = solve(build_problem(work, work_config), options.solver);
  } else {
    QuadraticConicProgram base = build_base(work, work_config);
    PairwiseConvexitySource source(work, options.knn);
    ConstraintGenSettings cg;
    cg.solver = options.solver;
    cg.max_rounds = options.cg_max_rounds;
    cg.rows_per_round = options.cg_rows_per_round;
    sol = solve_with_constraint_generation(base, source, cg);
  }
  if (sol.status != SolveStatus::Optimal) {
    std::ostringstream msg;
    msg << "solver did not reach optimality: status=" << to_string(sol.status)
        << " kkt_residual=" << sol.kkt_residual << " iterations=" << sol.iterations;
    throw SolverError(msg.str());
  }

  const Vector fitted = sol.z.head(n);
  Matrix betas(n, d);
  for (int i = 0; i < n; ++i) betas.row(i) = sol.z.segment(n + i * d, d);
  if (config.min_norm_refinement)
    betas = min_norm_subgradients(work, fitted, &work_config, options.solver);

  PwlModel model;
  model.config = config;
  model.pieces.resize(static_cast<std::size_t>(n));
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    auto& piece = model.pieces[static_cast<std::size_t>(i)];
    piece.value = std_xf.raw_value(fitted[i]);
    piece.beta = std_xf.raw_beta(betas.row(i));
    piece.anchor = data.x.row(i);
    const double r = data.y[i] - piece.value;
    sse += r * r;
  }
  model.fit_stats.sse = sse / n;
  model.fit_stats.solver_status = sol.status;
  model.fit_stats.kkt_residual = sol.kkt_residual;
  model.validate();
  return model;
}

namespace {

// Active-set polish for one anchor's minimum-norm problem. The interior-point
// iterate sits O(sqrt(tol)) away from flat optima, so we reproject onto the
// face it identifies: the minimum-norm solution of the active rows taken as
// equalities. Accepted only when it stays feasible and does not increase the
// norm, which makes the step safe even if the face was misidentified.
Vector polish_min_norm(const Vector& beta, const std::vector<LinearConstraint>& rows,
                       double relax_slack) {
  const int d = static_cast<int>(beta.size());
  Vector best = beta;
  double best_norm = beta.squaredNorm();
  auto feasible = [&](const Vector& cand) {
    for (const auto& row : rows) {
      double az = 0.0;
      for (std::size_t j = 0; j < row.index.size(); ++j) az += row.value[j] * cand[row.index[j]];
      if (az > row.rhs + relax_slack + 1e-12 * std::max(1.0, std::abs(row.rhs))) return false;
    }
    return true;
  };
  auto consider = [&](const Vector& cand) {
    if (cand.squaredNorm() < best_norm && feasible(cand)) {
      best = cand;
      best_norm = cand.squaredNorm();
    }
  };
  consider(Vector::Zero(d));

  std::vector<std::pair<double, const LinearConstraint*>> near_active;
  for (const auto& row : rows) {
    double az = 0.0, anorm = 0.0;
    for (std::size_t j = 0; j < row.index.size(); ++j) {
      az += row.value[j] * beta[row.index[j]];
      anorm = std::max(anorm, std::abs(row.value[j]));
    }
    const double slack = (row.rhs - az) / std::max({1.0, std::abs(row.rhs), anorm});
    if (slack <= 1e-3) near_active.push_back({slack, &row});
  }
  std::sort(near_active.begin(), near_active.end());

  // Single-row candidates: the projection of the origin onto each nearly
  // binding hyperplane (exact for interval endpoints in d = 1).
  const std::size_t single_cap = std::min<std::size_t>(near_active.size(), 24);
  for (std::size_t r = 0; r < single_cap; ++r) {
    const auto& row = *near_active[r].second;
    double aa = 0.0;
    for (double v : row.value) aa += v * v;
    if (aa <= 0.0) continue;
    Vector cand = Vector::Zero(d);
    for (std::size_t j = 0; j < row.index.size(); ++j)
      cand[row.index[j]] = row.value[j] * row.rhs / aa;
    consider(cand);
  }

  // Joint candidates: the minimum-norm solution over every row within each
  // activity threshold, taken as equalities.
  for (double threshold : {1e-7, 1e-5, 1e-4, 1e-3}) {
    std::vector<const LinearConstraint*> active;
    for (const auto& [slack, row] : near_active)
      if (slack <= threshold) active.push_back(row);
    if (active.empty()) continue;
    Matrix a(static_cast<Eigen::Index>(active.size()), d);
    Vector b(static_cast<Eigen::Index>(active.size()));
    a.setZero();
    for (std::size_t r = 0; r < active.size(); ++r) {
      for (std::size_t j = 0; j < active[r]->index.size(); ++j)
        a(static_cast<Eigen::Index>(r), active[r]->index[j]) = active[r]->value[j];
      b[static_cast<Eigen::Index>(r)] = active[r]->rhs;
    }
    consider(a.completeOrthogonalDecomposition().solve(b));
  }
  return best;
}

}  // namespace

Matrix min_norm_subgradients(const Dataset& data, const Vector& fitted,
                             const EstimatorConfig* shape, const SolverSettings& settings) {
  data.validate();
  const int n = data.n(), d = data.dim();
  if (fitted.size() != n) throw DimensionError("min_norm_subgradients: fitted length != n");
  if (shape) shape->validate(d);

  const double scale = std::max(1.0, fitted.cwiseAbs().maxCoeff());
  Matrix betas = Matrix::Zero(n, d);

  // One dimension reduces to clamping zero into the interval between the
  // steepest left secant and the shallowest right secant (intersected with
  // the shape's own interval); solve it in closed form.
  if (d == 1) {
    for (int i = 0; i < n; ++i) {
      double relax = 1e-7 * scale;
      double lo = -kInf, hi = kInf;
      for (int attempt = 0; attempt < 2; ++attempt, relax *= 10.0) {
        lo = -kInf;
        hi = kInf;
        bool degenerate_infeasible = false;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double dx = data.x(j, 0) - data.x(i, 0);
          const double rhs = fitted[j] - fitted[i] + relax;
          if (dx == 0.0) {
            if (rhs < 0.0) degenerate_infeasible = true;
          } else if (dx > 0.0) {
            hi = std::min(hi, rhs / dx);
          } else {
            lo = std::max(lo, rhs / dx);
          }
        }
        if (shape) {
          if (shape->monotone) lo = std::max(lo, 0.0);
          if (shape->variant == Variant::Wrcr) {
            lo = std::max(lo, shape->lower[0]);
            hi = std::min(hi, shape->upper[0]);
          }
          if (shape->variant == Variant::Lcr || shape->variant == Variant::Alcr) {
            const double center = shape->variant == Variant::Lcr ? 0.0 : shape->reference[0];
            lo = std::max(lo, center - shape->radius);
            hi = std::min(hi, center + shape->radius);
          }
        }
        if (!degenerate_infeasible && lo <= hi) break;
        lo = 1.0;
        hi = 0.0;  // mark failure for the attempt check below
      }
      if (lo > hi) {
        std::ostringstream msg;
        msg << "fitted values are not pairwise-consistent within tolerance at anchor " << i;
        throw ValidationError(msg.str());
      }
      betas(i, 0) = std::clamp(0.0, lo, hi);
    }
    return betas;
  }

  for (int i = 0; i < n; ++i) {
    // The slack absorbs the primary solve's feasibility noise (so the ideal
    // face, e.g. beta = 0, stays reachable) while remaining within the model
    // feasibility tolerance. Escalation past it means the fitted values are
    // genuinely inconsistent.
    double relax = 1e-7 * scale;
    Solution sol;
    for (int attempt = 0; attempt < 2; ++attempt, relax *= 10.0) {
      QuadraticConicProgram prob;
      prob.num_vars = d;
      prob.linear = Vector::Zero(d);
      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < d; ++k) trips.emplace_back(k, k, 2.0);
      prob.quadratic.resize(d, d);
      prob.quadratic.setFromTriplets(trips.begin(), trips.end());
      bool degenerate_infeasible = false;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        LinearConstraint row;
        for (int k = 0; k < d; ++k) {
          const double dx = data.x(j, k) - data.x(i, k);
          if (dx != 0.0) {
            row.index.push_back(k);
            row.value.push_back(dx);
          }
        }
        row.rhs = fitted[j] - fitted[i] + relax;
        if (row.index.empty()) {
          if (row.rhs < 0.0) degenerate_infeasible = true;  // duplicate anchor, f_j < f_i
          continue;
        }
        prob.inequalities.push_back(std::move(row));
      }
      if (degenerate_infeasible) continue;
      if (shape) {
        if (shape->monotone || shape->variant == Variant::Wrcr) {
          VariableBounds bounds{Vector::Constant(d, -kInf), Vector::Constant(d, kInf)};
          for (int k = 0; k < d; ++k) {
            if (shape->monotone) bounds.lower[k] = 0.0;
            if (shape->variant == Variant::Wrcr) {
              bounds.lower[k] = std::max(bounds.lower[k], shape->lower[k]);
              bounds.upper[k] = shape->upper[k];
            }
          }
          prob.bounds = std::move(bounds);
        }
        if (shape->variant == Variant::Lcr || shape->variant == Variant::Alcr) {
          SocConstraint cone;
          for (int k = 0; k < d; ++k) cone.index.push_back(k);
          cone.center = shape->variant == Variant::Lcr ? Vector(Vector::Zero(d))
                                                       : shape->reference;
          cone.radius = shape->radius;
          prob.cones.push_back(std::move(cone));
        }
      }
      // The decoupled problems are tiny; solve them tighter than the main
      // program so the refined subgradients carry full precision.
      SolverSettings tight = settings;
      tight.tol_kkt = std::min(settings.tol_kkt, 1e-10);
      sol = solve(prob, tight);
      if (sol.status != SolveStatus::Optimal) sol = solve(prob, settings);
      if (sol.status == SolveStatus::Optimal) break;
      // Heavily redundant rows can stall the dual without hurting the
      // primal; a feasible iterate is still usable (the polish below only
      // ever improves it).
      if (sol.z.size() == d && sol.z.allFinite()) {
        bool feasible = true;
        for (const auto& row : prob.inequalities) {
          double az = 0.0;
          for (std::size_t j = 0; j < row.index.size(); ++j) az += row.value[j] * sol.z[row.index[j]];
          if (az > row.rhs + 1e-9 * std::max(1.0, std::abs(row.rhs))) {
            feasible = false;
            break;
          }
        }
        for (const auto& cone : prob.cones) {
          Vector dev(cone.center.size());
          for (std::size_t j = 0; j < cone.index.size(); ++j)
            dev[static_cast<Eigen::Index>(j)] =
                sol.z[cone.index[j]] - cone.center[static_cast<Eigen::Index>(j)];
          if (dev.norm() > cone.radius + 1e-9 * std::max(1.0, cone.radius)) feasible = false;
        }
        if (prob.bounds) {
          for (int k = 0; k < d; ++k)
            if (sol.z[k] < prob.bounds->lower[k] - 1e-12 ||
                sol.z[k] > prob.bounds->upper[k] + 1e-12)
              feasible = false;
        }
        if (feasible) {
          sol.status = SolveStatus::Optimal;
          break;
        }
      }
    }
    if (sol.status != SolveStatus::Optimal) {
      std::ostringstream msg;
      msg << "fitted values are not pairwise-consistent within tolerance at anchor " << i
          << " (subgradient problem status " << to_string(sol.status) << ")";
      throw ValidationError(msg.str());
    }
    Vector beta = sol.z;
    bool cone_active = false;
    if (shape && (shape->variant == Variant::Lcr || shape->variant == Variant::Alcr)) {
      const Vector center =
          shape->variant == Variant::Lcr ? Vector(Vector::Zero(d)) : shape->reference;
      cone_active =
          shape->radius - (beta - center).norm() <= 1e-5 * std::max(1.0, shape->radius);
    }
    if (!cone_active) {
      // Rebuild the row list (pairwise rows plus shape boxes) for the polish.
      std::vector<LinearConstraint> rows;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        LinearConstraint row;
        for (int k = 0; k < d; ++k) {
          const double dx = data.x(j, k) - data.x(i, k);
          if (dx != 0.0) {
            row.index.push_back(k);
            row.value.push_back(dx);
          }
        }
        if (row.index.empty()) continue;
        row.rhs = fitted[j] - fitted[i] + relax;
        rows.push_back(std::move(row));
      }
      if (shape && (shape->monotone || shape->variant == Variant::Wrcr)) {
        for (int k = 0; k < d; ++k) {
          double lo = shape->monotone ? 0.0 : -kInf;
          double hi = kInf;
          if (shape->variant == Variant::Wrcr) {
            lo = std::max(lo, shape->lower[k]);
            hi = shape->upper[k];
          }
          if (std::isfinite(lo)) rows.push_back({{k}, {-1.0}, -lo});
          if (std::isfinite(hi)) rows.push_back({{k}, {1.0}, hi});
        }
      }
      beta = polish_min_norm(beta, rows, 0.0);
    }
    betas.row(i) = beta;
  }
  return betas;
}

PwlModel lcr_fit(const Dataset& data, double L, const FitOptions& options) {
  if (!(L >= 0.0) || !std::isfinite(L)) throw ConfigError("lcr_fit requires L >= 0");
  return fit(data, EstimatorConfig::alcr(Vector::Zero(data.dim()), L), options);
}

}  // namespace cvxreg
