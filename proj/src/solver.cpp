#include "cvxreg/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <unordered_set>

#include "cvxreg/errors.hpp"

namespace cvxreg {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::NumericalFailure: return "numerical_failure";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

void QuadraticConicProgram::validate() const {
  if (num_vars <= 0) throw ValidationError("program has no variables");
  if (linear.size() != num_vars) throw ValidationError("q length does not match num_vars");
  if (quadratic.rows() != num_vars || quadratic.cols() != num_vars)
    throw ValidationError("P shape does not match num_vars");
  SparseMatrix diff = SparseMatrix(quadratic.transpose()) - quadratic;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
      if (std::abs(it.value()) > 1e-12) throw ValidationError("P is not symmetric within 1e-12");
  for (const auto& row : inequalities) {
    if (row.index.size() != row.value.size())
      throw ValidationError("inequality row index/value size mismatch");
    for (int j : row.index)
      if (j < 0 || j >= num_vars) throw ValidationError("inequality row index out of range");
    if (!std::isfinite(row.rhs)) throw ValidationError("inequality rhs not finite");
  }
  if (bounds) {
    if (bounds->lower.size() != num_vars || bounds->upper.size() != num_vars)
      throw ValidationError("bounds length does not match num_vars");
    for (int i = 0; i < num_vars; ++i) {
      const double lo = bounds->lower[i], hi = bounds->upper[i];
      if (std::isnan(lo) || std::isnan(hi)) throw ValidationError("bounds contain NaN");
      if (std::isfinite(lo) && std::isfinite(hi) && lo > hi)
        throw ValidationError("bounds have lower > upper");
    }
  }
  for (const auto& cone : cones) {
    if (cone.radius < 0.0 || !std::isfinite(cone.radius))
      throw ValidationError("cone radius must be finite and >= 0");
    if (static_cast<int>(cone.index.size()) != cone.center.size())
      throw ValidationError("cone index/center size mismatch");
    if (cone.index.empty()) throw ValidationError("cone has no members");
    for (int j : cone.index)
      if (j < 0 || j >= num_vars) throw ValidationError("cone index out of range");
  }
}

namespace {

constexpr double kStepBack = 0.99;

void try_polish(const QuadraticConicProgram& prob, const SolverSettings& settings,
                Solution& sol);

// ---------------------------------------------------------------------------
// Presolve: pin variables with lower == upper or inside radius-0 cones, fold
// them out of the program, and report syntactic infeasibility.
// ---------------------------------------------------------------------------

struct Presolved {
  bool infeasible = false;
  std::vector<int> old_to_new;   // -1 for fixed
  std::vector<int> new_to_old;
  Vector fixed_value;            // full length, meaningful where fixed
  std::vector<bool> is_fixed;

  int nz = 0;                    // free variable count
  SparseMatrix P;
  Vector q;
  double objective_const = 0.0;  // from substituting fixed variables

  struct Row {
    std::vector<int> idx;        // free-variable indices (reduced)
    std::vector<double> val;
    double rhs;
    int origin;                  // index into problem.inequalities, or -1
  };
  std::vector<Row> rows;

  Vector lower, upper;           // reduced bounds (may be +-inf)

  struct Cone {
    std::vector<int> idx;        // reduced indices
    Vector center;
    double radius;
    int origin;                  // index into problem.cones
    std::vector<int> member_pos; // position of each kept member in the original cone
  };
  std::vector<Cone> soc;

  BlockStructure structure;
};

Presolved presolve(const QuadraticConicProgram& prob) {
  const int nv = prob.num_vars;
  Presolved out;
  out.is_fixed.assign(nv, false);
  out.fixed_value = Vector::Zero(nv);

  Vector lo = prob.bounds ? prob.bounds->lower : Vector::Constant(nv, -kInf);
  Vector hi = prob.bounds ? prob.bounds->upper : Vector::Constant(nv, kInf);

  auto pin = [&](int v, double value) -> bool {
    if (out.is_fixed[v]) return std::abs(out.fixed_value[v] - value) <= 1e-12 * std::max(1.0, std::abs(value));
    if (value < lo[v] - 1e-12 * std::max(1.0, std::abs(value))) return false;
    if (value > hi[v] + 1e-12 * std::max(1.0, std::abs(value))) return false;
    out.is_fixed[v] = true;
    out.fixed_value[v] = value;
    return true;
  };

  for (int v = 0; v < nv; ++v) {
    if (std::isfinite(lo[v]) && std::isfinite(hi[v])) {
      if (lo[v] > hi[v]) {
        out.infeasible = true;
        return out;
      }
      if (lo[v] == hi[v] && !pin(v, lo[v])) {
        out.infeasible = true;
        return out;
      }
    }
  }

  // Radius-0 cones pin their members; folding fixed members shrinks the
  // radius, which can cascade.
  std::vector<double> radius(prob.cones.size());
  for (std::size_t c = 0; c < prob.cones.size(); ++c) radius[c] = prob.cones[c].radius;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t c = 0; c < prob.cones.size(); ++c) {
      const auto& cone = prob.cones[c];
      double fixed_sq = 0.0;
      bool all_fixed = true;
      for (std::size_t k = 0; k < cone.index.size(); ++k) {
        const int v = cone.index[k];
        if (out.is_fixed[v]) {
          const double dv = out.fixed_value[v] - cone.center[k];
          fixed_sq += dv * dv;
        } else {
          all_fixed = false;
        }
      }
      const double scale = std::max(1.0, cone.radius * cone.radius);
      if (fixed_sq > cone.radius * cone.radius + 1e-9 * scale) {
        out.infeasible = true;
        return out;
      }
      const double rem_sq = std::max(0.0, cone.radius * cone.radius - fixed_sq);
      radius[c] = std::sqrt(rem_sq);
      if (!all_fixed && radius[c] == 0.0) {
        for (std::size_t k = 0; k < cone.index.size(); ++k) {
          const int v = cone.index[k];
          if (!out.is_fixed[v]) {
            if (!pin(v, cone.center[k])) {
              out.infeasible = true;
              return out;
            }
            changed = true;
          }
        }
      }
    }
  }

  out.old_to_new.assign(nv, -1);
  for (int v = 0; v < nv; ++v) {
    if (!out.is_fixed[v]) {
      out.old_to_new[v] = out.nz++;
      out.new_to_old.push_back(v);
    }
  }

  // Reduced objective: 0.5 zf' Pff zf + (qf + Pfx vx)' zf + const.
  out.q = Vector::Zero(out.nz);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < prob.quadratic.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(prob.quadratic, k); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      const bool rf = out.is_fixed[r], cf = out.is_fixed[c];
      if (!rf && !cf) {
        trips.emplace_back(out.old_to_new[r], out.old_to_new[c], it.value());
      } else if (!rf && cf) {
        out.q[out.old_to_new[r]] += it.value() * out.fixed_value[c];
      } else if (rf && cf) {
        out.objective_const += 0.5 * it.value() * out.fixed_value[r] * out.fixed_value[c];
      }
      // rf && !cf is the mirror of !rf && cf and is handled by symmetry of P.
    }
  }
  out.P.resize(out.nz, out.nz);
  out.P.setFromTriplets(trips.begin(), trips.end());
  for (int v = 0; v < nv; ++v) {
    if (out.is_fixed[v]) {
      out.objective_const += prob.linear[v] * out.fixed_value[v];
    } else {
      out.q[out.old_to_new[v]] += prob.linear[v];
    }
  }

  for (std::size_t k = 0; k < prob.inequalities.size(); ++k) {
    const auto& row = prob.inequalities[k];
    Presolved::Row r;
    r.origin = static_cast<int>(k);
    r.rhs = row.rhs;
    double scale = std::max(1.0, std::abs(row.rhs));
    for (std::size_t j = 0; j < row.index.size(); ++j) {
      const int v = row.index[j];
      const double a = row.value[j];
      if (a == 0.0) continue;
      scale = std::max(scale, std::abs(a));
      if (out.is_fixed[v]) {
        r.rhs -= a * out.fixed_value[v];
      } else {
        r.idx.push_back(out.old_to_new[v]);
        r.val.push_back(a);
      }
    }
    if (r.idx.empty()) {
      if (r.rhs < -1e-9 * scale) {
        out.infeasible = true;
        return out;
      }
      continue;
    }
    out.rows.push_back(std::move(r));
  }

  out.lower = Vector::Constant(out.nz, -kInf);
  out.upper = Vector::Constant(out.nz, kInf);
  for (int v = 0; v < nv; ++v) {
    if (out.is_fixed[v]) continue;
    out.lower[out.old_to_new[v]] = lo[v];
    out.upper[out.old_to_new[v]] = hi[v];
  }

  for (std::size_t c = 0; c < prob.cones.size(); ++c) {
    const auto& cone = prob.cones[c];
    Presolved::Cone pc;
    pc.origin = static_cast<int>(c);
    pc.radius = radius[c];
    for (std::size_t k = 0; k < cone.index.size(); ++k) {
      const int v = cone.index[k];
      if (out.is_fixed[v]) continue;
      pc.idx.push_back(out.old_to_new[v]);
      pc.center.conservativeResize(pc.center.size() + 1);
      pc.center[pc.center.size() - 1] = cone.center[k];
      pc.member_pos.push_back(static_cast<int>(k));
    }
    if (pc.idx.empty()) continue;  // fully fixed and already checked
    out.soc.push_back(std::move(pc));
  }

  // Remap the elimination hint; drop it if any head/tail variable was fixed
  // (fits never pin f-variables, so this only triggers in degenerate cases).
  if (prob.structure.enabled()) {
    bool intact = true;
    for (int v = 0; v < nv && intact; ++v)
      if (out.is_fixed[v] && v < prob.structure.head) intact = false;
    if (intact && out.nz > prob.structure.head) {
      const int tail = out.nz - prob.structure.head;
      if (tail % prob.structure.block == 0) {
        // Tail blocks must survive whole: each original block either fully
        // free or fully fixed, and blocks remain contiguous after reindexing.
        bool blocks_ok = true;
        const int bs = prob.structure.block;
        for (int v = prob.structure.head; v + bs <= nv && blocks_ok; v += bs) {
          bool f0 = out.is_fixed[v];
          for (int j = 1; j < bs; ++j)
            if (out.is_fixed[v + j] != f0) blocks_ok = false;
        }
        if (blocks_ok) out.structure = BlockStructure{prob.structure.head, bs};
      }
    } else if (intact && out.nz == prob.structure.head) {
      out.structure = BlockStructure{};  // everything dense, no tail left
    }
  }

  return out;
}

// ---------------------------------------------------------------------------
// Standard conic form: G z + s = h, s in (R+)^l x SOC^{p_1} x ... The first
// l slacks come from inequality rows and finite bounds, then one block per
// second-order cone.
// ---------------------------------------------------------------------------

struct StdRow {
  std::vector<int> idx;
  std::vector<double> val;
};

enum class RowKind { Inequality, LowerBound, UpperBound };

struct StdForm {
  int nz = 0;
  int l = 0;  // orthant rows
  std::vector<StdRow> rows;
  Vector h;

  struct Soc {
    int offset = 0;        // position of the block in s
    int p = 0;             // block size (1 + members)
    std::vector<int> vars; // member variables
  };
  std::vector<Soc> socs;
  int m = 0;

  std::vector<RowKind> row_kind;  // per orthant row
  std::vector<int> row_ref;       // inequality origin or variable index
};

StdForm build_standard_form(const Presolved& pre) {
  StdForm sf;
  sf.nz = pre.nz;
  std::vector<double> hvals;
  for (std::size_t k = 0; k < pre.rows.size(); ++k) {
    StdRow row{pre.rows[k].idx, pre.rows[k].val};
    sf.rows.push_back(std::move(row));
    hvals.push_back(pre.rows[k].rhs);
    sf.row_kind.push_back(RowKind::Inequality);
    sf.row_ref.push_back(pre.rows[k].origin);
  }
  for (int v = 0; v < pre.nz; ++v) {
    if (std::isfinite(pre.lower[v])) {
      sf.rows.push_back(StdRow{{v}, {-1.0}});
      hvals.push_back(-pre.lower[v]);
      sf.row_kind.push_back(RowKind::LowerBound);
      sf.row_ref.push_back(v);
    }
    if (std::isfinite(pre.upper[v])) {
      sf.rows.push_back(StdRow{{v}, {1.0}});
      hvals.push_back(pre.upper[v]);
      sf.row_kind.push_back(RowKind::UpperBound);
      sf.row_ref.push_back(v);
    }
  }
  sf.l = static_cast<int>(sf.rows.size());
  int offset = sf.l;
  for (const auto& cone : pre.soc) {
    StdForm::Soc blk;
    blk.offset = offset;
    blk.p = 1 + static_cast<int>(cone.idx.size());
    blk.vars = cone.idx;
    hvals.push_back(cone.radius);
    for (int k = 0; k < cone.center.size(); ++k) hvals.push_back(-cone.center[k]);
    offset += blk.p;
    sf.socs.push_back(std::move(blk));
  }
  sf.m = offset;
  sf.h.resize(static_cast<Eigen::Index>(hvals.size()));
  for (std::size_t k = 0; k < hvals.size(); ++k) sf.h[static_cast<Eigen::Index>(k)] = hvals[k];
  return sf;
}

// out = G x.
void g_mul(const StdForm& sf, const Vector& x, Vector& out) {
  for (int k = 0; k < sf.l; ++k) {
    double acc = 0.0;
    const auto& row = sf.rows[k];
    for (std::size_t j = 0; j < row.idx.size(); ++j) acc += row.val[j] * x[row.idx[j]];
    out[k] = acc;
  }
  for (const auto& blk : sf.socs) {
    out[blk.offset] = 0.0;
    for (int k = 0; k + 1 < blk.p; ++k) out[blk.offset + 1 + k] = -x[blk.vars[k]];
  }
}

// s = h - G z given z; out must be sized m.
void residual_slack(const StdForm& sf, const Vector& z, Vector& out) {
  g_mul(sf, z, out);
  out = sf.h - out;
}

// out += G' y.
void add_gt_mul(const StdForm& sf, const Vector& y, Vector& out) {
  for (int k = 0; k < sf.l; ++k) {
    const auto& row = sf.rows[k];
    for (std::size_t j = 0; j < row.idx.size(); ++j) out[row.idx[j]] += row.val[j] * y[k];
  }
  for (const auto& blk : sf.socs)
    for (int k = 0; k + 1 < blk.p; ++k) out[blk.vars[k]] -= y[blk.offset + 1 + k];
}

// ---------------------------------------------------------------------------
// Cone algebra on the stacked slack layout.
// ---------------------------------------------------------------------------

double cone_margin(const StdForm& sf, const Vector& x) {
  double margin = kInf;
  for (int k = 0; k < sf.l; ++k) margin = std::min(margin, x[k]);
  for (const auto& blk : sf.socs) {
    const double tail = x.segment(blk.offset + 1, blk.p - 1).norm();
    margin = std::min(margin, x[blk.offset] - tail);
  }
  return margin;
}

void add_identity(const StdForm& sf, double t, Vector& x) {
  for (int k = 0; k < sf.l; ++k) x[k] += t;
  for (const auto& blk : sf.socs) x[blk.offset] += t;
}

// Largest step a with x + a*dx staying in the cone (capped at kInf).
double max_step(const StdForm& sf, const Vector& x, const Vector& dx) {
  double step = kInf;
  for (int k = 0; k < sf.l; ++k) {
    if (dx[k] < 0.0) step = std::min(step, -x[k] / dx[k]);
  }
  for (const auto& blk : sf.socs) {
    const auto xt = x.segment(blk.offset + 1, blk.p - 1);
    const auto dt = dx.segment(blk.offset + 1, blk.p - 1);
    const double c2 = dx[blk.offset] * dx[blk.offset] - dt.squaredNorm();
    const double c1 = x[blk.offset] * dx[blk.offset] - xt.dot(dt);
    const double c0 = x[blk.offset] * x[blk.offset] - xt.squaredNorm();
    if (c0 <= 0.0) return 0.0;  // already on/outside the boundary
    const double disc = c1 * c1 - c2 * c0;
    if (disc < 0.0) continue;
    const double denom = -c1 + std::sqrt(disc);
    if (denom <= 0.0) continue;
    step = std::min(step, c0 / denom);
  }
  return step;
}

struct Scaling {
  Vector d;       // orthant weights zeta_i / s_i, i.e. (W^T W)^{-1}
  Vector lambda;  // scaled point W zeta = W^{-1} s
  struct Soc {
    double eta = 1.0;
    Vector wbar;   // scaling point, wbar' J wbar = 1
    Vector v;      // wbar^{1/2}, for W and W^{-1} as operators
    Matrix winv2;  // (W^T W)^{-1} as a dense p x p block
  };
  std::vector<Soc> socs;
};

bool compute_scaling(const StdForm& sf, const Vector& s, const Vector& zeta, Scaling& sc) {
  sc.d.resize(sf.l);
  sc.lambda.resize(sf.m);
  for (int k = 0; k < sf.l; ++k) {
    if (s[k] <= 0.0 || zeta[k] <= 0.0) return false;
    sc.d[k] = zeta[k] / s[k];
    sc.lambda[k] = std::sqrt(s[k] * zeta[k]);
  }
  sc.socs.resize(sf.socs.size());
  for (std::size_t b = 0; b < sf.socs.size(); ++b) {
    const auto& blk = sf.socs[b];
    auto& out = sc.socs[b];
    const auto sb = s.segment(blk.offset, blk.p);
    const auto zb = zeta.segment(blk.offset, blk.p);
    const double sdet = sb[0] * sb[0] - sb.tail(blk.p - 1).squaredNorm();
    const double zdet = zb[0] * zb[0] - zb.tail(blk.p - 1).squaredNorm();
    if (sdet <= 0.0 || zdet <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0) return false;
    const double a = std::sqrt(sdet), c = std::sqrt(zdet);
    out.eta = std::sqrt(a / c);
    const double gamma = std::sqrt((1.0 + sb.dot(zb) / (a * c)) / 2.0);
    out.wbar = sb / a;
    out.wbar[0] += zb[0] / c;
    out.wbar.tail(blk.p - 1) -= zb.tail(blk.p - 1) / c;
    out.wbar /= 2.0 * gamma;
    out.v = out.wbar;
    out.v[0] += 1.0;
    out.v /= std::sqrt(2.0 * (out.wbar[0] + 1.0));
    // (W^T W)^{-1} = eta^{-2} (2 (J wbar)(J wbar)' - J).
    Vector jw = out.wbar;
    jw.tail(blk.p - 1) *= -1.0;
    out.winv2 = 2.0 * jw * jw.transpose();
    out.winv2(0, 0) -= 1.0;
    for (int i = 1; i < blk.p; ++i) out.winv2(i, i) += 1.0;
    out.winv2 /= out.eta * out.eta;
    // lambda = W zeta = eta (2 v (v' zeta) - J zeta).
    Vector lam = 2.0 * out.v.dot(zb) * out.v;
    lam[0] -= zb[0];
    lam.tail(blk.p - 1) += zb.tail(blk.p - 1);
    sc.lambda.segment(blk.offset, blk.p) = out.eta * lam;
  }
  return true;
}

// y = W^{-1} x on one SOC block.
Vector soc_winv_apply(const Scaling::Soc& sc, const Eigen::Ref<const Vector>& x) {
  Vector jv = sc.v;
  jv.tail(jv.size() - 1) *= -1.0;
  Vector y = 2.0 * jv.dot(x) * jv;
  y[0] -= x[0];
  y.tail(y.size() - 1) += x.tail(x.size() - 1);
  return y / sc.eta;
}

// y = W x on one SOC block.
Vector soc_w_apply(const Scaling::Soc& sc, const Eigen::Ref<const Vector>& x) {
  Vector y = 2.0 * sc.v.dot(x) * sc.v;
  y[0] -= x[0];
  y.tail(y.size() - 1) += x.tail(x.size() - 1);
  return sc.eta * y;
}

// Jordan product u o x per block.
void jordan_product(const StdForm& sf, const Vector& u, const Vector& x, Vector& out) {
  for (int k = 0; k < sf.l; ++k) out[k] = u[k] * x[k];
  for (const auto& blk : sf.socs) {
    const auto ub = u.segment(blk.offset, blk.p);
    const auto xb = x.segment(blk.offset, blk.p);
    out[blk.offset] = ub.dot(xb);
    out.segment(blk.offset + 1, blk.p - 1) =
        ub[0] * xb.tail(blk.p - 1) + xb[0] * ub.tail(blk.p - 1);
  }
}

// Solve lambda o x = c per block.
bool jordan_solve(const StdForm& sf, const Vector& lambda, const Vector& c, Vector& out) {
  for (int k = 0; k < sf.l; ++k) {
    if (lambda[k] == 0.0) return false;
    out[k] = c[k] / lambda[k];
  }
  for (const auto& blk : sf.socs) {
    const auto lb = lambda.segment(blk.offset, blk.p);
    const auto cb = c.segment(blk.offset, blk.p);
    const double det = lb[0] * lb[0] - lb.tail(blk.p - 1).squaredNorm();
    if (det <= 0.0 || lb[0] <= 0.0) return false;
    const double x0 = (lb[0] * cb[0] - lb.tail(blk.p - 1).dot(cb.tail(blk.p - 1))) / det;
    out[blk.offset] = x0;
    out.segment(blk.offset + 1, blk.p - 1) =
        (cb.tail(blk.p - 1) - x0 * lb.tail(blk.p - 1)) / lb[0];
  }
  return true;
}

// ---------------------------------------------------------------------------
// KKT solver: M = P + reg I + G' (W^T W)^{-1} G, factored either densely or
// through the block-arrow elimination when the structure hint applies.
// ---------------------------------------------------------------------------

class KktSolver {
 public:
  KktSolver(const Presolved& pre, const StdForm& sf) : pre_(pre), sf_(sf) {
    head_ = sf.nz;
    block_ = 0;
    nblocks_ = 0;
    if (pre.structure.enabled() && structure_applies(pre.structure)) {
      head_ = pre.structure.head;
      block_ = pre.structure.block;
      nblocks_ = (sf.nz - head_) / block_;
    }
    tail_ = sf.nz - head_;
    A_.resize(head_, head_);
    if (tail_ > 0) {
      C_.resize(head_, tail_);
      blocks_.assign(static_cast<std::size_t>(nblocks_), Matrix(block_, block_));
      block_llt_.resize(static_cast<std::size_t>(nblocks_));
    }
  }

  int head() const { return head_; }

  bool factor(const Scaling& sc, double reg) {
    A_.setZero();
    if (tail_ > 0) {
      C_.setZero();
      for (auto& b : blocks_) b.setZero();
    }
    add_diag(reg);
    add_quadratic();
    for (int k = 0; k < sf_.l; ++k) add_row(sf_.rows[k], sc.d[k]);
    for (std::size_t b = 0; b < sf_.socs.size(); ++b) add_soc(sf_.socs[b], sc.socs[b].winv2);

    schur_ = A_;
    for (int b = 0; b < nblocks_; ++b) {
      block_llt_[b].compute(blocks_[b]);
      if (block_llt_[b].info() != Eigen::Success) return false;
      const auto Cb = C_.middleCols(b * block_, block_);
      scratch_ = block_llt_[b].solve(Cb.transpose());
      schur_.noalias() -= Cb * scratch_;
    }
    schur_llt_.compute(schur_);
    if (schur_llt_.info() != Eigen::Success) return false;
    return schur_.allFinite();
  }

  // Solves M x = r with iterative refinement.
  Vector solve(const Vector& r) const {
    Vector x = solve_once(r);
    const double rscale = std::max(1.0, r.cwiseAbs().maxCoeff());
    for (int pass = 0; pass < 2; ++pass) {
      Vector resid = r;
      apply_sub(x, resid);
      if (resid.cwiseAbs().maxCoeff() <= 1e-14 * rscale) break;
      x += solve_once(resid);
    }
    return x;
  }

 private:
  bool structure_applies(const BlockStructure& hint) const {
    if ((sf_.nz - hint.head) % hint.block != 0) return false;
    auto block_of = [&](int v) { return v < hint.head ? -1 : (v - hint.head) / hint.block; };
    for (const auto& row : sf_.rows) {
      int blk = -1;
      for (int v : row.idx) {
        const int b = block_of(v);
        if (b < 0) continue;
        if (blk >= 0 && b != blk) return false;
        blk = b;
      }
    }
    for (const auto& soc : sf_.socs) {
      int blk = -2;
      for (int v : soc.vars) {
        const int b = block_of(v);
        if (blk == -2) blk = b;
        if (b != blk) return false;
      }
    }
    for (int k = 0; k < pre_.P.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(pre_.P, k); it; ++it) {
        const int br = block_of(static_cast<int>(it.row()));
        const int bc = block_of(static_cast<int>(it.col()));
        if (br >= 0 && bc >= 0 && br != bc) return false;
      }
    }
    return true;
  }

  // Accumulators receive every symmetric (r, c) pair, so the head-tail
  // coupling is recorded from the head side only.
  void entry(int r, int c, double w) {
    const bool rh = r < head_, ch = c < head_;
    if (rh && ch) {
      A_(r, c) += w;
    } else if (rh && !ch) {
      C_(r, c - head_) += w;
    } else if (!rh && !ch) {
      const int br = (r - head_) / block_;
      blocks_[br]((r - head_) % block_, (c - head_) % block_) += w;
    }
  }

  void add_diag(double reg) {
    for (int v = 0; v < sf_.nz; ++v) entry(v, v, reg);
  }

  void add_quadratic() {
    for (int k = 0; k < pre_.P.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(pre_.P, k); it; ++it)
        entry(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }

  void add_row(const StdRow& row, double w) {
    const std::size_t nn = row.idx.size();
    for (std::size_t a = 0; a < nn; ++a)
      for (std::size_t b = 0; b < nn; ++b)
        entry(row.idx[a], row.idx[b], w * row.val[a] * row.val[b]);
  }

  void add_soc(const StdForm::Soc& blk, const Matrix& winv2) {
    // G block rows are (0; -I), so only the tail-tail part of winv2 lands in M.
    const int d = blk.p - 1;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) entry(blk.vars[a], blk.vars[b], winv2(a + 1, b + 1));
  }

  Vector solve_once(const Vector& r) const {
    if (tail_ == 0) return schur_llt_.solve(r);
    Vector t1(tail_);
    for (int b = 0; b < nblocks_; ++b)
      t1.segment(b * block_, block_) = block_llt_[b].solve(r.segment(head_ + b * block_, block_));
    Vector u = schur_llt_.solve(r.head(head_) - C_ * t1);
    Vector ct_u = C_.transpose() * u;
    Vector v(tail_);
    for (int b = 0; b < nblocks_; ++b)
      v.segment(b * block_, block_) =
          t1.segment(b * block_, block_) - block_llt_[b].solve(ct_u.segment(b * block_, block_));
    Vector x(sf_.nz);
    x.head(head_) = u;
    x.tail(tail_) = v;
    return x;
  }

  // out -= M x (A_ and the tail blocks are stored fully symmetric).
  void apply_sub(const Vector& x, Vector& out) const {
    out.head(head_).noalias() -= A_ * x.head(head_);
    if (tail_ == 0) return;
    out.head(head_).noalias() -= C_ * x.tail(tail_);
    out.tail(tail_).noalias() -= C_.transpose() * x.head(head_);
    for (int b = 0; b < nblocks_; ++b)
      out.segment(head_ + b * block_, block_).noalias() -=
          blocks_[b] * x.segment(head_ + b * block_, block_);
  }

  const Presolved& pre_;
  const StdForm& sf_;
  int head_ = 0, tail_ = 0, block_ = 0, nblocks_ = 0;
  Matrix A_, C_;
  std::vector<Matrix> blocks_;
  std::vector<Eigen::LLT<Matrix>> block_llt_;
  Matrix schur_;
  Eigen::LLT<Matrix> schur_llt_;
  mutable Matrix scratch_;
};

double full_objective(const QuadraticConicProgram& prob, const Vector& z) {
  return 0.5 * z.dot(prob.quadratic * z) + prob.linear.dot(z);
}

}  // namespace

// ---------------------------------------------------------------------------
// Main interior-point loop.
// ---------------------------------------------------------------------------

Solution solve(const QuadraticConicProgram& problem, const SolverSettings& settings) {
  problem.validate();
  Solution sol;
  sol.ineq_dual = Vector::Zero(static_cast<Eigen::Index>(problem.inequalities.size()));
  sol.lower_dual = Vector::Zero(problem.num_vars);
  sol.upper_dual = Vector::Zero(problem.num_vars);
  sol.cone_dual.assign(problem.cones.size(), Vector());
  for (std::size_t c = 0; c < problem.cones.size(); ++c)
    sol.cone_dual[c] = Vector::Zero(1 + static_cast<Eigen::Index>(problem.cones[c].index.size()));

  Presolved pre = presolve(problem);
  if (pre.infeasible) {
    sol.status = SolveStatus::Infeasible;
    sol.z = Vector::Zero(problem.num_vars);
    return sol;
  }
  for (int v = 0; v < problem.num_vars; ++v)
    if (pre.is_fixed[v]) sol.fixed.push_back(v);

  auto expand = [&](const Vector& zr) {
    Vector full = pre.fixed_value;
    for (int v = 0; v < pre.nz; ++v) full[pre.new_to_old[v]] = zr[v];
    return full;
  };

  StdForm sf = build_standard_form(pre);

  if (sf.nz == 0) {
    sol.z = pre.fixed_value;
    sol.objective = full_objective(problem, sol.z);
    sol.status = SolveStatus::Optimal;
    sol.kkt_residual = 0.0;
    return sol;
  }

  const double hscale = sf.m > 0 ? std::max(1.0, sf.h.cwiseAbs().maxCoeff()) : 1.0;
  const double qscale = std::max(1.0, pre.q.cwiseAbs().maxCoeff());
  const int ncones = static_cast<int>(sf.socs.size());
  const double degree = static_cast<double>(sf.l + ncones);

  KktSolver kkt(pre, sf);
  double reg = settings.static_reg;

  // Unconstrained: a single regularized Newton solve.
  if (sf.m == 0) {
    Scaling sc;
    sc.d.resize(0);
    sc.lambda.resize(0);
    if (!kkt.factor(sc, reg)) {
      sol.status = SolveStatus::NumericalFailure;
      sol.z = expand(Vector::Zero(sf.nz));
      return sol;
    }
    Vector z = kkt.solve(-pre.q);
    sol.z = expand(z);
    sol.objective = full_objective(problem, sol.z);
    sol.kkt_residual = (pre.P * z + pre.q).cwiseAbs().maxCoeff() / qscale;
    sol.status = sol.kkt_residual <= settings.tol_kkt ? SolveStatus::Optimal
                                                      : SolveStatus::NumericalFailure;
    sol.iterations = 1;
    return sol;
  }

  // Initial point from the W = I KKT system, shifted into the cone interior.
  Scaling sc;
  sc.d = Vector::Ones(sf.l);
  sc.lambda = Vector::Zero(sf.m);
  sc.socs.resize(sf.socs.size());
  for (std::size_t b = 0; b < sf.socs.size(); ++b) {
    sc.socs[b].eta = 1.0;
    sc.socs[b].wbar = Vector::Zero(sf.socs[b].p);
    sc.socs[b].wbar[0] = 1.0;
    sc.socs[b].v = sc.socs[b].wbar;
    sc.socs[b].winv2 = Matrix::Identity(sf.socs[b].p, sf.socs[b].p);
  }
  while (!kkt.factor(sc, reg)) {
    reg *= 100.0;
    if (reg > 1e-3) {
      sol.status = SolveStatus::NumericalFailure;
      sol.z = expand(Vector::Zero(sf.nz));
      return sol;
    }
  }
  Vector rhs = -pre.q;
  add_gt_mul(sf, sf.h, rhs);
  Vector z = kkt.solve(rhs);
  Vector s(sf.m), zeta(sf.m);
  residual_slack(sf, z, s);
  zeta = -s;
  {
    const double ms = cone_margin(sf, s);
    if (ms <= 0.0) add_identity(sf, 1.0 - ms, s);
    const double mz = cone_margin(sf, zeta);
    if (mz <= 0.0) add_identity(sf, 1.0 - mz, zeta);
  }

  Vector rx(sf.nz), rs(sf.m);
  Vector ds_target(sf.m), vvec(sf.m), wv(sf.m);
  Vector dz(sf.nz), dzeta(sf.m), ds(sf.m);
  Vector dz_aff(sf.nz), dzeta_aff(sf.m), ds_aff(sf.m);
  Vector corr(sf.m), ws_tilde(sf.m), wz_tilde(sf.m);

  double best_kkt = kInf;
  Vector best_z = z, best_s = s, best_zeta = zeta;
  int stall = 0;

  auto finish = [&](SolveStatus status, int iters) {
    const Vector& zf = best_kkt < kInf ? best_z : z;
    const Vector& zetaf = best_kkt < kInf ? best_zeta : zeta;
    sol.z = expand(zf);
    sol.objective = full_objective(problem, sol.z);
    sol.kkt_residual = best_kkt;
    sol.status = status;
    sol.iterations = iters;
    for (int k = 0; k < sf.l; ++k) {
      switch (sf.row_kind[k]) {
        case RowKind::Inequality:
          sol.ineq_dual[sf.row_ref[k]] = zetaf[k];
          break;
        case RowKind::LowerBound:
          sol.lower_dual[pre.new_to_old[sf.row_ref[k]]] = zetaf[k];
          break;
        case RowKind::UpperBound:
          sol.upper_dual[pre.new_to_old[sf.row_ref[k]]] = zetaf[k];
          break;
      }
    }
    for (std::size_t b = 0; b < sf.socs.size(); ++b) {
      const auto& cone = pre.soc[b];
      Vector dual = Vector::Zero(1 + static_cast<Eigen::Index>(
                                         problem.cones[cone.origin].index.size()));
      dual[0] = zetaf[sf.socs[b].offset];
      for (std::size_t k = 0; k < cone.member_pos.size(); ++k)
        dual[1 + cone.member_pos[k]] = zetaf[sf.socs[b].offset + 1 + static_cast<int>(k)];
      sol.cone_dual[cone.origin] = std::move(dual);
    }
    if (settings.polish && sol.z.allFinite() &&
        (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::MaxIters))
      try_polish(problem, settings, sol);
  };

  int iter = 0;
  for (; iter < settings.max_iters; ++iter) {
    // Residuals of the true (unregularized) KKT conditions.
    rx = pre.P * z + pre.q;
    add_gt_mul(sf, zeta, rx);
    residual_slack(sf, z, rs);
    rs = s - rs;  // rs = G z + s - h

    const double gap = s.dot(zeta);
    const double mu = gap / degree;
    const double objective = 0.5 * z.dot(pre.P * z) + pre.q.dot(z) + pre.objective_const;
    const double pres = rs.cwiseAbs().maxCoeff() / hscale;
    const double dres = rx.cwiseAbs().maxCoeff() / qscale;
    const double comp = std::abs(gap) / std::max(1.0, std::abs(objective));
    const double kkt_res = std::max({pres, dres, comp});
    if (settings.verbose)
      std::fprintf(stderr, "ipm iter %3d  pres %.2e  dres %.2e  gap %.2e  mu %.2e\n", iter, pres,
                   dres, gap, mu);
    if (kkt_res < best_kkt) {
      best_kkt = kkt_res;
      best_z = z;
      best_s = s;
      best_zeta = zeta;
    }
    if (kkt_res <= settings.tol_kkt) {
      finish(SolveStatus::Optimal, iter);
      return sol;
    }
    if (!std::isfinite(kkt_res) || kkt_res > 1e14) {
      finish(SolveStatus::NumericalFailure, iter);
      return sol;
    }

    if (!compute_scaling(sf, s, zeta, sc)) {
      // The slacks reached the cone boundary; classify by how close the best
      // iterate got.
      finish(best_kkt <= 10.0 * settings.tol_kkt ? SolveStatus::MaxIters
                                                 : SolveStatus::NumericalFailure,
             iter);
      return sol;
    }
    bool factored = kkt.factor(sc, reg);
    while (!factored && reg < 1e-3) {
      reg *= 100.0;
      factored = kkt.factor(sc, reg);
    }
    if (!factored) {
      finish(SolveStatus::NumericalFailure, iter);
      return sol;
    }

    // One KKT backsolve for a given complementarity target d_s (in scaled
    // space); shared by the predictor and the corrector.
    //   dz    solves  M dz = -rx - G'[(W^2)^{-1} rs - W^{-1} v]
    //   dzeta = (W^2)^{-1} G dz + (W^2)^{-1} rs - W^{-1} v
    //   ds    = -rs - G dz
    // G dz is formed directly; recovering it from h - G(z + dz) would cancel
    // against h and the (W^2)^{-1} weights (~ 1/mu) amplify that noise.
    auto direction = [&](const Vector& d_target, Vector& out_dz, Vector& out_dzeta,
                         Vector& out_ds) -> bool {
      if (!jordan_solve(sf, sc.lambda, d_target, vvec)) return false;
      // wv = (W^2)^{-1} rs - W^{-1} v.
      for (int k = 0; k < sf.l; ++k)
        wv[k] = sc.d[k] * rs[k] - vvec[k] * std::sqrt(sc.d[k]);
      for (std::size_t b = 0; b < sf.socs.size(); ++b) {
        const auto& blk = sf.socs[b];
        wv.segment(blk.offset, blk.p) =
            sc.socs[b].winv2 * rs.segment(blk.offset, blk.p) -
            soc_winv_apply(sc.socs[b], vvec.segment(blk.offset, blk.p));
      }
      Vector gt_tmp = Vector::Zero(sf.nz);
      add_gt_mul(sf, wv, gt_tmp);
      Vector rhs_z = -rx - gt_tmp;
      out_dz = kkt.solve(rhs_z);
      Vector gdz(sf.m);
      g_mul(sf, out_dz, gdz);
      for (int k = 0; k < sf.l; ++k) out_dzeta[k] = sc.d[k] * gdz[k] + wv[k];
      for (std::size_t b = 0; b < sf.socs.size(); ++b) {
        const auto& blk = sf.socs[b];
        out_dzeta.segment(blk.offset, blk.p) =
            sc.socs[b].winv2 * gdz.segment(blk.offset, blk.p) + wv.segment(blk.offset, blk.p);
      }
      out_ds = -rs - gdz;
      return out_dz.allFinite() && out_dzeta.allFinite();
    };

    // Predictor (affine scaling) direction: d_s = lambda o lambda.
    jordan_product(sf, sc.lambda, sc.lambda, ds_target);
    if (!direction(ds_target, dz_aff, dzeta_aff, ds_aff)) {
      finish(SolveStatus::NumericalFailure, iter);
      return sol;
    }
    const double alpha_aff =
        std::min({1.0, max_step(sf, s, ds_aff), max_step(sf, zeta, dzeta_aff)});
    const double mu_aff =
        (s + alpha_aff * ds_aff).dot(zeta + alpha_aff * dzeta_aff) / degree;
    double sigma = mu > 0.0 ? mu_aff / mu : 0.0;
    sigma = std::clamp(sigma * sigma * sigma, 0.0, 1.0);

    // Corrector: d_s = lambda o lambda + (W^{-T} ds_aff) o (W dzeta_aff) - sigma mu e.
    for (int k = 0; k < sf.l; ++k) {
      const double w = 1.0 / std::sqrt(sc.d[k]);
      ws_tilde[k] = ds_aff[k] / w;
      wz_tilde[k] = dzeta_aff[k] * w;
    }
    for (std::size_t b = 0; b < sf.socs.size(); ++b) {
      const auto& blk = sf.socs[b];
      ws_tilde.segment(blk.offset, blk.p) =
          soc_winv_apply(sc.socs[b], ds_aff.segment(blk.offset, blk.p));
      wz_tilde.segment(blk.offset, blk.p) =
          soc_w_apply(sc.socs[b], dzeta_aff.segment(blk.offset, blk.p));
    }
    jordan_product(sf, ws_tilde, wz_tilde, corr);
    ds_target += corr;
    for (int k = 0; k < sf.l; ++k) ds_target[k] -= sigma * mu;
    for (const auto& blk : sf.socs) ds_target[blk.offset] -= sigma * mu;

    if (!direction(ds_target, dz, dzeta, ds)) {
      finish(SolveStatus::NumericalFailure, iter);
      return sol;
    }
    double alpha = std::min({1.0 / kStepBack, max_step(sf, s, ds), max_step(sf, zeta, dzeta)});
    alpha *= kStepBack;
    alpha = std::min(alpha, 1.0);
    if (alpha < 1e-10) {
      if (++stall >= 2) {
        finish(best_kkt <= 10.0 * settings.tol_kkt ? SolveStatus::MaxIters
                                                   : SolveStatus::NumericalFailure,
               iter);
        return sol;
      }
    } else {
      stall = 0;
    }
    z += alpha * dz;
    s += alpha * ds;
    zeta += alpha * dzeta;
  }

  finish(SolveStatus::MaxIters, iter);
  return sol;
}

// ---------------------------------------------------------------------------
// Newton crossover onto the active set ("polish").
//
// The interior-point iterate sits O(sqrt(gap)) from the optimum on weakly
// determined faces. One or two Newton steps on the active-set KKT system --
// active rows and bounds as equalities, active cones as norm equalities with
// a scalar multiplier -- land on the exact face solution. The result is
// accepted only if the independent certificate does not get worse.
// ---------------------------------------------------------------------------

namespace {

void polish_at_threshold(const QuadraticConicProgram& prob, const SolverSettings& settings,
                         Solution& sol, double theta) {
  const int nv = prob.num_vars;
  const Vector z0 = sol.z;

  std::vector<bool> fixed(static_cast<std::size_t>(nv), false);
  for (int v : sol.fixed) fixed[static_cast<std::size_t>(v)] = true;

  struct EqRow {
    std::vector<int> idx;
    std::vector<double> val;
    double rhs;
    bool sign_free = false;
    int origin = -1;     // inequality index, or -1
    int bound_var = -1;  // variable index for bound rows
    int bound_side = 0;  // -1 lower, +1 upper
  };

  // Candidate pool: every inequality and finite bound, tagged active or not.
  std::vector<EqRow> pool;
  std::vector<bool> active;
  for (std::size_t k = 0; k < prob.inequalities.size(); ++k) {
    const auto& row = prob.inequalities[k];
    double az = 0.0;
    for (std::size_t j = 0; j < row.index.size(); ++j) az += row.value[j] * z0[row.index[j]];
    pool.push_back({row.index, row.value, row.rhs, false, static_cast<int>(k), -1, 0});
    active.push_back(row.rhs - az <= theta);
  }
  if (prob.bounds) {
    for (int v = 0; v < nv; ++v) {
      if (fixed[static_cast<std::size_t>(v)]) continue;
      const double lo = prob.bounds->lower[v], hi = prob.bounds->upper[v];
      if (std::isfinite(lo)) {
        pool.push_back({{v}, {-1.0}, -lo, false, -1, v, -1});
        active.push_back(z0[v] - lo <= theta);
      }
      if (std::isfinite(hi)) {
        pool.push_back({{v}, {1.0}, hi, false, -1, v, +1});
        active.push_back(hi - z0[v] <= theta);
      }
    }
  }
  const std::size_t first_fixed = pool.size();
  for (int v = 0; v < nv; ++v) {
    if (fixed[static_cast<std::size_t>(v)]) {
      pool.push_back({{v}, {1.0}, z0[v], true, -1, -1, 0});
      active.push_back(true);
    }
  }

  // The crossover handles polyhedral faces; a binding second-order cone makes
  // the active-set system nonlinear and is left to the interior-point result.
  for (std::size_t c = 0; c < prob.cones.size(); ++c) {
    const auto& cone = prob.cones[c];
    double dev_sq = 0.0;
    for (std::size_t j = 0; j < cone.index.size(); ++j) {
      const double d = z0[cone.index[j]] - cone.center[static_cast<Eigen::Index>(j)];
      dev_sq += d * d;
    }
    if (cone.radius - std::sqrt(dev_sq) <= theta * std::max(1.0, cone.radius)) return;
  }

  Vector z = z0;
  std::vector<double> row_dual(pool.size(), 0.0);

  // Degenerate (linearly dependent) rows can ping-pong between active and
  // inactive; a small flip budget per row forces termination.
  std::vector<int> row_flips(pool.size(), 0);
  bool converged = false;
  for (int round = 0; round < 30 && !converged; ++round) {
    std::vector<std::size_t> act_rows;
    for (std::size_t k = 0; k < pool.size(); ++k)
      if (active[k]) act_rows.push_back(k);

    const int m_eq = static_cast<int>(act_rows.size());
    const int dim = nv + m_eq;
    if (dim > 4000) return;

    Vector x(dim);
    x.head(nv) = z;
    for (int r = 0; r < m_eq; ++r) x[nv + r] = row_dual[act_rows[static_cast<std::size_t>(r)]];

    Matrix K(dim, dim);
    Vector f(dim), step(dim);
    for (int newton = 0; newton < 2; ++newton) {
      K.setZero();
      for (int k = 0; k < prob.quadratic.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(prob.quadratic, k); it; ++it)
          K(it.row(), it.col()) += it.value();
      for (int v = 0; v < nv; ++v) K(v, v) += 1e-11;
      for (int r = 0; r < m_eq; ++r) {
        const auto& row = pool[act_rows[static_cast<std::size_t>(r)]];
        for (std::size_t j = 0; j < row.idx.size(); ++j) {
          K(row.idx[j], nv + r) += row.val[j];
          K(nv + r, row.idx[j]) += row.val[j];
        }
        K(nv + r, nv + r) -= 1e-11;
      }
      for (int v = 0; v < nv; ++v) {
        if (!fixed[static_cast<std::size_t>(v)]) continue;
        K.row(v).setZero();
        K(v, v) = 1.0;
      }

      // residual
      f.setZero();
      Vector stat = prob.quadratic * x.head(nv) + prob.linear;
      for (int r = 0; r < m_eq; ++r) {
        const auto& row = pool[act_rows[static_cast<std::size_t>(r)]];
        double az = 0.0;
        for (std::size_t j = 0; j < row.idx.size(); ++j) {
          az += row.val[j] * x[row.idx[j]];
          stat[row.idx[j]] += row.val[j] * x[nv + r];
        }
        f[nv + r] = az - row.rhs;
      }
      for (int v = 0; v < nv; ++v)
        f[v] = fixed[static_cast<std::size_t>(v)] ? 0.0 : stat[v];

      // Minimal-norm solve: the active set may contain linearly dependent
      // rows, and the least-norm multipliers keep them balanced instead of
      // exploding with opposite signs.
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
      cod.setThreshold(1e-12);
      step = cod.solve(-f);
      if (!step.allFinite()) {
        if (std::getenv("CVXREG_POLISH_DEBUG")) std::fprintf(stderr, "polish: singular newton system\n");
        return;
      }
      x += step;
    }

    z = x.head(nv);
    for (auto& d : row_dual) d = 0.0;
    for (int r = 0; r < m_eq; ++r) row_dual[act_rows[static_cast<std::size_t>(r)]] = x[nv + r];

    // Active-set update: drop rows whose multiplier went negative, add rows
    // the new point violates.
    double dual_scale = 1.0;
    for (double d : row_dual) dual_scale = std::max(dual_scale, std::abs(d));
    const double sign_tol = 1e-9 * dual_scale;
    bool changed = false;
    for (std::size_t k = 0; k < first_fixed; ++k) {
      const auto& row = pool[k];
      double az = 0.0;
      for (std::size_t j = 0; j < row.idx.size(); ++j) az += row.val[j] * z[row.idx[j]];
      const double slack = row.rhs - az;
      if (active[k] && row_dual[k] < -sign_tol && row_flips[k] < 3) {
        active[k] = false;
        ++row_flips[k];
        changed = true;
      } else if (!active[k] && slack < -1e-11 * std::max(1.0, std::abs(row.rhs)) &&
                 row_flips[k] < 3) {
        active[k] = true;
        ++row_flips[k];
        changed = true;
      }
    }
    for (const auto& cone : prob.cones) {
      double dev_sq = 0.0;
      for (std::size_t j = 0; j < cone.index.size(); ++j) {
        const double d = z[cone.index[j]] - cone.center[static_cast<Eigen::Index>(j)];
        dev_sq += d * d;
      }
      // The point drifted onto a cone the threshold pass saw as inactive.
      if (cone.radius - std::sqrt(dev_sq) < -1e-11 * std::max(1.0, cone.radius)) return;
    }
    converged = !changed;
  }
  if (!converged) {
    if (std::getenv("CVXREG_POLISH_DEBUG")) std::fprintf(stderr, "polish: active set did not settle\n");
    return;
  }

  // Rebuild a candidate solution; accept only if the independent certificate
  // does not get worse.
  Solution cand = sol;
  cand.z = z;
  cand.ineq_dual.setZero();
  cand.lower_dual.setZero();
  cand.upper_dual.setZero();
  for (std::size_t k = 0; k < first_fixed; ++k) {
    if (!active[k]) continue;
    const auto& row = pool[k];
    const double nu = std::max(row_dual[k], 0.0);
    if (row.origin >= 0) {
      cand.ineq_dual[row.origin] = nu;
    } else if (row.bound_side == -1) {
      cand.lower_dual[row.bound_var] = nu;
    } else {
      cand.upper_dual[row.bound_var] = nu;
    }
  }
  const double before = certify(prob, sol);
  const double after = certify(prob, cand);
  if (!(after <= before) || !cand.z.allFinite()) {
    if (std::getenv("CVXREG_POLISH_DEBUG"))
      std::fprintf(stderr, "polish: rejected, before %.3e after %.3e\n", before, after);
    return;
  }
  cand.objective = full_objective(prob, cand.z);
  cand.kkt_residual = after;
  if (after <= settings.tol_kkt) cand.status = SolveStatus::Optimal;
  sol = std::move(cand);
}

void try_polish(const QuadraticConicProgram& prob, const SolverSettings& settings,
                Solution& sol) {
  double hscale = 1.0;
  for (const auto& row : prob.inequalities) hscale = std::max(hscale, std::abs(row.rhs));
  // Each pass keeps the candidate only when the certificate improves, so the
  // thresholds cooperate: tighter ones refine what looser ones identified.
  for (double theta : {1e-5, 1e-6, 1e-7})
    polish_at_threshold(prob, settings, sol, theta * hscale);
}

}  // namespace

// ---------------------------------------------------------------------------
// Independent KKT certification.
// ---------------------------------------------------------------------------

double certify(const QuadraticConicProgram& problem, const Solution& solution) {
  const Vector& z = solution.z;
  const int nv = problem.num_vars;
  if (z.size() != nv) throw DimensionError("certify: solution length mismatch");

  std::vector<bool> fixed(static_cast<std::size_t>(nv), false);
  for (int v : solution.fixed) fixed[static_cast<std::size_t>(v)] = true;

  double hscale = 1.0;
  for (const auto& row : problem.inequalities) hscale = std::max(hscale, std::abs(row.rhs));
  if (problem.bounds) {
    for (int v = 0; v < nv; ++v) {
      if (std::isfinite(problem.bounds->lower[v]))
        hscale = std::max(hscale, std::abs(problem.bounds->lower[v]));
      if (std::isfinite(problem.bounds->upper[v]))
        hscale = std::max(hscale, std::abs(problem.bounds->upper[v]));
    }
  }
  for (const auto& cone : problem.cones) {
    hscale = std::max(hscale, cone.radius);
    for (int k = 0; k < cone.center.size(); ++k)
      hscale = std::max(hscale, std::abs(cone.center[k]));
  }

  // Stationarity: P z + q + sum_k zeta_k a_k - mu_lo + mu_hi - sum_c wbar_c.
  Vector stat = problem.quadratic * z + problem.linear;
  double comp = 0.0;
  double dual_violation = 0.0;
  double dual_scale = 1.0;
  double primal = 0.0;

  for (std::size_t k = 0; k < problem.inequalities.size(); ++k) {
    const auto& row = problem.inequalities[k];
    const double y = solution.ineq_dual[static_cast<Eigen::Index>(k)];
    double az = 0.0;
    for (std::size_t j = 0; j < row.index.size(); ++j) {
      az += row.value[j] * z[row.index[j]];
      stat[row.index[j]] += y * row.value[j];
    }
    primal = std::max(primal, az - row.rhs);
    dual_violation = std::max(dual_violation, -y);
    dual_scale = std::max(dual_scale, std::abs(y));
    comp += y * (row.rhs - az);
  }
  if (problem.bounds) {
    for (int v = 0; v < nv; ++v) {
      const double lo = problem.bounds->lower[v], hi = problem.bounds->upper[v];
      if (std::isfinite(lo)) {
        const double y = solution.lower_dual[v];
        stat[v] -= y;
        primal = std::max(primal, lo - z[v]);
        dual_violation = std::max(dual_violation, -y);
        dual_scale = std::max(dual_scale, std::abs(y));
        comp += y * (z[v] - lo);
      }
      if (std::isfinite(hi)) {
        const double y = solution.upper_dual[v];
        stat[v] += y;
        primal = std::max(primal, z[v] - hi);
        dual_violation = std::max(dual_violation, -y);
        dual_scale = std::max(dual_scale, std::abs(y));
        comp += y * (hi - z[v]);
      }
    }
  }
  for (std::size_t c = 0; c < problem.cones.size(); ++c) {
    const auto& cone = problem.cones[c];
    const Vector& w = solution.cone_dual[c];
    Vector dev(cone.center.size());
    for (std::size_t k = 0; k < cone.index.size(); ++k) {
      dev[static_cast<Eigen::Index>(k)] = z[cone.index[k]] - cone.center[static_cast<Eigen::Index>(k)];
      stat[cone.index[k]] -= w[1 + static_cast<Eigen::Index>(k)];
    }
    primal = std::max(primal, dev.norm() - cone.radius);
    dual_violation = std::max(dual_violation, w.tail(w.size() - 1).norm() - w[0]);
    dual_scale = std::max(dual_scale, w.cwiseAbs().maxCoeff());
    comp += cone.radius * w[0] + dev.dot(w.tail(w.size() - 1));
  }

  for (int v = 0; v < nv; ++v)
    if (fixed[static_cast<std::size_t>(v)]) stat[v] = 0.0;

  const double qscale = std::max(1.0, problem.linear.cwiseAbs().maxCoeff());
  const double objective = 0.5 * z.dot(problem.quadratic * z) + problem.linear.dot(z);
  const double res_stat = stat.cwiseAbs().maxCoeff() / qscale;
  const double res_primal = std::max(0.0, primal) / hscale;
  const double res_dual = std::max(0.0, dual_violation) / dual_scale;
  const double res_comp = std::abs(comp) / std::max(1.0, std::abs(objective));
  return std::max({res_stat, res_primal, res_dual, res_comp});
}

// ---------------------------------------------------------------------------
// Problem dump/restore for offline reproduction.
// ---------------------------------------------------------------------------

void dump_problem(const QuadraticConicProgram& problem, const std::string& path) {
  nlohmann::json out;
  out["schema"] = "cvxreg-problem/1";
  out["num_vars"] = problem.num_vars;
  nlohmann::json p = nlohmann::json::array();
  for (int k = 0; k < problem.quadratic.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(problem.quadratic, k); it; ++it)
      p.push_back({it.row(), it.col(), it.value()});
  out["P"] = std::move(p);
  out["q"] = std::vector<double>(problem.linear.data(), problem.linear.data() + problem.linear.size());
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : problem.inequalities)
    rows.push_back({{"idx", row.index}, {"val", row.value}, {"rhs", row.rhs}});
  out["inequalities"] = std::move(rows);
  if (problem.bounds) {
    // JSON has no infinity; absent bounds are stored as +-1e308.
    auto encode = [&](const Vector& v) {
      std::vector<double> enc(static_cast<std::size_t>(problem.num_vars));
      for (int i = 0; i < problem.num_vars; ++i)
        enc[static_cast<std::size_t>(i)] =
            std::isfinite(v[i]) ? v[i] : std::copysign(1e308, v[i]);
      return enc;
    };
    out["lower"] = encode(problem.bounds->lower);
    out["upper"] = encode(problem.bounds->upper);
  }
  nlohmann::json cones = nlohmann::json::array();
  for (const auto& cone : problem.cones)
    cones.push_back({{"idx", cone.index},
                     {"center", std::vector<double>(cone.center.data(),
                                                    cone.center.data() + cone.center.size())},
                     {"radius", cone.radius}});
  out["cones"] = std::move(cones);
  std::ofstream file(path);
  if (!file) throw DataError("cannot open '" + path + "' for writing");
  file << out.dump();
}

QuadraticConicProgram load_problem(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open problem file '" + path + "'");
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("problem file is not valid JSON: ") + e.what());
  }
  QuadraticConicProgram prob;
  prob.num_vars = doc.at("num_vars").get<int>();
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& entry : doc.at("P"))
    trips.emplace_back(entry[0].get<int>(), entry[1].get<int>(), entry[2].get<double>());
  prob.quadratic.resize(prob.num_vars, prob.num_vars);
  prob.quadratic.setFromTriplets(trips.begin(), trips.end());
  const auto qv = doc.at("q").get<std::vector<double>>();
  prob.linear = Eigen::Map<const Vector>(qv.data(), static_cast<Eigen::Index>(qv.size()));
  for (const auto& row : doc.at("inequalities")) {
    LinearConstraint c;
    c.index = row.at("idx").get<std::vector<int>>();
    c.value = row.at("val").get<std::vector<double>>();
    c.rhs = row.at("rhs").get<double>();
    prob.inequalities.push_back(std::move(c));
  }
  if (doc.contains("lower")) {
    auto decode = [](const std::vector<double>& enc) {
      Vector v(static_cast<Eigen::Index>(enc.size()));
      for (std::size_t i = 0; i < enc.size(); ++i)
        v[static_cast<Eigen::Index>(i)] =
            std::abs(enc[i]) >= 1e300 ? std::copysign(kInf, enc[i]) : enc[i];
      return v;
    };
    prob.bounds = VariableBounds{decode(doc.at("lower").get<std::vector<double>>()),
                                 decode(doc.at("upper").get<std::vector<double>>())};
  }
  for (const auto& cone : doc.at("cones")) {
    SocConstraint c;
    c.index = cone.at("idx").get<std::vector<int>>();
    const auto center = cone.at("center").get<std::vector<double>>();
    c.center = Eigen::Map<const Vector>(center.data(), static_cast<Eigen::Index>(center.size()));
    c.radius = cone.at("radius").get<double>();
    prob.cones.push_back(std::move(c));
  }
  prob.validate();
  return prob;
}

// ---------------------------------------------------------------------------
// Constraint generation.
// ---------------------------------------------------------------------------

namespace {

std::uint64_t row_signature(const LinearConstraint& row) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t x) {
    h ^= x;
    h *= 1099511628211ULL;
  };
  for (std::size_t j = 0; j < row.index.size(); ++j) {
    mix(static_cast<std::uint64_t>(row.index[j]));
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &row.value[j], sizeof(bits));
    mix(bits);
  }
  std::uint64_t bits;
  std::memcpy(&bits, &row.rhs, sizeof(bits));
  mix(bits);
  return h;
}

}  // namespace

Solution solve_with_constraint_generation(const QuadraticConicProgram& base,
                                          const ConstraintSource& source,
                                          const ConstraintGenSettings& settings) {
  QuadraticConicProgram working = base;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& row : working.inequalities) seen.insert(row_signature(row));
  for (auto& row : source.initial()) {
    if (seen.insert(row_signature(row)).second) working.inequalities.push_back(std::move(row));
  }

  Solution sol;
  for (int round = 0; round < settings.max_rounds; ++round) {
    sol = solve(working, settings.solver);
    sol.working_rows = static_cast<int>(working.inequalities.size());
    // A near-converged iterate still yields valid cuts; only give up when the
    // inner solve failed outright.
    const bool usable =
        sol.status == SolveStatus::Optimal ||
        (sol.status == SolveStatus::MaxIters &&
         sol.kkt_residual <= 10.0 * settings.solver.tol_kkt);
    if (!usable) return sol;
    const double tol =
        settings.violation_tol * std::max(1.0, sol.z.cwiseAbs().maxCoeff());
    auto rows = source.violated(sol.z, tol, settings.rows_per_round);
    bool added = false;
    for (auto& row : rows) {
      if (seen.insert(row_signature(row)).second) {
        working.inequalities.push_back(std::move(row));
        added = true;
      }
    }
    if (!added) return sol;
  }
  sol.status = SolveStatus::MaxIters;
  return sol;
}

}  // namespace cvxreg
