#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstdio>

#include "cvxreg/errors.hpp"
#include "cvxreg/rng.hpp"
#include "cvxreg/solver.hpp"

using namespace cvxreg;

namespace {

SparseMatrix diag_matrix(const Vector& d) {
  SparseMatrix p(d.size(), d.size());
  for (int i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) p.insert(i, i) = d[i];
  p.makeCompressed();
  return p;
}

// Random feasible instance: minimize ||z - target||^2 over a few halfspaces
// and boxes that all contain an interior point z0, plus optional cones.
QuadraticConicProgram random_instance(SplitMix64& rng, int nv, bool with_cone) {
  QuadraticConicProgram prob;
  prob.num_vars = nv;
  prob.quadratic = diag_matrix(Vector::Constant(nv, 2.0));
  prob.linear = Vector::Zero(nv);
  Vector z0(nv);
  for (int i = 0; i < nv; ++i) {
    prob.linear[i] = -2.0 * (2.0 * rng.next_uniform() - 1.0) * 5.0;
    z0[i] = 2.0 * rng.next_uniform() - 1.0;
  }
  const int m = 2 + static_cast<int>(rng.next_below(5));
  for (int k = 0; k < m; ++k) {
    LinearConstraint row;
    double az = 0.0;
    for (int i = 0; i < nv; ++i) {
      if (rng.next_uniform() < 0.6) {
        const double a = 2.0 * rng.next_uniform() - 1.0;
        row.index.push_back(i);
        row.value.push_back(a);
        az += a * z0[i];
      }
    }
    if (row.index.empty()) continue;
    row.rhs = az + rng.next_uniform() + 0.1;  // strictly feasible at z0
    prob.inequalities.push_back(std::move(row));
  }
  if (with_cone) {
    SocConstraint cone;
    const int p = std::min(nv, 2 + static_cast<int>(rng.next_below(2)));
    Vector c(p);
    for (int k = 0; k < p; ++k) {
      cone.index.push_back(k);
      c[k] = z0[k];
    }
    cone.center = c;
    cone.radius = 0.5 + rng.next_uniform();
    prob.cones.push_back(std::move(cone));
  }
  return prob;
}

}  // namespace

TEST_CASE("projection onto a halfline") {
  // minimize (z - 1)^2 subject to z >= 2 -> z = 2, value 1
  QuadraticConicProgram prob;
  prob.num_vars = 1;
  prob.quadratic = diag_matrix(Vector::Constant(1, 2.0));
  prob.linear = Vector::Constant(1, -2.0);
  prob.bounds = VariableBounds{Vector::Constant(1, 2.0), Vector::Constant(1, kInf)};
  auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK((sol.z[0] - 1.0) * (sol.z[0] - 1.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-6));  // 0.5 z'Pz + q'z
}

TEST_CASE("symmetric halfspace projection") {
  // minimize z1^2 + z2^2 subject to z1 + z2 >= 2 -> (1, 1), value 2
  QuadraticConicProgram prob;
  prob.num_vars = 2;
  prob.quadratic = diag_matrix(Vector::Constant(2, 2.0));
  prob.linear = Vector::Zero(2);
  prob.inequalities.push_back({{0, 1}, {-1.0, -1.0}, -2.0});
  auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.z[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("projection onto an interval via a 1d cone") {
  // minimize (z - 3)^2 subject to |z| <= 1 -> z = 1, value 4
  QuadraticConicProgram prob;
  prob.num_vars = 1;
  prob.quadratic = diag_matrix(Vector::Constant(1, 2.0));
  prob.linear = Vector::Constant(1, -6.0);
  prob.cones.push_back({{0}, Vector::Zero(1), 1.0});
  auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK((sol.z[0] - 3.0) * (sol.z[0] - 3.0) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("two dimensional cone projection") {
  // minimize ||z - (3, 0)||^2 s.t. ||z - (0,0)|| <= 1 -> z = (1, 0)
  QuadraticConicProgram prob;
  prob.num_vars = 2;
  prob.quadratic = diag_matrix(Vector::Constant(2, 2.0));
  prob.linear = Vector::Zero(2);
  prob.linear[0] = -6.0;
  prob.cones.push_back({{0, 1}, Vector::Zero(2), 1.0});
  auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.z[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("contradictory boxes are reported infeasible") {
  QuadraticConicProgram prob;
  prob.num_vars = 2;
  prob.quadratic = diag_matrix(Vector::Constant(2, 2.0));
  prob.linear = Vector::Zero(2);
  prob.bounds = VariableBounds{Vector::Constant(2, 1.0), Vector::Constant(2, 1.0)};
  prob.bounds->lower[1] = 3.0;  // lower > upper
  CHECK_THROWS_AS(prob.validate(), ValidationError);
  prob.bounds->lower[1] = 1.0;
  prob.bounds->upper[1] = 1.0;
  // Fixed values violating a row -> infeasible after presolve.
  prob.inequalities.push_back({{0, 1}, {1.0, 1.0}, 1.0});
  auto sol = solve(prob);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("fixed variables via lo == hi are substituted out") {
  // minimize (z0 - 5)^2 + z1^2 with z1 pinned at 2.
  QuadraticConicProgram prob;
  prob.num_vars = 2;
  prob.quadratic = diag_matrix(Vector::Constant(2, 2.0));
  prob.linear = Vector::Zero(2);
  prob.linear[0] = -10.0;
  prob.bounds = VariableBounds{Vector::Constant(2, -kInf), Vector::Constant(2, kInf)};
  prob.bounds->lower[1] = 2.0;
  prob.bounds->upper[1] = 2.0;
  auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(5.0).epsilon(1e-7));
  CHECK(sol.z[1] == doctest::Approx(2.0));
  CHECK(sol.fixed == std::vector<int>{1});
}

TEST_CASE("radius zero cone pins its members") {
  QuadraticConicProgram prob;
  prob.num_vars = 2;
  prob.quadratic = diag_matrix(Vector::Constant(2, 2.0));
  prob.linear = Vector::Constant(2, -2.0);
  Vector center(2);
  center << 0.25, -0.5;
  prob.cones.push_back({{0, 1}, center, 0.0});
  auto sol = solve(prob);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(0.25));
  CHECK(sol.z[1] == doctest::Approx(-0.5));
}

TEST_CASE("kkt certificate on random instances") {
  SplitMix64 rng(20240601);
  for (int rep = 0; rep < 50; ++rep) {
    const int nv = 2 + static_cast<int>(rng.next_below(6));
    auto prob = random_instance(rng, nv, rep % 2 == 0);
    auto sol = solve(prob);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(certify(prob, sol) <= 10.0 * SolverSettings{}.tol_kkt);
  }
}

TEST_CASE("objective never decreases when a constraint is added") {
  SplitMix64 rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    const int nv = 2 + static_cast<int>(rng.next_below(4));
    auto prob = random_instance(rng, nv, false);
    auto base = solve(prob);
    REQUIRE(base.status == SolveStatus::Optimal);
    // Cut through the current optimum.
    LinearConstraint cut;
    double az = 0.0;
    for (int i = 0; i < nv; ++i) {
      const double a = 2.0 * rng.next_uniform() - 1.0;
      cut.index.push_back(i);
      cut.value.push_back(a);
      az += a * base.z[i];
    }
    cut.rhs = az - 0.5;
    prob.inequalities.push_back(cut);
    auto cutsol = solve(prob);
    if (cutsol.status != SolveStatus::Optimal) continue;  // cut may make it infeasible-ish
    CHECK(cutsol.objective >= base.objective - 1e-7 * std::max(1.0, std::abs(base.objective)));
  }
}

TEST_CASE("duality gap bound at optimal termination") {
  SplitMix64 rng(31337);
  for (int rep = 0; rep < 20; ++rep) {
    auto prob = random_instance(rng, 4, true);
    auto sol = solve(prob);
    REQUIRE(sol.status == SolveStatus::Optimal);
    // Recompute the complementarity part of the certificate directly.
    double gap = 0.0;
    for (std::size_t k = 0; k < prob.inequalities.size(); ++k) {
      const auto& row = prob.inequalities[k];
      double az = 0.0;
      for (std::size_t j = 0; j < row.index.size(); ++j) az += row.value[j] * sol.z[row.index[j]];
      gap += sol.ineq_dual[static_cast<Eigen::Index>(k)] * (row.rhs - az);
    }
    for (std::size_t c = 0; c < prob.cones.size(); ++c) {
      const auto& cone = prob.cones[c];
      Vector dev(cone.center.size());
      for (std::size_t j = 0; j < cone.index.size(); ++j)
        dev[static_cast<Eigen::Index>(j)] =
            sol.z[cone.index[j]] - cone.center[static_cast<Eigen::Index>(j)];
      gap += cone.radius * sol.cone_dual[c][0] +
             dev.dot(sol.cone_dual[c].tail(dev.size()));
    }
    CHECK(std::abs(gap) <= 10.0 * SolverSettings{}.tol_kkt * (1.0 + std::abs(sol.objective)));
  }
}

namespace {

// All pairwise rows of a tiny projection problem, generated lazily.
class BoxCutSource : public ConstraintSource {
 public:
  explicit BoxCutSource(int nv) : nv_(nv) {}
  std::vector<LinearConstraint> initial() const override { return {}; }
  std::vector<LinearConstraint> violated(const Vector& z, double tol,
                                         int max_rows) const override {
    std::vector<LinearConstraint> out;
    for (int i = 0; i < nv_ && static_cast<int>(out.size()) < max_rows; ++i) {
      if (z[i] - 1.0 > tol) out.push_back({{i}, {1.0}, 1.0});  // z_i <= 1
    }
    return out;
  }

 private:
  int nv_;
};

}  // namespace

TEST_CASE("constraint generation matches the dense solve") {
  const int nv = 6;
  QuadraticConicProgram base;
  base.num_vars = nv;
  base.quadratic = diag_matrix(Vector::Constant(nv, 2.0));
  base.linear = Vector::Constant(nv, -8.0);  // pulls z to 4, cuts cap at 1

  QuadraticConicProgram dense = base;
  for (int i = 0; i < nv; ++i) dense.inequalities.push_back({{i}, {1.0}, 1.0});
  auto ref = solve(dense);
  REQUIRE(ref.status == SolveStatus::Optimal);

  BoxCutSource source(nv);
  auto lazy = solve_with_constraint_generation(base, source);
  REQUIRE(lazy.status == SolveStatus::Optimal);
  CHECK((lazy.z - ref.z).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("polish pins repeated solves to the same face") {
  // A weakly determined projection: many nearly parallel cuts through the
  // optimum. Without the crossover two solves agree only to ~sqrt(tol).
  SplitMix64 rng(2718);
  QuadraticConicProgram prob;
  prob.num_vars = 3;
  prob.quadratic = diag_matrix(Vector::Constant(3, 2.0));
  prob.linear = Vector::Constant(3, -2.0);  // pulls z to (1,1,1)
  for (int k = 0; k < 12; ++k) {
    LinearConstraint row;
    double norm = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double a = 1.0 + 1e-6 * rng.next_gaussian();
      row.index.push_back(i);
      row.value.push_back(a);
      norm += a;
    }
    row.rhs = norm * 0.5;  // binding at z = 0.5 * ones
    prob.inequalities.push_back(std::move(row));
  }
  SolverSettings polished;
  polished.polish = true;
  const auto a = solve(prob, polished);
  REQUIRE(a.status == SolveStatus::Optimal);
  CHECK(certify(prob, a) <= 1e-12);

  // Perturb the row order (a different but equivalent problem presentation).
  QuadraticConicProgram shuffled = prob;
  std::reverse(shuffled.inequalities.begin(), shuffled.inequalities.end());
  const auto b = solve(shuffled, polished);
  REQUIRE(b.status == SolveStatus::Optimal);
  CHECK((a.z - b.z).cwiseAbs().maxCoeff() <= 1e-10);

  // The polish never degrades a certificate.
  SolverSettings plain;
  const auto c = solve(prob, plain);
  CHECK(certify(prob, a) <= certify(prob, c) + 1e-15);
}

TEST_CASE("problem dump round-trips") {
  SplitMix64 rng(12);
  auto prob = random_instance(rng, 4, true);
  prob.bounds = VariableBounds{Vector::Constant(4, -kInf), Vector::Constant(4, kInf)};
  prob.bounds->lower[0] = -2.0;
  prob.bounds->upper[2] = 5.0;
  const std::string path = "/tmp/cvxreg_problem_dump.json";
  dump_problem(prob, path);
  const auto back = load_problem(path);
  CHECK(back.num_vars == prob.num_vars);
  CHECK(back.inequalities.size() == prob.inequalities.size());
  CHECK(back.cones.size() == prob.cones.size());
  CHECK(back.bounds->lower[0] == -2.0);
  CHECK(back.bounds->lower[1] == -kInf);
  CHECK(back.bounds->upper[2] == 5.0);
  const auto a = solve(prob);
  const auto b = solve(back);
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  CHECK((a.z - b.z).cwiseAbs().maxCoeff() <= 1e-9);
  std::remove(path.c_str());
}

TEST_CASE("already-feasible start converges in one round") {
  QuadraticConicProgram base;
  base.num_vars = 2;
  base.quadratic = diag_matrix(Vector::Constant(2, 2.0));
  base.linear = Vector::Constant(2, 2.0);  // optimum at -1, cuts inactive
  BoxCutSource source(2);
  auto sol = solve_with_constraint_generation(base, source);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.z[0] == doctest::Approx(-1.0).epsilon(1e-7));
}
