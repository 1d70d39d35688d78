#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <limits>

namespace cvxreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Feasibility tolerance on (scale-normalized) constraint residuals.
constexpr double kFeasTol = 1e-6;

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace cvxreg
