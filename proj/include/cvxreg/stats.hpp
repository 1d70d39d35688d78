#pragma once

#include <vector>

namespace cvxreg {

double mean(const std::vector<double>& values);

/// Sample standard deviation (n - 1 denominator).
double sample_sd(const std::vector<double>& values);

/// Linear-interpolation percentile between order statistics at rank
/// p * (n - 1) + 1 (the "type 7" convention). p in [0, 1].
double percentile(std::vector<double> values, double p);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided Student-t quantile: returns t with P(T_df <= t) = p, p in (0, 1).
double student_t_quantile(double p, int df);

}  // namespace cvxreg
