#pragma once

// Closed-form estimators for the analytically solvable models, plus small
// numerical tools (adaptive quadrature, finite differences) used as
// independent references in tests.

#include <functional>
#include <span>
#include <vector>

namespace obscheck::oracles {

struct OracleResult {
  std::vector<double> estimate;
  std::vector<double> variance;        ///< estimator variance at the true values
  std::vector<double> local_variance;  ///< -1 / L'' (diagonal) at the estimate
  std::vector<double> expected_value;  ///< E[estimator] at the true values
  bool defined = true;
};

/// Z_t = sqrt(b) eps_t.
///   b_hat = (1/T) sum z^2,  Var = (2/T) b^2,  LVar = (2/T) b_hat^2.
OracleResult oracle_b(std::span<const double> z, double b_true);

/// Z_t = a + sqrt(b) eps_t. Requires T >= 2.
OracleResult oracle_ab(std::span<const double> z, double a_true, double b_true);

/// Z_t = 1 / w + eps_t. Undefined when sum z = 0.
OracleResult oracle_reciprocal(std::span<const double> z);

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 40);

/// Central-difference gradient of f at x with per-coordinate step
/// h_j = rel * max(1, |x_j|).
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double rel);

}  // namespace obscheck::oracles
