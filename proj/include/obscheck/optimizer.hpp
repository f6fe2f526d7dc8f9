#pragma once

#include <span>
#include <string>
#include <vector>

#include "obscheck/posterior.hpp"

namespace obscheck {

struct OptConfig {
  int memory = 10;            ///< L-BFGS history length
  int max_iters = 500;
  double grad_tol = 1e-9;     ///< convergence target on |grad(-2L)|_inf
  double armijo = 1e-4;       ///< sufficient-decrease constant
  double backtrack = 0.5;     ///< step shrink factor
  int max_backtracks = 60;

  // Post-hoc validity thresholds.
  double grad_check = 1e-5;
  double eig_ratio_min = 1e-5;
  double lvar_max = 1e8;

  void validate() const;
};

struct MaxResult {
  std::vector<double> omega_hat;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  ///< |grad(-2L)|_inf at omega_hat
  double value = 0.0;      ///< -2L at omega_hat
  std::vector<double> trace;  ///< -2L at the start and after every accepted step
  std::string message;
};

struct CheckReport {
  double grad_norm = 0.0;
  bool grad_ok = false;
  std::vector<double> eigenvalues;  ///< ascending, of H_{-2L}
  bool hessian_pd = false;
  double eig_ratio = 0.0;  ///< lambda_min / lambda_max
  bool eig_ratio_ok = false;
  std::vector<double> local_variances;  ///< empty unless hessian_pd
  bool lvar_finite = false;
  bool passed = false;
  std::string diagnostic;  ///< first failing check, empty when passed
};

/// Minimizes the objective (-2L for a posterior) by L-BFGS with backtracking.
/// Trial points are projected onto the box bounds; infeasible trial points
/// are rejected by the line search. Never throws on infeasibility: failures
/// come back as converged = false with a message.
MaxResult maximize(const Objective& f, std::span<const double> x0, const OptConfig& cfg);

/// Runs the four validity checks (gradient size, positive-definite Hessian,
/// eigenvalue ratio, finite local variances) at result.omega_hat.
CheckReport check_maximum(const Objective& f, const MaxResult& result, const OptConfig& cfg);

/// 2 * diag(H_{-2L}^{-1}); entries are +inf when the Hessian is singular.
std::vector<double> local_variance(const Objective& f, std::span<const double> omega_hat);

/// Same, from a precomputed H_{-2L}.
std::vector<double> local_variance_from_hessian(const Eigen::MatrixXd& h);

}  // namespace obscheck
