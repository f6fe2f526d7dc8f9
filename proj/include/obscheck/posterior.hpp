#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "obscheck/errors.hpp"
#include "obscheck/expr.hpp"
#include "obscheck/model.hpp"

namespace obscheck {

/// A function to be minimized together with its box bounds. evaluate()
/// returns nullopt at infeasible points instead of throwing.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual std::optional<ValueGrad> evaluate(std::span<const double> x) const = 0;
  virtual double lower(std::size_t) const { return -std::numeric_limits<double>::infinity(); }
  virtual double upper(std::size_t) const { return std::numeric_limits<double>::infinity(); }
};

/// A model bound to an observation vector z_T. The minimized objective is
/// -2L(Omega | z_T).
class PosteriorContext final : public Objective {
 public:
  /// Throws ConfigError for an empty or non-finite observation vector.
  PosteriorContext(ModelSpec model, std::vector<double> obs);

  const ModelSpec& model() const { return model_; }
  const std::vector<double>& obs() const { return obs_; }
  std::size_t horizon() const { return obs_.size(); }

  std::size_t dim() const override { return model_.size(); }
  std::optional<ValueGrad> evaluate(std::span<const double> x) const override;
  double lower(std::size_t j) const override;
  double upper(std::size_t j) const override;

 private:
  ModelSpec model_;
  std::vector<double> obs_;
};

/// L(Omega | z) = sum_t [-log s - (z_t - m)^2 / (2 s^2)] + log_prior, with
/// Omega-free constants dropped. Throws DomainError at infeasible points
/// (expression domain violations or s <= 0).
double log_posterior(const PosteriorContext& ctx, std::span<const double> omega);

/// Value and exact gradient of -2L. Throws DomainError like log_posterior.
ValueGrad neg2L_grad(const PosteriorContext& ctx, std::span<const double> omega);

class StencilError : public Error {
 public:
  using Error::Error;
};

/// Hessian of the objective by central differences of its gradient with
/// h_j = eps^(1/3) * max(1, |x_j|), symmetrized. An infeasible stencil point
/// shrinks h_j tenfold once; a second failure throws StencilError.
Eigen::MatrixXd hessian_neg2L(const Objective& f, std::span<const double> x);

}  // namespace obscheck
