#include "obscheck/posterior.hpp"

#include <cmath>
#include <limits>

namespace obscheck {

PosteriorContext::PosteriorContext(ModelSpec model, std::vector<double> obs)
    : model_(std::move(model)), obs_(std::move(obs)) {
  if (obs_.empty()) throw ConfigError("observation vector is empty");
  for (double z : obs_)
    if (!std::isfinite(z)) throw ConfigError("observation vector contains a non-finite value");
}

double PosteriorContext::lower(std::size_t j) const {
  const auto& b = model_.params.at(j).lower;
  return b ? *b : -std::numeric_limits<double>::infinity();
}

double PosteriorContext::upper(std::size_t j) const {
  const auto& b = model_.params.at(j).upper;
  return b ? *b : std::numeric_limits<double>::infinity();
}

std::optional<ValueGrad> PosteriorContext::evaluate(std::span<const double> x) const {
  try {
    return neg2L_grad(*this, x);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

namespace {

struct Residuals {
  double sum = 0.0;     // sum (z - m)
  double sum_sq = 0.0;  // sum (z - m)^2
};

Residuals residuals(const std::vector<double>& obs, double mean) {
  Residuals r;
  for (double z : obs) {
    const double e = z - mean;
    r.sum += e;
    r.sum_sq += e * e;
  }
  return r;
}

void require_positive_scale(double s, const ModelSpec& model) {
  if (!(s > 0.0)) throw DomainError("scale is not positive", to_string(model.scale));
}

}  // namespace

double log_posterior(const PosteriorContext& ctx, std::span<const double> omega) {
  const auto& model = ctx.model();
  const double m = eval(model.mean, omega);
  const double s = eval(model.scale, omega);
  require_positive_scale(s, model);
  const double prior = eval(model.log_prior, omega);
  const Residuals r = residuals(ctx.obs(), m);
  const double big_t = static_cast<double>(ctx.horizon());
  const double value = -big_t * std::log(s) - r.sum_sq / (2.0 * s * s) + prior;
  if (!std::isfinite(value)) throw DomainError("log-posterior is not finite", to_string(model.scale));
  return value;
}

ValueGrad neg2L_grad(const PosteriorContext& ctx, std::span<const double> omega) {
  const auto& model = ctx.model();
  const ValueGrad m = eval_grad(model.mean, omega);
  const ValueGrad s = eval_grad(model.scale, omega);
  require_positive_scale(s.value, model);
  const ValueGrad p = eval_grad(model.log_prior, omega);
  const Residuals r = residuals(ctx.obs(), m.value);
  const double big_t = static_cast<double>(ctx.horizon());
  const double s2 = s.value * s.value;

  ValueGrad out;
  out.value = -2.0 * (-big_t * std::log(s.value) - r.sum_sq / (2.0 * s2) + p.value);
  if (!std::isfinite(out.value)) throw DomainError("log-posterior is not finite", to_string(model.scale));
  out.grad.resize(omega.size());
  for (std::size_t j = 0; j < omega.size(); ++j) {
    out.grad[j] = 2.0 * big_t * s.grad[j] / s.value - 2.0 * r.sum * m.grad[j] / s2 -
                  2.0 * r.sum_sq * s.grad[j] / (s2 * s.value) - 2.0 * p.grad[j];
    if (!std::isfinite(out.grad[j])) throw DomainError("gradient is not finite", to_string(model.mean));
  }
  return out;
}

Eigen::MatrixXd hessian_neg2L(const Objective& f, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n != f.dim()) throw ConfigError("hessian: dimension mismatch");
  const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd h(n, n);
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  for (std::size_t j = 0; j < n; ++j) {
    double step = base_step * std::max(1.0, std::abs(x[j]));
    std::optional<ValueGrad> gp, gm;
    for (int attempt = 0; attempt < 2; ++attempt) {
      xp[j] = x[j] + step;
      xm[j] = x[j] - step;
      gp = f.evaluate(xp);
      gm = f.evaluate(xm);
      if (gp && gm) break;
      step /= 10.0;
    }
    if (!gp || !gm) throw StencilError("finite-difference stencil leaves the feasible region");
    // Use the representable step actually taken.
    const double width = xp[j] - xm[j];
    for (std::size_t i = 0; i < n; ++i) h(i, j) = (gp->grad[i] - gm->grad[i]) / width;
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace obscheck
