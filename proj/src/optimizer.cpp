#include "obscheck/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace obscheck {

void OptConfig::validate() const {
  if (memory < 1) throw ConfigError("optimizer: memory must be positive");
  if (max_iters < 0) throw ConfigError("optimizer: max_iters must be non-negative");
  if (!(grad_tol > 0.0) || !(grad_check > 0.0) || !(eig_ratio_min > 0.0) || !(lvar_max > 0.0))
    throw ConfigError("optimizer: thresholds must be positive");
  if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("optimizer: armijo constant must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("optimizer: backtrack factor must lie in (0, 1)");
  if (max_backtracks < 1) throw ConfigError("optimizer: max_backtracks must be positive");
}

namespace {

using Vec = Eigen::VectorXd;

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

struct Correction {
  Vec s, y;
  double rho;
};

// Two-loop recursion: returns -H g.
Vec lbfgs_direction(const Vec& g, const std::deque<Correction>& hist) {
  Vec q = g;
  std::vector<double> alpha(hist.size());
  for (std::size_t k = hist.size(); k-- > 0;) {
    alpha[k] = hist[k].rho * hist[k].s.dot(q);
    q -= alpha[k] * hist[k].y;
  }
  const auto& last = hist.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const double beta = hist[k].rho * hist[k].y.dot(q);
    q += (alpha[k] - beta) * hist[k].s;
  }
  return -q;
}

}  // namespace

MaxResult maximize(const Objective& f, std::span<const double> x0, const OptConfig& cfg) {
  cfg.validate();
  const std::size_t n = f.dim();
  if (x0.size() != n) throw ConfigError("maximize: start vector has the wrong dimension");

  auto project = [&](Vec x) {
    for (std::size_t j = 0; j < n; ++j) x[j] = std::clamp(x[j], f.lower(j), f.upper(j));
    return x;
  };

  MaxResult out;
  Vec x = project(Vec(Eigen::Map<const Vec>(x0.data(), n)));
  auto start = f.evaluate(to_std(x));
  out.omega_hat = to_std(x);
  if (!start) {
    out.message = "start point is infeasible";
    out.grad_norm = std::numeric_limits<double>::infinity();
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  double fx = start->value;
  out.trace.push_back(fx);
  Vec g = to_vec(start->grad);
  std::deque<Correction> hist;

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    if (inf_norm(g) < cfg.grad_tol) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    Vec xt, gt;
    double ft = 0.0;
    // Try the quasi-Newton direction; on failure retry once along -g.
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Vec d;
      const bool quasi_newton = !hist.empty();
      double step = 1.0;
      if (!hist.empty()) {
        d = lbfgs_direction(g, hist);
        if (!(g.dot(d) < 0.0)) {
          hist.clear();
        }
      }
      if (hist.empty()) {
        d = -g;
        // First move: at most 10% of the parameter scale per coordinate.
        step = std::min(1.0, 0.1 * std::max(1.0, inf_norm(x)) / inf_norm(d));
      }
      for (int ls = 0; ls < cfg.max_backtracks; ++ls, step *= cfg.backtrack) {
        xt = project(x + step * d);
        if (xt == x) break;
        auto trial = f.evaluate(to_std(xt));
        if (!trial) continue;
        const double slope = g.dot(xt - x);
        const Vec trial_g = to_vec(trial->grad);
        const bool sufficient = trial->value <= fx + cfg.armijo * std::min(0.0, slope);
        // At the rounding floor of -2L, accept non-increasing steps that
        // still shrink the gradient.
        const bool floor_step = trial->value <= fx && inf_norm(trial_g) < inf_norm(g);
        if (sufficient || floor_step) {
          accepted = true;
          ft = trial->value;
          gt = trial_g;
          break;
        }
      }
      if (!accepted) {
        if (!quasi_newton) break;
        hist.clear();
      }
    }
    if (!accepted) {
      out.message = "line search found no feasible descent step";
      break;
    }
    Vec s = xt - x;
    Vec y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      hist.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(hist.size()) > cfg.memory) hist.pop_front();
    }
    x = std::move(xt);
    g = std::move(gt);
    fx = ft;
    out.trace.push_back(fx);
  }
  if (!out.converged && inf_norm(g) < cfg.grad_tol) out.converged = true;
  if (!out.converged && out.message.empty()) out.message = "iteration limit reached";
  out.omega_hat = to_std(x);
  out.iterations = iter;
  out.grad_norm = inf_norm(g);
  out.value = fx;
  return out;
}

std::vector<double> local_variance_from_hessian(const Eigen::MatrixXd& h) {
  const Eigen::Index n = h.rows();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  std::vector<double> out(n, std::numeric_limits<double>::infinity());
  if (eig.info() != Eigen::Success) return out;
  const Vec lambda = eig.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();
  const double tiny = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;
  if (scale == 0.0 || (lambda.cwiseAbs().array() <= tiny).any()) return out;
  const Eigen::MatrixXd& v = eig.eigenvectors();
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) acc += v(j, k) * v(j, k) / lambda[k];
    out[j] = 2.0 * acc;
  }
  return out;
}

std::vector<double> local_variance(const Objective& f, std::span<const double> omega_hat) {
  return local_variance_from_hessian(hessian_neg2L(f, omega_hat));
}

CheckReport check_maximum(const Objective& f, const MaxResult& result, const OptConfig& cfg) {
  cfg.validate();
  CheckReport rep;
  auto fail = [&](std::string why) {
    if (rep.diagnostic.empty()) rep.diagnostic = std::move(why);
  };

  const auto at = f.evaluate(result.omega_hat);
  if (!at) {
    rep.grad_norm = std::numeric_limits<double>::infinity();
    fail("estimate is infeasible");
    return rep;
  }
  rep.grad_norm = inf_norm(to_vec(at->grad));
  rep.grad_ok = rep.grad_norm < cfg.grad_check;
  if (!rep.grad_ok) fail("gradient too large");

  Eigen::MatrixXd h;
  try {
    h = hessian_neg2L(f, result.omega_hat);
  } catch (const StencilError& e) {
    fail(std::string("hessian unavailable: ") + e.what());
    return rep;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.info() != Eigen::Success || !h.allFinite()) {
    fail("eigen-decomposition failed");
    return rep;
  }
  const Vec lambda = eig.eigenvalues();
  rep.eigenvalues = to_std(lambda);
  const double lmin = lambda.minCoeff();
  const double lmax = lambda.maxCoeff();
  rep.hessian_pd = lmin > 0.0;
  if (!rep.hessian_pd) fail("hessian not positive definite");
  rep.eig_ratio = lmax > 0.0 ? lmin / lmax : -std::numeric_limits<double>::infinity();
  rep.eig_ratio_ok = rep.eig_ratio > cfg.eig_ratio_min;
  if (!rep.eig_ratio_ok) fail("eigenvalue ratio below threshold (ridge)");
  if (rep.hessian_pd) {
    rep.local_variances = local_variance_from_hessian(h);
    rep.lvar_finite = std::all_of(rep.local_variances.begin(), rep.local_variances.end(),
                                  [&](double v) { return std::isfinite(v) && v < cfg.lvar_max; });
  }
  if (!rep.lvar_finite) fail("local variance not finite (plateau)");
  rep.passed = rep.grad_ok && rep.hessian_pd && rep.eig_ratio_ok && rep.lvar_finite;
  return rep;
}

}  // namespace obscheck
