#include "obscheck/dirac_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "obscheck/errors.hpp"
#include "obscheck/parallel.hpp"
#include "obscheck/quadrature.hpp"
#include "obscheck/sample_cache.hpp"

namespace obscheck {

void LcdConfig::validate() const {
  if (!(b_max > 0.0) || !std::isfinite(b_max)) throw ConfigError("lcd: b_max must be positive");
  if (quad_nodes < 2) throw ConfigError("lcd: quad_nodes must be at least 2");
  if (max_iters < 0) throw ConfigError("lcd: max_iters must be non-negative");
  if (!(step_tol > 0.0)) throw ConfigError("lcd: step_tol must be positive");
}

std::string LcdConfig::key() const {
  std::ostringstream os;
  os.precision(17);
  os << "b" << b_max << "_q" << quad_nodes << "_i" << max_iters << "_t" << step_tol << "_s" << seed;
  return os.str();
}

DiracMixture DiracMixture::from_free_points(const Eigen::MatrixXd& free_points, bool with_origin) {
  const Eigen::Index h = free_points.rows();
  DiracMixture mix;
  mix.points.resize(2 * h + (with_origin ? 1 : 0), free_points.cols());
  mix.points.topRows(h) = free_points;
  mix.points.middleRows(h, h) = -free_points;
  if (with_origin) mix.points.row(2 * h).setZero();
  return mix;
}

bool DiracMixture::is_canonical() const {
  const int h = free_count();
  for (int i = 0; i < h; ++i)
    for (int k = 0; k < dim(); ++k)
      if (points(h + i, k) != -points(i, k)) return false;
  if (count() % 2 == 1)
    for (int k = 0; k < dim(); ++k)
      if (points(count() - 1, k) != 0.0) return false;
  return true;
}

Eigen::VectorXd DiracMixture::sample_mean() const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim());
  const int h = free_count();
  for (int i = 0; i < h; ++i) sum += (points.row(i) + points.row(h + i)).transpose();
  if (count() % 2 == 1) sum += points.row(count() - 1).transpose();
  return sum / static_cast<double>(count());
}

Eigen::MatrixXd DiracMixture::sample_covariance() const {
  return (points.transpose() * points) / static_cast<double>(count());
}

namespace {

// Per-node constants of the closed-form LCD terms for a fixed dimension.
//   phi(r2) = sum_n c1_n exp(-u_n r2)   -> T1 pair kernel, already b-weighted
//   psi(s2) = sum_n c2_n exp(-v_n s2)   -> T2 cross kernel
// Nodes are stored from the largest b downward so that exp arguments grow and
// the loop can stop at underflow.
struct LcdKernel {
  std::vector<double> c1, u, c2, v;
  double t3 = 0.0;
  double phi0 = 0.0;
  double psi0 = 0.0;

  LcdKernel(int d, const LcdConfig& cfg) {
    const QuadratureRule rule = gauss_legendre(cfg.quad_nodes, 0.0, cfg.b_max);
    const double dd = d;
    for (int n = cfg.quad_nodes - 1; n >= 0; --n) {
      const double b = rule.nodes[n];
      const double w = rule.weights[n];
      const double b2 = b * b;
      c1.push_back(w * std::pow(std::numbers::pi * b2, 0.5 * dd));
      u.push_back(1.0 / (4.0 * b2));
      c2.push_back(w * std::pow(b2 * std::sqrt(2.0 * std::numbers::pi / (1.0 + 2.0 * b2)), dd));
      v.push_back(1.0 / (2.0 * (1.0 + 2.0 * b2)));
      t3 += w * std::pow(b2 / (1.0 + b2), dd) * std::pow(std::numbers::pi * (1.0 + b2), 0.5 * dd);
    }
    for (double c : c1) phi0 += c;
    for (double c : c2) psi0 += c;
  }

  // Returns phi(r2) and writes phi'(r2).
  double phi(double r2, double& dphi) const {
    double val = 0.0, der = 0.0;
    for (std::size_t n = 0; n < c1.size(); ++n) {
      const double a = u[n] * r2;
      if (a > 745.0) break;
      const double e = c1[n] * std::exp(-a);
      val += e;
      der -= u[n] * e;
    }
    dphi = der;
    return val;
  }

  double psi(double s2, double& dpsi) const {
    double val = 0.0, der = 0.0;
    for (std::size_t n = 0; n < c2.size(); ++n) {
      const double a = v[n] * s2;
      if (a > 745.0) break;
      const double e = c2[n] * std::exp(-a);
      val += e;
      der -= v[n] * e;
    }
    dpsi = der;
    return val;
  }
};

double checked(double value) {
  if (!std::isfinite(value)) throw InvalidMixture("lcd distance is not finite");
  return value;
}

// Full pairwise evaluation over arbitrary points.
double general_distance(const Eigen::MatrixXd& pts, const LcdKernel& ker, Eigen::MatrixXd* grad) {
  const Eigen::Index m = pts.rows();
  const double mm = static_cast<double>(m);
  double pair_sum = 0.0, cross_sum = 0.0;
  if (grad) grad->setZero(m, pts.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::RowVectorXd diff = pts.row(i) - pts.row(j);
      double dphi = 0.0;
      pair_sum += ker.phi(diff.squaredNorm(), dphi);
      if (grad) grad->row(i) += (4.0 * dphi / (mm * mm)) * diff;
    }
    double dpsi = 0.0;
    cross_sum += ker.psi(pts.row(i).squaredNorm(), dpsi);
    if (grad) grad->row(i) -= (2.0 / mm) * 2.0 * dpsi * pts.row(i);
  }
  return checked(pair_sum / (mm * mm) - 2.0 * cross_sum / mm + ker.t3);
}

// Evaluation over the free points of a canonical mixture. Pair terms for
// i <= j are computed once per row; rows are reduced in index order, so the
// result does not depend on the worker count.
double symmetric_distance(const Eigen::MatrixXd& free, bool with_origin, const LcdKernel& ker,
                          unsigned threads, Eigen::MatrixXd* grad) {
  const Eigen::Index h = free.rows();
  const Eigen::Index d = free.cols();
  const double mm = static_cast<double>(2 * h + (with_origin ? 1 : 0));

  // Row-major copy for contiguous point access.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f = free;
  std::vector<double> row_sum(h, 0.0);
  std::vector<std::vector<double>> dminus(h), dplus(h);

  parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t ii) {
    const Eigen::Index i = static_cast<Eigen::Index>(ii);
    const double* fi = f.data() + i * d;
    auto& dm = dminus[i];
    auto& dp = dplus[i];
    dm.resize(h - i);
    dp.resize(h - i);
    double off = 0.0;
    double diag = 0.0;
    for (Eigen::Index j = i; j < h; ++j) {
      const double* fj = f.data() + j * d;
      double r2m = 0.0, r2p = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double a = fi[k] - fj[k];
        const double b = fi[k] + fj[k];
        r2m += a * a;
        r2p += b * b;
      }
      const double vm = ker.phi(r2m, dm[j - i]);
      const double vp = ker.phi(r2p, dp[j - i]);
      if (j == i)
        diag = vm + vp;
      else
        off += vm + vp;
    }
    row_sum[i] = diag + 2.0 * off;
  });

  double pair_sum_free = 0.0;
  for (double s : row_sum) pair_sum_free += s;

  double origin_terms = 0.0, cross_sum = 0.0;
  std::vector<double> dphi_origin(h), dpsi(h);
  for (Eigen::Index i = 0; i < h; ++i) {
    const double s2 = free.row(i).squaredNorm();
    if (with_origin) origin_terms += ker.phi(s2, dphi_origin[i]);
    cross_sum += ker.psi(s2, dpsi[i]);
  }
  double pair_sum = 2.0 * pair_sum_free;
  if (with_origin) pair_sum += 4.0 * origin_terms + ker.phi0;
  cross_sum = 2.0 * cross_sum + (with_origin ? ker.psi0 : 0.0);
  const double value = checked(pair_sum / (mm * mm) - 2.0 * cross_sum / mm + ker.t3);

  if (grad) {
    grad->resize(h, d);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g(h, d);
    parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t ii) {
      const Eigen::Index i = static_cast<Eigen::Index>(ii);
      const double* fi = f.data() + i * d;
      double* gi = g.data() + i * d;
      std::fill(gi, gi + d, 0.0);
      for (Eigen::Index j = 0; j < h; ++j) {
        const double* fj = f.data() + j * d;
        const double am = i <= j ? dminus[i][j - i] : dminus[j][i - j];
        const double ap = i <= j ? dplus[i][j - i] : dplus[j][i - j];
        for (Eigen::Index k = 0; k < d; ++k) gi[k] += am * (fi[k] - fj[k]) + ap * (fi[k] + fj[k]);
      }
      // d(2S)/df_i = 8 * sum_j [...]
      double origin_coef = with_origin ? 8.0 * dphi_origin[i] : 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double pair_part = 8.0 * gi[k] + origin_coef * fi[k];
        gi[k] = pair_part / (mm * mm) - (2.0 / mm) * 4.0 * dpsi[i] * fi[k];
      }
    });
    *grad = g;
    if (!grad->allFinite()) throw InvalidMixture("lcd gradient is not finite");
  }
  return value;
}

void require_nonempty(const DiracMixture& mix) {
  if (mix.dim() < 1 || mix.count() < 1) throw InvalidMixture("mixture must have dim >= 1 and count >= 1");
}

}  // namespace

double lcd_distance(const DiracMixture& mix, const LcdConfig& cfg) {
  require_nonempty(mix);
  cfg.validate();
  const LcdKernel ker(mix.dim(), cfg);
  if (mix.count() > 1 && mix.is_canonical())
    return symmetric_distance(mix.points.topRows(mix.free_count()), mix.count() % 2 == 1, ker, 1,
                              nullptr);
  return general_distance(mix.points, ker, nullptr);
}

Eigen::MatrixXd lcd_point_gradient(const DiracMixture& mix, const LcdConfig& cfg) {
  require_nonempty(mix);
  cfg.validate();
  const LcdKernel ker(mix.dim(), cfg);
  Eigen::MatrixXd grad;
  general_distance(mix.points, ker, &grad);
  return grad;
}

Eigen::MatrixXd lcd_gradient(const DiracMixture& mix, const LcdConfig& cfg) {
  require_nonempty(mix);
  if (!mix.is_canonical()) throw InvalidMixture("lcd_gradient requires the antithetic layout");
  cfg.validate();
  const LcdKernel ker(mix.dim(), cfg);
  const int h = mix.free_count();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mix.count(), mix.dim());
  if (h == 0) return out;
  Eigen::MatrixXd free_grad;
  symmetric_distance(mix.points.topRows(h), mix.count() % 2 == 1, ker, 1, &free_grad);
  out.topRows(h) = free_grad;
  return out;
}

Eigen::MatrixXd standard_normal_matrix(int rows, int cols, std::uint64_t seed) {
  Eigen::MatrixXd out(rows, cols);
  std::mt19937_64 rng(seed);
  // Box-Muller on raw engine output keeps the draws identical across
  // standard-library implementations.
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  double spare = 0.0;
  bool have_spare = false;
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) {
      if (have_spare) {
        out(i, k) = spare;
        have_spare = false;
        continue;
      }
      const double r = std::sqrt(-2.0 * std::log(uniform()));
      const double theta = 2.0 * std::numbers::pi * uniform();
      out(i, k) = r * std::cos(theta);
      spare = r * std::sin(theta);
      have_spare = true;
    }
  }
  return out;
}

Eigen::MatrixXd random_disturbance_matrix(int horizon, int count, std::uint64_t seed) {
  if (horizon < 1 || count < 1) throw InvalidMixture("random disturbances need T >= 1 and K >= 1");
  return standard_normal_matrix(count, horizon, seed);
}

Eigen::MatrixXd initial_free_points(int d, int m, std::uint64_t seed) {
  const int h = m / 2;
  Eigen::MatrixXd free = standard_normal_matrix(h, d, seed);
  for (int k = 0; k < d && h > 0; ++k) {
    const double second_moment = 2.0 * free.col(k).squaredNorm() / m;
    if (second_moment > 0.0) free.col(k) /= std::sqrt(second_moment);
  }
  return free;
}

Placement place_points(int d, int m, const LcdConfig& cfg, unsigned threads) {
  if (d < 1 || m < 1) throw InvalidMixture("placement needs d >= 1 and M >= 1");
  cfg.validate();
  Placement out;
  out.with_origin = (m % 2 == 1);
  out.free_points = initial_free_points(d, m, cfg.seed);
  if (m / 2 == 0) {
    out.converged = true;
    return out;
  }
  const LcdKernel ker(d, cfg);
  Eigen::MatrixXd grad;
  double value = symmetric_distance(out.free_points, out.with_origin, ker, threads, &grad);
  out.initial_distance = value;

  constexpr double kArmijo = 1e-4;
  double gnorm = grad.cwiseAbs().maxCoeff();
  double step = gnorm > 0.0 ? 0.1 / gnorm : 1.0;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    if (gnorm < cfg.step_tol) {
      out.converged = true;
      break;
    }
    const double g2 = grad.squaredNorm();
    Eigen::MatrixXd trial;
    Eigen::MatrixXd trial_grad;
    double trial_value = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = out.free_points - step * grad;
      try {
        trial_value = symmetric_distance(trial, out.with_origin, ker, threads, &trial_grad);
        if (trial_value <= value - kArmijo * step * g2) {
          accepted = true;
          break;
        }
      } catch (const InvalidMixture&) {
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No further decrease is representable: the objective is at its
      // floating-point floor.
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd s = trial - out.free_points;
    const Eigen::MatrixXd y = trial_grad - grad;
    const double sy = (s.array() * y.array()).sum();
    const double decrease = value - trial_value;
    out.free_points = std::move(trial);
    grad = std::move(trial_grad);
    gnorm = grad.cwiseAbs().maxCoeff();
    const double previous = value;
    value = trial_value;
    // Barzilai-Borwein trial step, capped at unit coordinate movement.
    step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    if (gnorm > 0.0) step = std::min(step, 1.0 / gnorm);
    if (decrease <= cfg.step_tol * std::max(std::abs(previous), 1e-300)) {
      out.converged = true;
      ++iter;
      break;
    }
  }
  if (!out.converged && gnorm < cfg.step_tol) out.converged = true;
  out.iterations = iter;
  out.distance = value;
  out.grad_norm = gnorm;
  return out;
}

DiracMixture optimize_mixture(int d, int m, const LcdConfig& cfg, unsigned threads) {
  if (d < 1 || m < 1) throw InvalidMixture("optimize_mixture needs d >= 1 and M >= 1");
  cfg.validate();
  if (m == 1) {
    DiracMixture mix;
    mix.points = Eigen::MatrixXd::Zero(1, d);
    mix.distance = lcd_distance(mix, cfg);
    return mix;
  }
  const Placement placed = place_points(d, m, cfg, threads);
  Eigen::MatrixXd whitened = placed.free_points;

  // Whitening: p -> C^{-1/2} p with C the second moment of the placed points.
  // With fewer pairs than dimensions C is singular and the points stay as placed.
  const Eigen::MatrixXd cov = 2.0 * (placed.free_points.transpose() * placed.free_points) / m;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff()) {
    const Eigen::MatrixXd inv_sqrt = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                     eig.eigenvectors().transpose();
    whitened = placed.free_points * inv_sqrt;
  }

  DiracMixture mix = DiracMixture::from_free_points(whitened, placed.with_origin);
  mix.converged = placed.converged;
  mix.iterations = placed.iterations;
  const LcdKernel ker(d, cfg);
  mix.distance = symmetric_distance(whitened, placed.with_origin, ker, threads, nullptr);
  return mix;
}

Eigen::VectorXd representative_disturbances(int horizon, const LcdConfig& cfg, const SampleCache* cache) {
  if (horizon < 1) throw InvalidMixture("horizon must be positive");
  const DiracMixture mix = cache ? cache->get(1, horizon, cfg) : optimize_mixture(1, horizon, cfg);
  Eigen::VectorXd eps = mix.points.col(0);
  std::sort(eps.data(), eps.data() + eps.size());
  return eps;
}

Eigen::MatrixXd design_disturbance_matrix(int horizon, int count, const LcdConfig& cfg, const SampleCache* cache,
                                          unsigned threads) {
  if (horizon < 1) throw InvalidMixture("horizon must be positive");
  if (count < 2) throw InvalidMixture("design disturbance matrix needs K >= 2");
  const DiracMixture mix = cache ? cache->get(horizon, count, cfg, threads) : optimize_mixture(horizon, count, cfg, threads);
  return mix.points;
}

}  // namespace obscheck
