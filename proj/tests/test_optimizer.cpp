#include <cmath>
#include <random>

#include <doctest.h>

#include "obscheck/dirac_mixture.hpp"
#include "obscheck/optimizer.hpp"
#include "oracles.hpp"

using namespace obscheck;

namespace {

// f(x) = sum_j (x_j - c_j)^2 with optional bounds.
class Quadratic : public Objective {
 public:
  Quadratic(std::vector<double> c, double lo = -std::numeric_limits<double>::infinity())
      : c_(std::move(c)), lo_(lo) {}
  std::size_t dim() const override { return c_.size(); }
  std::optional<ValueGrad> evaluate(std::span<const double> x) const override {
    ValueGrad vg;
    vg.grad.resize(c_.size());
    for (std::size_t j = 0; j < c_.size(); ++j) {
      if (x[j] < lo_) return std::nullopt;
      vg.value += (x[j] - c_[j]) * (x[j] - c_[j]);
      vg.grad[j] = 2.0 * (x[j] - c_[j]);
    }
    return vg;
  }
  double lower(std::size_t) const override { return lo_; }

 private:
  std::vector<double> c_;
  double lo_;
};

// Rosenbrock valley, a harder test of the quasi-Newton updates.
class Rosenbrock : public Objective {
 public:
  std::size_t dim() const override { return 2; }
  std::optional<ValueGrad> evaluate(std::span<const double> x) const override {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    return ValueGrad{a * a + 100.0 * b * b, {-2.0 * a - 400.0 * x[0] * b, 200.0 * b}};
  }
};

ModelSpec variance_model() { return ModelSpec::make("var", {{"b", 0.8, 0.0, {}}}, "0", "sqrt(b)"); }
ModelSpec mean_variance_model() {
  return ModelSpec::make("mv", {{"a", 0.6, {}, {}}, {"b", 0.4, 0.0, {}}}, "a", "sqrt(b)");
}

std::vector<double> representative_obs(int t, double mean, double scale) {
  const Eigen::VectorXd e = representative_disturbances(t, LcdConfig{});
  std::vector<double> z(t);
  for (int i = 0; i < t; ++i) z[i] = mean + scale * e[i];
  return z;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("synthetic quadratic") {
  const Quadratic f({3.0});
  const std::vector<double> x0{0.0};
  const auto r = maximize(f, x0, OptConfig{});
  CHECK(r.converged);
  CHECK(std::abs(r.omega_hat[0] - 3.0) < 1e-8);
  CHECK(non_increasing(r.trace));
}

TEST_CASE("rosenbrock converges") {
  const Rosenbrock f;
  const std::vector<double> x0{-1.2, 1.0};
  OptConfig cfg;
  cfg.max_iters = 2000;
  const auto r = maximize(f, x0, cfg);
  CHECK(r.converged);
  CHECK(std::abs(r.omega_hat[0] - 1.0) < 1e-6);
  CHECK(std::abs(r.omega_hat[1] - 1.0) < 1e-6);
  CHECK(non_increasing(r.trace));
}

TEST_CASE("bounds are respected and infeasible trials rejected") {
  const Quadratic f({-2.0, 1.0}, 0.5);
  const std::vector<double> x0{3.0, 3.0};
  const auto r = maximize(f, x0, OptConfig{});
  CHECK(r.omega_hat[0] >= 0.5);
  CHECK(r.omega_hat[0] == doctest::Approx(0.5));
  CHECK(r.omega_hat[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("infeasible start is reported, not thrown") {
  const Quadratic f({1.0}, 0.0);
  class Wall : public Objective {
   public:
    std::size_t dim() const override { return 1; }
    std::optional<ValueGrad> evaluate(std::span<const double>) const override { return std::nullopt; }
  } wall;
  const std::vector<double> x0{1.0};
  const auto r = maximize(wall, x0, OptConfig{});
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.message.empty());
}

TEST_CASE("unknown-variance model, representative vectors") {
  for (int t : {4, 12, 20}) {
    const PosteriorContext ctx(variance_model(), representative_obs(t, 0.0, std::sqrt(0.8)));
    const std::vector<double> x0{1.1};  // b* perturbed by +0.3
    const auto r = maximize(ctx, x0, OptConfig{});
    INFO("T=" << t);
    CHECK(r.converged);
    CHECK(std::abs(r.omega_hat[0] - 0.8) < 1e-6);
    CHECK(non_increasing(r.trace));
    const auto rep = check_maximum(ctx, r, OptConfig{});
    CHECK(rep.passed);
    CHECK(rep.diagnostic.empty());
    REQUIRE(rep.local_variances.size() == 1);
    CHECK(rep.local_variances[0] == doctest::Approx(2.0 * 0.64 / t).epsilon(1e-6));
  }
}

TEST_CASE("mean-and-variance model, representative vectors") {
  const double expected[3][2] = {{0.1, 0.08}, {0.6 / 18, 0.32 / 12}, {0.02, 0.016}};
  int row = 0;
  for (int t : {4, 12, 20}) {
    const PosteriorContext ctx(mean_variance_model(), representative_obs(t, 0.6, std::sqrt(0.4)));
    const std::vector<double> x0{0.6, 0.4};
    const auto r = maximize(ctx, x0, OptConfig{});
    const auto rep = check_maximum(ctx, r, OptConfig{});
    INFO("T=" << t);
    CHECK(rep.passed);
    CHECK(std::abs(r.omega_hat[0] - 0.6) < 1e-6);
    CHECK(std::abs(r.omega_hat[1] - 0.4) < 1e-6);
    CHECK(rep.local_variances[0] == doctest::Approx(expected[row][0]).epsilon(1e-6));
    CHECK(rep.local_variances[1] == doctest::Approx(expected[row][1]).epsilon(1e-6));
    ++row;
  }
}

TEST_CASE("ratio model with scale sqrt(a/b) fails the ridge check") {
  const ModelSpec model =
      ModelSpec::make("m1", {{"a", 0.6, 0.0, {}}, {"b", 0.4, 0.0, {}}}, "a / b", "sqrt(a / b)");
  for (int t : {2, 4, 12}) {
    const PosteriorContext ctx(model, representative_obs(t, 1.5, std::sqrt(1.5)));
    const std::vector<double> x0{0.6, 0.4};
    const auto r = maximize(ctx, x0, OptConfig{});
    const auto rep = check_maximum(ctx, r, OptConfig{});
    INFO("T=" << t << " diag=" << rep.diagnostic);
    CHECK_FALSE(rep.eig_ratio_ok);
    CHECK_FALSE(rep.passed);
  }
}

TEST_CASE("gradient check threshold") {
  const Quadratic f({3.0});
  MaxResult candidate;
  candidate.omega_hat = {3.0 + 1e-5};  // gradient 2e-5
  const auto rep = check_maximum(f, candidate, OptConfig{});
  CHECK_FALSE(rep.grad_ok);
  CHECK(rep.hessian_pd);
  CHECK(rep.eig_ratio_ok);
  CHECK(rep.lvar_finite);
  CHECK_FALSE(rep.passed);
  CHECK(rep.diagnostic == "gradient too large");
}

TEST_CASE("passing checks imply a positive minimum eigenvalue on re-decomposition") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(6);
    for (double& v : z) v = 0.6 + std::sqrt(0.4) * n01(rng);
    const PosteriorContext ctx(mean_variance_model(), z);
    const std::vector<double> x0{0.6, 0.4};
    const auto r = maximize(ctx, x0, OptConfig{});
    const auto rep = check_maximum(ctx, r, OptConfig{});
    if (!rep.passed) continue;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_neg2L(ctx, r.omega_hat));
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("check thresholds never change the estimate") {
  const PosteriorContext ctx(mean_variance_model(), {0.1, 0.9, 0.4, 1.3, 0.2});
  const std::vector<double> x0{0.6, 0.4};
  OptConfig a, b;
  b.grad_check *= 100;
  b.eig_ratio_min *= 100;
  b.lvar_max *= 100;
  const auto ra = maximize(ctx, x0, a);
  const auto rb = maximize(ctx, x0, b);
  CHECK(ra.omega_hat == rb.omega_hat);
  CHECK(check_maximum(ctx, ra, a).local_variances == check_maximum(ctx, ra, b).local_variances);
}

TEST_CASE("local variance matches the oracles on random observation vectors") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> z(8);
    for (double& v : z) v = 0.6 + std::sqrt(0.4) * n01(rng);
    const auto o = oracles::oracle_ab(z, 0.6, 0.4);
    const PosteriorContext ctx(mean_variance_model(), z);
    const std::vector<double> x0{0.6, 0.4};
    const auto r = maximize(ctx, x0, OptConfig{});
    CHECK(std::abs(r.omega_hat[0] - o.estimate[0]) < 1e-6);
    CHECK(std::abs(r.omega_hat[1] - o.estimate[1]) < 1e-6);
    const auto lv = local_variance(ctx, r.omega_hat);
    CHECK(lv[0] == doctest::Approx(o.local_variance[0]).epsilon(1e-6));
    CHECK(lv[1] == doctest::Approx(o.local_variance[1]).epsilon(1e-6));
  }
}

TEST_CASE("singular hessian gives infinite local variance") {
  Eigen::MatrixXd h(2, 2);
  h << 1.0, 1.0, 1.0, 1.0;
  const auto lv = local_variance_from_hessian(h);
  CHECK(std::isinf(lv[0]));
  CHECK(std::isinf(lv[1]));
  Eigen::MatrixXd d = Eigen::Vector2d(2.0, 8.0).asDiagonal();
  const auto ok = local_variance_from_hessian(d);
  CHECK(ok[0] == doctest::Approx(1.0));
  CHECK(ok[1] == doctest::Approx(0.25));
}

TEST_CASE("config validation") {
  OptConfig cfg;
  cfg.grad_check = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OptConfig{};
  cfg.backtrack = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
