#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "obscheck/posterior.hpp"
#include "oracles.hpp"

using namespace obscheck;
using namespace obscheck::oracles;

TEST_CASE("oracle_b") {
  const double r = std::sqrt(0.8);
  const std::vector<double> two{r, -r};
  CHECK(oracle_b(two, 0.8).estimate[0] == doctest::Approx(0.8).epsilon(1e-15));
  const std::vector<double> twenty(20, 1.0);
  CHECK(oracle_b(twenty, 0.8).variance[0] == doctest::Approx(0.064));
  const std::vector<double> zeros(4, 0.0);
  const auto o = oracle_b(zeros, 0.8);
  CHECK(o.estimate[0] == 0.0);
  CHECK(o.local_variance[0] == 0.0);
}

TEST_CASE("oracle_ab") {
  const std::vector<double> four{0.0, 0.0, 0.0, 0.0};
  CHECK(oracle_ab(four, 0.6, 0.4).expected_value[1] == doctest::Approx(0.3));
  const double s = std::sqrt(0.4);
  const std::vector<double> rep{0.6 - s * 1.2, 0.6 - s * 0.4, 0.6 + s * 0.4, 0.6 + s * 1.2};
  // Scale the spread so the sample variance is exactly b*.
  const double spread = (1.44 + 0.16) * 2 / 4;
  std::vector<double> z(4);
  for (int i = 0; i < 4; ++i) z[i] = 0.6 + (rep[i] - 0.6) / std::sqrt(spread);
  const auto o = oracle_ab(z, 0.6, 0.4);
  CHECK(o.estimate[0] == doctest::Approx(0.6));
  CHECK(o.estimate[1] == doctest::Approx(0.4));
  CHECK(o.local_variance[0] == doctest::Approx(0.1));
  CHECK(o.local_variance[1] == doctest::Approx(0.08));
  const std::vector<double> flat(5, 1.7);
  CHECK(oracle_ab(flat, 0.6, 0.4).estimate[0] == doctest::Approx(1.7));
  CHECK(oracle_ab(flat, 0.6, 0.4).estimate[1] == doctest::Approx(0.0));
  const std::vector<double> one{1.0};
  CHECK_THROWS(oracle_ab(one, 0.6, 0.4));
}

TEST_CASE("oracle_reciprocal") {
  const std::vector<double> a{2.0, 2.0}, b{1.0, -1.0}, c{0.5, 0.5, 1.0};
  // w_hat = T / sum z: 2 / 4.
  CHECK(oracle_reciprocal(a).estimate[0] == doctest::Approx(0.5));
  CHECK_FALSE(oracle_reciprocal(b).defined);
  CHECK(oracle_reciprocal(c).estimate[0] == doctest::Approx(1.5));
}

TEST_CASE("mean-variance oracle is the stationary point at random observations") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  const ModelSpec model = ModelSpec::make("mv", {{"a", 0.6, {}, {}}, {"b", 0.4, 0.0, {}}}, "a", "sqrt(b)");
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> z(7);
    for (double& v : z) v = n01(rng);
    const auto o = oracle_ab(z, 0.6, 0.4);
    const PosteriorContext ctx(model, z);
    const auto g = neg2L_grad(ctx, o.estimate);
    CHECK(std::abs(g.grad[0]) < 1e-10);
    CHECK(std::abs(g.grad[1]) < 1e-10);
    // Nearby points are worse.
    for (double da : {-1e-3, 1e-3})
      for (double db : {-1e-3, 1e-3}) {
        const std::vector<double> x{o.estimate[0] + da, o.estimate[1] + db};
        CHECK(log_posterior(ctx, x) < log_posterior(ctx, o.estimate));
      }
  }
}

TEST_CASE("estimator moments by simulation agree with the closed forms") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  const int t = 4, n = 200000;
  double sum_vb = 0;
  for (int k = 0; k < n; ++k) {
    std::vector<double> z(t);
    for (double& v : z) v = 0.6 + std::sqrt(0.4) * n01(rng);
    sum_vb += oracle_ab(z, 0.6, 0.4).estimate[1];
  }
  CHECK(sum_vb / n == doctest::Approx(0.3).epsilon(0.01));

  double m = 0, m2 = 0;
  for (int k = 0; k < n; ++k) {
    std::vector<double> z(t);
    for (double& v : z) v = std::sqrt(0.8) * n01(rng);
    const double b = oracle_b(z, 0.8).estimate[0];
    m += b;
    m2 += b * b;
  }
  const double mean = m / n, var = m2 / n - mean * mean;
  CHECK(mean == doctest::Approx(0.8).epsilon(0.01));
  CHECK(var == doctest::Approx(oracle_b(std::vector<double>(t, 0.0), 0.8).variance[0]).epsilon(0.02));
}

TEST_CASE("adaptive simpson and finite differences") {
  CHECK(adaptive_simpson([](double x) { return std::exp(-x * x); }, -10, 10, 1e-12) ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-11));
  const std::vector<double> x{1.0, 2.0};
  const auto g = fd_gradient([](std::span<const double> p) { return p[0] * p[0] * p[1]; }, x, 1e-6);
  CHECK(g[0] == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-8));
}
