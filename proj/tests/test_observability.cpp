#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <doctest.h>

#include "obscheck/errors.hpp"
#include "obscheck/observability.hpp"

using namespace obscheck;

namespace {

ModelSpec bundled(const char* file) { return load_model_file(std::filesystem::path(OBSCHECK_MODELS_DIR) / file); }

StudyConfig small_study(const char* file, int k = 20) {
  StudyConfig cfg{.model = bundled(file)};
  cfg.horizons = {4, 12};
  cfg.K = k;
  cfg.cache_dir = OBSCHECK_TEST_CACHE;
  return cfg;
}

bool ridge_or_plateau(const std::string& diag) {
  return diag.find("ridge") != std::string::npos || diag.find("plateau") != std::string::npos ||
         diag.find("positive definite") != std::string::npos;
}

}  // namespace

TEST_CASE("design observations") {
  SUBCASE("unknown variance, T=2") {
    const auto z = make_design_observations(bundled("variance.json"), Eigen::VectorXd(Eigen::Vector2d(-1.0, 1.0)));
    CHECK(z[0] == doctest::Approx(-std::sqrt(0.8)));
    CHECK(z[1] == doctest::Approx(std::sqrt(0.8)));
  }
  SUBCASE("mean and variance") {
    const auto z = make_design_observations(bundled("mean_variance.json"), Eigen::VectorXd(Eigen::Vector2d(-1.0, 1.0)));
    CHECK(z[0] == doctest::Approx(0.6 - std::sqrt(0.4)));
    CHECK(z[1] == doctest::Approx(0.6 + std::sqrt(0.4)));
  }
  SUBCASE("zero disturbances give the mean") {
    const Eigen::MatrixXd z = make_design_observations(bundled("ratio_sqrt_a.json"), Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 4)));
    CHECK((z.array() - 1.5).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("part I recovers the true values exactly") {
  StudyConfig cfg = small_study("variance.json");
  cfg.start_shift = 0.3;
  for (int t : {4, 12, 20}) {
    const auto p = run_part1(cfg.model, t, cfg);
    INFO("T=" << t);
    CHECK(p.check_report.passed);
    CHECK(std::abs(p.max_result.omega_hat[0] - 0.8) < 1e-9);
    CHECK(p.local_variances[0] == doctest::Approx(1.28 / t).epsilon(1e-6));
  }
  const StudyConfig mv = small_study("mean_variance.json");
  const auto p = run_part1(mv.model, 20, mv);
  CHECK(p.check_report.passed);
  CHECK(std::abs(p.max_result.omega_hat[0] - 0.6) < 1e-9);
  CHECK(std::abs(p.max_result.omega_hat[1] - 0.4) < 1e-9);
  CHECK(p.local_variances[0] == doctest::Approx(0.02).epsilon(1e-6));
  CHECK(p.local_variances[1] == doctest::Approx(0.016).epsilon(1e-6));
}

TEST_CASE("constant-scale model: part I recovers the location exactly") {
  const ModelSpec model = ModelSpec::make("loc", {{"mu", 1.7, {}, {}}}, "mu", "2");
  StudyConfig cfg{.model = model};
  cfg.cache_dir = OBSCHECK_TEST_CACHE;
  cfg.start_shift = -0.4;
  const auto p = run_part1(model, 12, cfg);
  CHECK(p.check_report.passed);
  CHECK(std::abs(p.max_result.omega_hat[0] - 1.7) < 1e-9);
}

TEST_CASE("product model fails part I at T=2") {
  const StudyConfig cfg = small_study("product_ridge.json");
  const auto p = run_part1(cfg.model, 2, cfg);
  CHECK_FALSE(p.check_report.passed);
  CHECK(ridge_or_plateau(p.check_report.diagnostic));
}

TEST_CASE("unobservable models have zero passing runs") {
  for (const char* file : {"infex.json", "ratio_ridge.json", "product_ridge.json"}) {
    const auto rep = run_study(small_study(file, 10));
    INFO(file);
    CHECK(rep.verdict == Verdict::NotObservable);
    CHECK(rep.part1_passed == 0);
    CHECK(rep.part2_passed == 0);
    for (const auto& h : rep.horizons) {
      CHECK(ridge_or_plateau(h.part1.check_report.diagnostic));
      for (const auto& r : h.part2.runs) CHECK(ridge_or_plateau(r.failure));
      CHECK(h.part2.empirical_mean.empty());
    }
  }
}

TEST_CASE("observable models") {
  for (const char* file : {"variance.json", "mean_variance.json", "ratio_sqrt_a.json", "ratio_sqrt_ab.json"}) {
    const auto rep = run_study(small_study(file, 20));
    INFO(file);
    CHECK(rep.verdict == Verdict::Observable);
    CHECK(rep.part1_passed == 2);
    CHECK(rep.part2_passed == rep.part2_total);
  }
}

TEST_CASE("undefined estimates are tallied as failures") {
  StudyConfig cfg{.model = bundled("reciprocal.json")};
  // z = 2 + eps; the first row sums to zero.
  Eigen::MatrixXd eps(3, 2);
  eps << -2.0, -2.0, 0.1, -0.1, 0.5, -0.3;
  const auto p = run_part2_on(cfg.model, eps, cfg);
  CHECK(p.K == 3);
  CHECK(p.n_failed == 1);
  CHECK(p.n_passed == 2);
  CHECK_FALSE(p.runs[0].passed);
  CHECK_FALSE(p.runs[0].failure.empty());
  CHECK(p.runs[1].passed);
  CHECK(p.runs[1].max_result.omega_hat[0] == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("part II statistics") {
  StudyConfig cfg = small_study("variance.json", 40);
  const auto p = run_part2(cfg.model, 4, 40, cfg);
  REQUIRE(p.n_passed == 40);
  double mean = 0;
  for (const auto& r : p.runs) mean += r.max_result.omega_hat[0];
  mean /= 40;
  double var = 0, lvar = 0;
  for (const auto& r : p.runs) {
    var += (r.max_result.omega_hat[0] - mean) * (r.max_result.omega_hat[0] - mean);
    lvar += r.check_report.local_variances[0];
  }
  CHECK(p.empirical_mean[0] == doctest::Approx(mean).epsilon(1e-12));
  CHECK(p.empirical_variance[0] == doctest::Approx(var / 39).epsilon(1e-12));
  CHECK(p.mean_local_variance[0] == doctest::Approx(lvar / 40).epsilon(1e-12));
  // Whitened design points: the mean of b_hat is exactly b*.
  CHECK(p.empirical_mean[0] == doctest::Approx(0.8).epsilon(1e-9));
  for (std::size_t k = 0; k < p.runs.size(); ++k) CHECK(p.runs[k].k == static_cast<int>(k) + 1);
}

TEST_CASE("single passing run has undefined variance") {
  PartIIResult p;
  p.K = 2;
  RunRecord a, b;
  a.k = 1;
  a.passed = true;
  a.max_result.omega_hat = {0.5};
  a.check_report.local_variances = {0.1};
  b.k = 2;
  b.failure = "gradient too large";
  p.runs = {a, b};
  summarize(p, 1);
  CHECK(p.n_passed == 1);
  CHECK(p.n_failed == 1);
  CHECK(p.empirical_mean[0] == 0.5);
  CHECK(std::isnan(p.empirical_variance[0]));
}

TEST_CASE("results do not depend on thread count or run order") {
  StudyConfig cfg = small_study("mean_variance.json", 30);
  const auto one = run_part2(cfg.model, 4, 30, cfg);
  cfg.threads = 4;
  const auto four = run_part2(cfg.model, 4, 30, cfg);
  CHECK(one.empirical_mean == four.empirical_mean);
  CHECK(one.empirical_variance == four.empirical_variance);
  for (int k = 0; k < 30; ++k) CHECK(one.runs[k].max_result.omega_hat == four.runs[k].max_result.omega_hat);

  PartIIResult reversed = one;
  std::reverse(reversed.runs.begin(), reversed.runs.end());
  summarize(reversed, 2);
  for (int j = 0; j < 2; ++j) {
    CHECK(reversed.empirical_mean[j] == doctest::Approx(one.empirical_mean[j]).epsilon(1e-12));
    CHECK(reversed.empirical_variance[j] == doctest::Approx(one.empirical_variance[j]).epsilon(1e-12));
  }
}

TEST_CASE("verdict rule") {
  StudyReport rep;
  rep.horizons.resize(2);
  CHECK(decide_verdict(rep) == Verdict::NotObservable);
  rep.horizons[1].part2.n_passed = 2;
  CHECK(decide_verdict(rep) == Verdict::Observable);
  rep.horizons[1].part2.n_passed = 1;  // one passing run removed
  CHECK(decide_verdict(rep) == Verdict::Observable);
  rep.horizons[1].part2.n_passed = 0;
  rep.horizons[0].part1.check_report.passed = true;
  CHECK(decide_verdict(rep) == Verdict::Observable);
  CHECK(std::string(to_string(Verdict::NotObservable)) == "NOT_OBSERVABLE");
}

TEST_CASE("consistency trend and serialization") {
  StudyConfig cfg = small_study("variance.json", 50);
  cfg.horizons = {4, 12, 20};
  cfg.random_baseline = true;
  const auto rep = run_study(cfg);
  CHECK(rep.consistency.all_non_increasing);
  REQUIRE(rep.horizons[0].random_baseline.has_value());
  CHECK(rep.horizons[0].random_baseline->K == 50);

  const auto j = to_json(rep);
  CHECK(j.at("verdict") == "OBSERVABLE");
  CHECK(j.at("horizons").size() == 3);
  CHECK(j.at("horizons")[0].at("part2").at("runs").size() == 50);
  CHECK(j.at("horizons")[0].contains("random_baseline"));
  CHECK(report_text(rep) == report_text(rep));

  std::ostringstream csv;
  write_plot_csv(csv, rep);
  const std::string text = csv.str();
  CHECK(text.rfind("T,k,param,estimate\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 150);

  const std::string rendered = render_report(j);
  CHECK(rendered.find("OBSERVABLE") != std::string::npos);
  CHECK(rendered.find("LVar") != std::string::npos);
}

TEST_CASE("rendering an empty part II") {
  const auto rep = run_study(small_study("infex.json", 4));
  const std::string rendered = render_report(to_json(rep));
  CHECK(rendered.find("0 passing runs") != std::string::npos);
  CHECK(rendered.find("NOT_OBSERVABLE") != std::string::npos);
  CHECK_THROWS_AS(render_report(nlohmann::json::parse("{\"horizons\": 3}")), ConfigError);
}

TEST_CASE("study config validation") {
  StudyConfig cfg = small_study("variance.json");
  cfg.K = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.K = 2;
  cfg.horizons.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
