#include "obscheck/observability.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "obscheck/errors.hpp"
#include "obscheck/parallel.hpp"
#include "obscheck/sample_cache.hpp"

namespace obscheck {

void StudyConfig::validate() const {
  if (horizons.empty()) throw ConfigError("study needs at least one horizon T");
  for (int t : horizons)
    if (t < 1) throw ConfigError("horizons must be positive");
  if (K < 2) throw ConfigError("study needs K >= 2 design observation vectors");
  lcd.validate();
  opt.validate();
  if (!std::isfinite(start_shift)) throw ConfigError("start shift must be finite");
}

const char* to_string(Verdict v) { return v == Verdict::Observable ? "OBSERVABLE" : "NOT_OBSERVABLE"; }

Eigen::MatrixXd make_design_observations(const ModelSpec& model, const Eigen::MatrixXd& disturbances) {
  const auto truth = model.true_values();
  const double m = eval(model.mean, truth);
  const double s = eval(model.scale, truth);
  return (s * disturbances.array() + m).matrix();
}

std::vector<double> make_design_observations(const ModelSpec& model, const Eigen::VectorXd& disturbances) {
  const Eigen::MatrixXd z = make_design_observations(model, Eigen::MatrixXd(disturbances.transpose()));
  return {z.data(), z.data() + z.size()};
}

namespace {

std::optional<SampleCache> make_cache(const StudyConfig& cfg) {
  if (!cfg.cache_dir) return std::nullopt;
  return SampleCache(*cfg.cache_dir);
}

std::vector<double> start_point(const ModelSpec& model, const StudyConfig& cfg) {
  auto x0 = model.true_values();
  for (auto& v : x0) v += cfg.start_shift;
  return x0;
}

RunRecord fit_one(const ModelSpec& model, std::vector<double> obs, const std::vector<double>& x0,
                  const OptConfig& opt) {
  RunRecord rec;
  const PosteriorContext ctx(model, std::move(obs));
  rec.max_result = maximize(ctx, x0, opt);
  if (!ctx.evaluate(rec.max_result.omega_hat)) {
    rec.failure = rec.max_result.message.empty() ? "estimate is infeasible" : rec.max_result.message;
    rec.check_report.diagnostic = rec.failure;
    rec.check_report.grad_norm = std::numeric_limits<double>::infinity();
    return rec;
  }
  rec.check_report = check_maximum(ctx, rec.max_result, opt);
  rec.passed = rec.check_report.passed;
  rec.failure = rec.check_report.diagnostic;
  return rec;
}

}  // namespace

PartIResult run_part1(const ModelSpec& model, int horizon, const StudyConfig& cfg) {
  cfg.validate();
  const auto cache = make_cache(cfg);
  const Eigen::VectorXd eps = representative_disturbances(horizon, cfg.lcd, cache ? &*cache : nullptr);
  PartIResult out;
  out.horizon = horizon;
  out.z_rep = make_design_observations(model, eps);
  RunRecord rec = fit_one(model, out.z_rep, start_point(model, cfg), cfg.opt);
  out.max_result = std::move(rec.max_result);
  out.check_report = std::move(rec.check_report);
  out.local_variances = out.check_report.local_variances;
  return out;
}

void summarize(PartIIResult& result, std::size_t n_params) {
  result.n_passed = 0;
  result.n_failed = 0;
  std::vector<double> sum(n_params, 0.0), lvar_sum(n_params, 0.0);
  for (const auto& r : result.runs) {
    if (!r.passed) {
      ++result.n_failed;
      continue;
    }
    ++result.n_passed;
    for (std::size_t j = 0; j < n_params; ++j) {
      sum[j] += r.max_result.omega_hat[j];
      lvar_sum[j] += r.check_report.local_variances[j];
    }
  }
  result.empirical_mean.clear();
  result.empirical_variance.clear();
  result.mean_local_variance.clear();
  if (result.n_passed == 0) return;
  const double n = result.n_passed;
  for (std::size_t j = 0; j < n_params; ++j) {
    result.empirical_mean.push_back(sum[j] / n);
    result.mean_local_variance.push_back(lvar_sum[j] / n);
  }
  std::vector<double> sq(n_params, 0.0);
  for (const auto& r : result.runs) {
    if (!r.passed) continue;
    for (std::size_t j = 0; j < n_params; ++j) {
      const double e = r.max_result.omega_hat[j] - result.empirical_mean[j];
      sq[j] += e * e;
    }
  }
  for (std::size_t j = 0; j < n_params; ++j)
    result.empirical_variance.push_back(result.n_passed > 1 ? sq[j] / (n - 1.0)
                                                            : std::numeric_limits<double>::quiet_NaN());
}

PartIIResult run_part2_on(const ModelSpec& model, const Eigen::MatrixXd& disturbances, const StudyConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd z = make_design_observations(model, disturbances);
  const auto x0 = start_point(model, cfg);
  PartIIResult out;
  out.horizon = static_cast<int>(disturbances.cols());
  out.K = static_cast<int>(disturbances.rows());
  out.runs.resize(out.K);
  parallel_for(static_cast<std::size_t>(out.K), cfg.threads, [&](std::size_t k) {
    std::vector<double> obs(z.cols());
    for (Eigen::Index t = 0; t < z.cols(); ++t) obs[t] = z(static_cast<Eigen::Index>(k), t);
    out.runs[k] = fit_one(model, std::move(obs), x0, cfg.opt);
    out.runs[k].k = static_cast<int>(k) + 1;
  });
  summarize(out, model.size());
  return out;
}

PartIIResult run_part2(const ModelSpec& model, int horizon, int K, const StudyConfig& cfg) {
  cfg.validate();
  const auto cache = make_cache(cfg);
  const Eigen::MatrixXd eps =
      design_disturbance_matrix(horizon, K, cfg.lcd, cache ? &*cache : nullptr, cfg.threads);
  return run_part2_on(model, eps, cfg);
}

Verdict decide_verdict(const StudyReport& report) {
  for (const auto& h : report.horizons) {
    if (h.part1.check_report.passed || h.part2.n_passed > 0) return Verdict::Observable;
  }
  return Verdict::NotObservable;
}

namespace {

ConsistencyTrend consistency_trend(const std::vector<HorizonReport>& horizons, std::size_t n_params) {
  ConsistencyTrend trend;
  trend.variance_non_increasing.assign(n_params, true);
  trend.local_variance_non_increasing.assign(n_params, true);
  std::vector<const PartIIResult*> usable;
  for (const auto& h : horizons)
    if (h.part2.n_passed >= 2) usable.push_back(&h.part2);
  std::sort(usable.begin(), usable.end(),
            [](const PartIIResult* a, const PartIIResult* b) { return a->horizon < b->horizon; });
  for (std::size_t i = 1; i < usable.size(); ++i) {
    for (std::size_t j = 0; j < n_params; ++j) {
      if (usable[i]->empirical_variance[j] > usable[i - 1]->empirical_variance[j])
        trend.variance_non_increasing[j] = false;
      if (usable[i]->mean_local_variance[j] > usable[i - 1]->mean_local_variance[j])
        trend.local_variance_non_increasing[j] = false;
    }
  }
  trend.all_non_increasing = !usable.empty();
  for (std::size_t j = 0; j < n_params; ++j)
    trend.all_non_increasing =
        trend.all_non_increasing && trend.variance_non_increasing[j] && trend.local_variance_non_increasing[j];
  return trend;
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyReport rep;
  rep.model_name = cfg.model.name;
  rep.param_names = cfg.model.names();
  rep.true_values = cfg.model.true_values();
  rep.K = cfg.K;
  rep.lcd = cfg.lcd;
  rep.opt = cfg.opt;
  for (int horizon : cfg.horizons) {
    HorizonReport h;
    h.horizon = horizon;
    // Part II always runs, whether or not Part I found a valid maximum.
    h.part1 = run_part1(cfg.model, horizon, cfg);
    h.part2 = run_part2(cfg.model, horizon, cfg.K, cfg);
    if (cfg.random_baseline)
      h.random_baseline =
          run_part2_on(cfg.model, random_disturbance_matrix(horizon, cfg.K, cfg.lcd.seed + horizon), cfg);
    rep.part1_passed += h.part1.check_report.passed ? 1 : 0;
    rep.part2_passed += h.part2.n_passed;
    rep.part2_total += h.part2.K;
    rep.horizons.push_back(std::move(h));
  }
  rep.verdict = decide_verdict(rep);
  rep.consistency = consistency_trend(rep.horizons, cfg.model.size());
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

json numbers(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(number(x));
  return arr;
}

json checks_json(const CheckReport& c) {
  return json{{"passed", c.passed},
              {"gradient_norm", number(c.grad_norm)},
              {"gradient_ok", c.grad_ok},
              {"eigenvalues", numbers(c.eigenvalues)},
              {"hessian_positive_definite", c.hessian_pd},
              {"eigenvalue_ratio", number(c.eig_ratio)},
              {"eigenvalue_ratio_ok", c.eig_ratio_ok},
              {"local_variances", numbers(c.local_variances)},
              {"local_variance_finite", c.lvar_finite},
              {"diagnostic", c.diagnostic}};
}

json optimizer_json(const MaxResult& r) {
  return json{{"estimate", numbers(r.omega_hat)},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"gradient_norm", number(r.grad_norm)},
              {"neg2_log_posterior", number(r.value)},
              {"message", r.message}};
}

json part2_json(const PartIIResult& p) {
  json runs = json::array();
  for (const auto& r : p.runs) {
    runs.push_back(json{{"k", r.k},
                        {"passed", r.passed},
                        {"estimate", numbers(r.max_result.omega_hat)},
                        {"local_variances", numbers(r.check_report.local_variances)},
                        {"gradient_norm", number(r.check_report.grad_norm)},
                        {"eigenvalue_ratio", number(r.check_report.eig_ratio)},
                        {"failure", r.failure}});
  }
  return json{{"K", p.K},
              {"n_passed", p.n_passed},
              {"n_failed", p.n_failed},
              {"empirical_mean", numbers(p.empirical_mean)},
              {"empirical_variance", numbers(p.empirical_variance)},
              {"mean_local_variance", numbers(p.mean_local_variance)},
              {"runs", runs}};
}

}  // namespace

nlohmann::json to_json(const StudyReport& report) {
  json horizons = json::array();
  for (const auto& h : report.horizons) {
    json part1{{"z", numbers(h.part1.z_rep)},
               {"optimizer", optimizer_json(h.part1.max_result)},
               {"checks", checks_json(h.part1.check_report)},
               {"estimate", numbers(h.part1.max_result.omega_hat)},
               {"local_variances", numbers(h.part1.local_variances)}};
    json entry{{"T", h.horizon}, {"part1", part1}, {"part2", part2_json(h.part2)}};
    if (h.random_baseline) entry["random_baseline"] = part2_json(*h.random_baseline);
    horizons.push_back(std::move(entry));
  }
  json trend{{"variance_non_increasing", report.consistency.variance_non_increasing},
             {"local_variance_non_increasing", report.consistency.local_variance_non_increasing},
             {"all_non_increasing", report.consistency.all_non_increasing}};
  json config{{"K", report.K},
              {"lcd",
               {{"b_max", report.lcd.b_max},
                {"quad_nodes", report.lcd.quad_nodes},
                {"max_iters", report.lcd.max_iters},
                {"step_tol", report.lcd.step_tol},
                {"seed", report.lcd.seed}}},
              {"optimizer",
               {{"memory", report.opt.memory},
                {"max_iters", report.opt.max_iters},
                {"grad_tol", report.opt.grad_tol},
                {"grad_check", report.opt.grad_check},
                {"eig_ratio_min", report.opt.eig_ratio_min},
                {"lvar_max", report.opt.lvar_max}}}};
  return json{{"model", {{"name", report.model_name},
                         {"parameters", report.param_names},
                         {"true_values", numbers(report.true_values)}}},
              {"verdict", to_string(report.verdict)},
              {"counts",
               {{"part1_passed", report.part1_passed},
                {"part1_total", static_cast<int>(report.horizons.size())},
                {"part2_passed", report.part2_passed},
                {"part2_total", report.part2_total}}},
              {"config", config},
              {"horizons", horizons},
              {"consistency", trend}};
}

std::string report_text(const StudyReport& report) { return to_json(report).dump(2) + "\n"; }

void write_plot_csv(std::ostream& os, const StudyReport& report) {
  char buf[32];
  os << "T,k,param,estimate\n";
  for (const auto& h : report.horizons) {
    for (const auto& r : h.part2.runs) {
      if (!r.passed) continue;
      for (std::size_t j = 0; j < report.param_names.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", r.max_result.omega_hat[j]);
        os << h.horizon << ',' << r.k << ',' << report.param_names[j] << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace obscheck
