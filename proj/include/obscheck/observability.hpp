#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "obscheck/dirac_mixture.hpp"
#include "obscheck/model.hpp"
#include "obscheck/optimizer.hpp"

namespace obscheck {

struct StudyConfig {
  ModelSpec model;
  std::vector<int> horizons{4, 12, 20};
  int K = 2000;
  LcdConfig lcd;
  OptConfig opt;
  /// Added to every true value to form the optimizer start point.
  double start_shift = 0.0;
  /// Sample-set cache; generation runs uncached when empty.
  std::optional<std::filesystem::path> cache_dir;
  unsigned threads = 1;
  /// Also run Part II on K seeded random disturbance vectors for comparison.
  bool random_baseline = false;

  void validate() const;
};

/// z^k_t = m(Omega*) + s(Omega*) * eps^k_t for every row k of `disturbances`.
Eigen::MatrixXd make_design_observations(const ModelSpec& model, const Eigen::MatrixXd& disturbances);
std::vector<double> make_design_observations(const ModelSpec& model, const Eigen::VectorXd& disturbances);

struct PartIResult {
  int horizon = 0;
  std::vector<double> z_rep;
  MaxResult max_result;
  CheckReport check_report;
  std::vector<double> local_variances;  ///< copy of check_report.local_variances
};

struct RunRecord {
  int k = 0;  ///< 1-based
  MaxResult max_result;
  CheckReport check_report;
  bool passed = false;
  std::string failure;  ///< empty when passed
};

struct PartIIResult {
  int horizon = 0;
  int K = 0;
  std::vector<RunRecord> runs;
  int n_passed = 0;
  int n_failed = 0;
  /// Statistics over passing runs; empty when none passed. The variance uses
  /// the (K_eff - 1) denominator and is NaN for a single passing run.
  std::vector<double> empirical_mean;
  std::vector<double> empirical_variance;
  std::vector<double> mean_local_variance;
};

enum class Verdict { Observable, NotObservable };
const char* to_string(Verdict v);

struct HorizonReport {
  int horizon = 0;
  PartIResult part1;
  PartIIResult part2;
  std::optional<PartIIResult> random_baseline;
};

struct ConsistencyTrend {
  /// Per parameter, across horizons with at least two passing runs.
  std::vector<bool> variance_non_increasing;
  std::vector<bool> local_variance_non_increasing;
  bool all_non_increasing = false;
};

struct StudyReport {
  std::string model_name;
  std::vector<std::string> param_names;
  std::vector<double> true_values;
  int K = 0;
  LcdConfig lcd;
  OptConfig opt;
  std::vector<HorizonReport> horizons;
  Verdict verdict = Verdict::NotObservable;
  int part1_passed = 0;
  int part2_passed = 0;
  int part2_total = 0;
  ConsistencyTrend consistency;
};

PartIResult run_part1(const ModelSpec& model, int horizon, const StudyConfig& cfg);

/// K maximizations from the start point on the design observation vectors
/// built from design_disturbance_matrix(horizon, K).
PartIIResult run_part2(const ModelSpec& model, int horizon, int K, const StudyConfig& cfg);

/// Same as run_part2 on caller-supplied disturbance rows.
PartIIResult run_part2_on(const ModelSpec& model, const Eigen::MatrixXd& disturbances, const StudyConfig& cfg);

/// Aggregates per-run records (in record order) into PartIIResult statistics.
void summarize(PartIIResult& result, std::size_t n_params);

StudyReport run_study(const StudyConfig& cfg);

/// OBSERVABLE iff any Part I or Part II maximum passed all checks.
Verdict decide_verdict(const StudyReport& report);

nlohmann::json to_json(const StudyReport& report);
/// Serialized report text (stable formatting, trailing newline).
std::string report_text(const StudyReport& report);

/// Plot stream: header `T,k,param,estimate`, one row per parameter of every
/// passing Part II run.
void write_plot_csv(std::ostream& os, const StudyReport& report);

/// Renders a serialized report as aligned text tables. Throws ConfigError on
/// a malformed document.
std::string render_report(const nlohmann::json& report);

}  // namespace obscheck
