// Command-line front end: run observability studies, generate sample sets,
// render reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "obscheck/errors.hpp"
#include "obscheck/observability.hpp"
#include "obscheck/sample_cache.hpp"

namespace fs = std::filesystem;
using namespace obscheck;

namespace {

enum ExitCode { kObservable = 0, kUsage = 1, kInternal = 2, kNotObservable = 3 };

fs::path default_cache_dir() {
  fs::path fallback = ".obscheck_cache";
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
    fallback = fs::path(xdg) / "obscheck";
  else if (const char* home = std::getenv("HOME"); home && *home)
    fallback = fs::path(home) / ".cache" / "obscheck";
  return SampleCache::default_dir(fallback);
}

// Writes via a sibling temporary file and rename.
void write_atomically(const fs::path& target, const std::string& content) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::vector<int> parse_horizons(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int t = std::stoi(item, &used);
      if (used != item.size() || t < 1) throw std::invalid_argument(item);
      out.push_back(t);
    } catch (const std::exception&) {
      throw ConfigError("invalid horizon '" + item + "' in --T");
    }
  }
  if (out.empty()) throw ConfigError("--T needs at least one horizon");
  return out;
}

struct RunOptions {
  std::string model;
  std::string horizons = "4,12,20";
  int K = 2000;
  std::uint64_t seed = LcdConfig{}.seed;
  std::string out;
  std::string plot;
  unsigned threads = 1;
  bool random_baseline = false;
  bool no_cache = false;
  std::string cache_dir;
  double start_shift = 0.0;
  LcdConfig lcd;
  OptConfig opt;
};

struct SampleOptions {
  int dim = 1;
  int count = 2;
  std::string out;
  unsigned threads = 1;
  LcdConfig lcd;
};

void add_lcd_flags(CLI::App* cmd, LcdConfig& lcd) {
  cmd->add_option("--b-max", lcd.b_max, "Kernel-width integration limit")->capture_default_str();
  cmd->add_option("--quad-nodes", lcd.quad_nodes, "Gauss-Legendre nodes")->capture_default_str();
  cmd->add_option("--lcd-iters", lcd.max_iters, "Sample placement iteration cap")->capture_default_str();
  cmd->add_option("--lcd-tol", lcd.step_tol, "Sample placement tolerance")->capture_default_str();
}

int cmd_run(const RunOptions& o) {
  StudyConfig cfg;
  cfg.model = load_model_file(o.model);
  cfg.horizons = parse_horizons(o.horizons);
  cfg.K = o.K;
  cfg.lcd = o.lcd;
  cfg.lcd.seed = o.seed;
  cfg.opt = o.opt;
  cfg.threads = o.threads;
  cfg.random_baseline = o.random_baseline;
  cfg.start_shift = o.start_shift;
  if (!o.no_cache) cfg.cache_dir = o.cache_dir.empty() ? default_cache_dir() : fs::path(o.cache_dir);
  cfg.validate();

  const StudyReport report = run_study(cfg);
  const std::string text = report_text(report);
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_atomically(o.out, text);
    std::cout << render_report(to_json(report));
  }
  if (!o.plot.empty()) {
    std::ostringstream csv;
    write_plot_csv(csv, report);
    write_atomically(o.plot, csv.str());
  }
  return report.verdict == Verdict::Observable ? kObservable : kNotObservable;
}

int cmd_samples(const SampleOptions& o) {
  if (o.dim < 1) throw ConfigError("--dim must be at least 1");
  if (o.count < 1) throw ConfigError("--count must be at least 1");
  const DiracMixture mix = optimize_mixture(o.dim, o.count, o.lcd, o.threads);
  std::ostringstream csv;
  write_mixture_csv(csv, mix, o.lcd);
  if (o.out.empty())
    std::cout << csv.str();
  else
    write_atomically(o.out, csv.str());
  std::cerr << "lcd distance: " << mix.distance << (mix.converged ? "" : " (placement did not converge)") << "\n";
  return 0;
}

int cmd_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report is not valid JSON: ") + e.what());
  }
  std::cout << render_report(doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical observability tests for Gaussian location-scale models"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run Part I and Part II for a model");
  run_cmd->add_option("--model", run.model, "Model JSON file")->required();
  run_cmd->add_option("--T", run.horizons, "Comma-separated horizons")->capture_default_str();
  run_cmd->add_option("--K", run.K, "Number of design observation vectors")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Sample placement seed")->capture_default_str();
  run_cmd->add_option("--out", run.out, "Report JSON path (stdout if omitted)");
  run_cmd->add_option("--plot", run.plot, "Estimates CSV path");
  run_cmd->add_option("--threads", run.threads, "Worker threads")->capture_default_str();
  run_cmd->add_flag("--random-baseline", run.random_baseline, "Also run K random observation vectors");
  run_cmd->add_option("--cache-dir", run.cache_dir, "Sample-set cache directory");
  run_cmd->add_flag("--no-cache", run.no_cache, "Do not read or write the sample-set cache");
  run_cmd->add_option("--start-shift", run.start_shift, "Offset added to the true values for the start point");
  run_cmd->add_option("--grad-tol", run.opt.grad_tol, "Optimizer gradient target")->capture_default_str();
  run_cmd->add_option("--grad-check", run.opt.grad_check, "Gradient check threshold")->capture_default_str();
  run_cmd->add_option("--eig-ratio-min", run.opt.eig_ratio_min, "Eigenvalue ratio threshold")
      ->capture_default_str();
  run_cmd->add_option("--lvar-max", run.opt.lvar_max, "Local variance ceiling")->capture_default_str();
  add_lcd_flags(run_cmd, run.lcd);

  SampleOptions samples;
  auto* samples_cmd = app.add_subcommand("samples", "Generate a Dirac mixture sample set");
  samples_cmd->add_option("--dim", samples.dim, "Dimension d")->required();
  samples_cmd->add_option("--count", samples.count, "Number of points M")->required();
  samples_cmd->add_option("--out", samples.out, "Output CSV (stdout if omitted)");
  samples_cmd->add_option("--seed", samples.lcd.seed, "Initializer seed")->capture_default_str();
  samples_cmd->add_option("--threads", samples.threads, "Worker threads")->capture_default_str();
  add_lcd_flags(samples_cmd, samples.lcd);

  std::string report_path;
  auto* report_cmd = app.add_subcommand("report", "Render a report JSON as text tables");
  report_cmd->add_option("file", report_path, "Report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*samples_cmd) return cmd_samples(samples);
    if (*report_cmd) return cmd_report(report_path);
  } catch (const ParseError& e) {
    std::cerr << "error: malformed expression: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidMixture& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
