#include "obscheck/sample_cache.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "obscheck/errors.hpp"

namespace obscheck {

namespace {

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidMixture("bad number in sample file: " + s);
  return v;
}

}  // namespace

void write_mixture_csv(std::ostream& os, const DiracMixture& mix, const LcdConfig& cfg) {
  os << "# dim=" << mix.dim() << ",count=" << mix.count() << ",b_max=" << fmt17(cfg.b_max)
     << ",quad_nodes=" << cfg.quad_nodes << ",seed=" << cfg.seed << ",max_iters=" << cfg.max_iters
     << ",step_tol=" << fmt17(cfg.step_tol) << ",converged=" << (mix.converged ? 1 : 0)
     << ",iterations=" << mix.iterations << ",distance=" << fmt17(mix.distance) << "\n";
  for (int i = 0; i < mix.count(); ++i) {
    for (int k = 0; k < mix.dim(); ++k) {
      if (k) os << ',';
      os << fmt17(mix.points(i, k));
    }
    os << '\n';
  }
}

DiracMixture read_mixture_csv(std::istream& is, LcdConfig* cfg_out) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw InvalidMixture("sample file lacks header line");
  std::map<std::string, std::string> fields;
  std::stringstream hs(line.substr(2));
  std::string item;
  while (std::getline(hs, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidMixture("malformed header field: " + item);
    fields[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto field = [&](const char* name) -> const std::string& {
    auto it = fields.find(name);
    if (it == fields.end()) throw InvalidMixture(std::string("sample header missing ") + name);
    return it->second;
  };
  const int dim = std::stoi(field("dim"));
  const int count = std::stoi(field("count"));
  if (dim < 1 || count < 1) throw InvalidMixture("sample header has invalid dim/count");
  if (cfg_out) {
    cfg_out->b_max = parse_double(field("b_max"));
    cfg_out->quad_nodes = std::stoi(field("quad_nodes"));
    cfg_out->seed = std::stoull(field("seed"));
    cfg_out->max_iters = std::stoi(field("max_iters"));
    cfg_out->step_tol = parse_double(field("step_tol"));
  }
  DiracMixture mix;
  mix.points.resize(count, dim);
  if (fields.count("converged")) mix.converged = field("converged") == "1";
  if (fields.count("iterations")) mix.iterations = std::stoi(field("iterations"));
  if (fields.count("distance")) mix.distance = parse_double(field("distance"));
  for (int i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw InvalidMixture("sample file truncated");
    std::stringstream rs(line);
    for (int k = 0; k < dim; ++k) {
      if (!std::getline(rs, item, ',')) throw InvalidMixture("sample row has too few columns");
      mix.points(i, k) = parse_double(item);
    }
  }
  return mix;
}

SampleCache::SampleCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path SampleCache::default_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("OBSCHECK_CACHE_DIR"); env && *env) return env;
  return fallback;
}

std::filesystem::path SampleCache::path_for(int dim, int count, const LcdConfig& cfg) const {
  return dir_ / ("lcd_d" + std::to_string(dim) + "_m" + std::to_string(count) + "_" + cfg.key() + ".csv");
}

std::optional<DiracMixture> SampleCache::load(int dim, int count, const LcdConfig& cfg) const {
  std::ifstream in(path_for(dim, count, cfg));
  if (!in) return std::nullopt;
  LcdConfig stored;
  DiracMixture mix = read_mixture_csv(in, &stored);
  if (mix.dim() != dim || mix.count() != count || stored.key() != cfg.key()) return std::nullopt;
  return mix;
}

void SampleCache::store(const DiracMixture& mix, const LcdConfig& cfg) const {
  std::filesystem::create_directories(dir_);
  const auto target = path_for(mix.dim(), mix.count(), cfg);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write sample cache file " + tmp.string());
    write_mixture_csv(out, mix, cfg);
    if (!out) throw ConfigError("failed writing sample cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

DiracMixture SampleCache::get(int dim, int count, const LcdConfig& cfg, unsigned threads) const {
  if (auto hit = load(dim, count, cfg)) return *hit;
  DiracMixture mix = optimize_mixture(dim, count, cfg, threads);
  store(mix, cfg);
  return mix;
}

}  // namespace obscheck
