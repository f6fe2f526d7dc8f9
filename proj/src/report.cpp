#include <cstdio>
#include <sstream>
#include <string>

#include "obscheck/errors.hpp"
#include "obscheck/observability.hpp"

namespace obscheck {

namespace {

using nlohmann::json;

std::string num(const json& v) {
  if (v.is_number()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return "n/a";
}

std::string tuple(const json& arr) {
  if (!arr.is_array() || arr.empty()) return "-";
  std::string out = "(";
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (i) out += ", ";
    out += num(arr[i]);
  }
  return out + ")";
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_report(const json& report) {
  std::ostringstream os;
  try {
    const auto& model = report.at("model");
    os << "Model: " << model.at("name").get<std::string>() << "  parameters " << tuple(model.at("parameters"))
       << "  true values " << tuple(model.at("true_values")) << "\n";
    const auto& counts = report.at("counts");
    os << "Verdict: " << report.at("verdict").get<std::string>() << "  (Part I passes "
       << counts.at("part1_passed").get<int>() << "/" << counts.at("part1_total").get<int>() << ", Part II passes "
       << counts.at("part2_passed").get<int>() << "/" << counts.at("part2_total").get<int>() << ")\n\n";

    os << "Part I: representative design observation vector\n";
    os << "  " << pad("T", 6) << pad("estimate", 28) << pad("LVar", 28) << "checks\n";
    for (const auto& h : report.at("horizons")) {
      const auto& p1 = h.at("part1");
      const auto& checks = p1.at("checks");
      const std::string status =
          checks.at("passed").get<bool>() ? "pass" : "fail: " + checks.at("diagnostic").get<std::string>();
      os << "  " << pad(std::to_string(h.at("T").get<int>()), 6) << pad(tuple(p1.at("estimate")), 28)
         << pad(tuple(p1.at("local_variances")), 28) << status << "\n";
    }

    auto part2_table = [&](const char* title, const char* key) {
      bool any = false;
      for (const auto& h : report.at("horizons")) any = any || h.contains(key);
      if (!any) return;
      os << "\n" << title << "\n";
      os << "  " << pad("T", 6) << pad("passing", 14) << pad("emp. mean", 26) << pad("emp. variance", 26)
         << "mean LVar\n";
      for (const auto& h : report.at("horizons")) {
        if (!h.contains(key)) continue;
        const auto& p2 = h.at(key);
        const int passed = p2.at("n_passed").get<int>();
        os << "  " << pad(std::to_string(h.at("T").get<int>()), 6);
        if (passed == 0) {
          os << "0 passing runs (of " << p2.at("K").get<int>() << ")\n";
          continue;
        }
        os << pad(std::to_string(passed) + "/" + std::to_string(p2.at("K").get<int>()), 14)
           << pad(tuple(p2.at("empirical_mean")), 26) << pad(tuple(p2.at("empirical_variance")), 26)
           << tuple(p2.at("mean_local_variance")) << "\n";
      }
    };
    part2_table("Part II: K design observation vectors", "part2");
    part2_table("Random baseline: K random observation vectors", "random_baseline");

    if (report.contains("consistency")) {
      const bool trend = report.at("consistency").at("all_non_increasing").get<bool>();
      os << "\nConsistency trend (variance and mean LVar non-increasing in T): " << (trend ? "yes" : "no") << "\n";
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return os.str();
}

}  // namespace obscheck
