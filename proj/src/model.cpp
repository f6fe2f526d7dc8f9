#include "obscheck/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "obscheck/errors.hpp"

namespace obscheck {

std::vector<std::string> ModelSpec::names() const {
  std::vector<std::string> out;
  for (const auto& p : params) out.push_back(p.name);
  return out;
}

std::vector<double> ModelSpec::true_values() const {
  std::vector<double> out;
  for (const auto& p : params) out.push_back(p.true_value);
  return out;
}

ModelSpec ModelSpec::make(std::string name, std::vector<ParamSpec> params, const std::string& mean,
                          const std::string& scale, const std::string& log_prior) {
  if (params.empty()) throw ConfigError("model declares no parameters");
  if (params.size() > static_cast<std::size_t>(kMaxParams))
    throw ConfigError("model declares more than " + std::to_string(kMaxParams) + " parameters");
  std::set<std::string> seen;
  for (const auto& p : params) {
    if (p.name.empty()) throw ConfigError("parameter with empty name");
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter '" + p.name + "'");
    if (!std::isfinite(p.true_value)) throw ConfigError("true value of '" + p.name + "' is not finite");
    if (p.lower && p.upper && *p.lower > *p.upper) throw ConfigError("empty bounds for '" + p.name + "'");
    if ((p.lower && p.true_value < *p.lower) || (p.upper && p.true_value > *p.upper))
      throw ConfigError("true value of '" + p.name + "' lies outside its bounds");
  }
  ModelSpec m;
  m.name = std::move(name);
  m.params = std::move(params);
  const auto order = m.names();
  m.mean = parse_expr(mean).bind(order);
  m.scale = parse_expr(scale).bind(order);
  m.log_prior = parse_expr(log_prior).bind(order);

  const auto truth = m.true_values();
  double s = 0.0;
  try {
    eval(m.mean, truth);
    s = eval(m.scale, truth);
    eval(m.log_prior, truth);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model is not defined at the true values: ") + e.what());
  }
  if (!(s > 0.0)) throw ConfigError("scale must be positive at the true values");
  return m;
}

ModelSpec parse_model_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    std::vector<ParamSpec> params;
    for (const auto& p : doc.at("parameters")) {
      ParamSpec spec;
      spec.name = p.at("name").get<std::string>();
      spec.true_value = p.at("true_value").get<double>();
      if (p.contains("lower") && !p.at("lower").is_null()) spec.lower = p.at("lower").get<double>();
      if (p.contains("upper") && !p.at("upper").is_null()) spec.upper = p.at("upper").get<double>();
      params.push_back(std::move(spec));
    }
    return ModelSpec::make(doc.value("name", std::string("model")), std::move(params),
                           doc.at("mean").get<std::string>(), doc.at("scale").get<std::string>(),
                           doc.value("log_prior", std::string("0")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

ModelSpec load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str());
}

}  // namespace obscheck
