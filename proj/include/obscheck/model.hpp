#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "obscheck/expr.hpp"

namespace obscheck {

struct ParamSpec {
  std::string name;
  double true_value = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// Location-scale Gaussian model Z_t = m(Omega) + s(Omega) * eps_t with an
/// optional log-prior. Expressions are stored bound to the parameter order.
struct ModelSpec {
  std::string name;
  std::vector<ParamSpec> params;
  Expr mean;
  Expr scale;
  Expr log_prior;  ///< defaults to the constant 0 (flat prior)

  std::size_t size() const { return params.size(); }
  std::vector<std::string> names() const;
  std::vector<double> true_values() const;

  /// Builds and validates a model: unique names, bounded expressions,
  /// true values within bounds, and s(Omega*) > 0. Throws ConfigError
  /// (or ParseError for malformed expression text).
  static ModelSpec make(std::string name, std::vector<ParamSpec> params, const std::string& mean,
                        const std::string& scale, const std::string& log_prior = "0");
};

/// Parses the JSON model format:
///   {"name": ..., "parameters": [{"name", "true_value", "lower", "upper"}],
///    "mean": "...", "scale": "...", "log_prior": "..."}
/// `lower`, `upper`, `name` and `log_prior` are optional.
ModelSpec parse_model_json(const std::string& text);
ModelSpec load_model_file(const std::filesystem::path& path);

}  // namespace obscheck
