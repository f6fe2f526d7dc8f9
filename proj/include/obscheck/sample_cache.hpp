#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "obscheck/dirac_mixture.hpp"

namespace obscheck {

/// Writes a mixture in the sample-set CSV format: one comment line
///   # dim=..,count=..,b_max=..,quad_nodes=..,seed=..,max_iters=..,step_tol=..,converged=..,iterations=..,distance=..
/// followed by one row per point, coordinates at 17 significant digits.
void write_mixture_csv(std::ostream& os, const DiracMixture& mix, const LcdConfig& cfg);

/// Reads the format written by write_mixture_csv. `cfg_out`, when given,
/// receives the configuration recorded in the header.
DiracMixture read_mixture_csv(std::istream& is, LcdConfig* cfg_out = nullptr);

/// File-backed store of generated mixtures keyed by (dim, count, LcdConfig).
class SampleCache {
 public:
  explicit SampleCache(std::filesystem::path dir);

  /// Directory from OBSCHECK_CACHE_DIR, else `fallback`.
  static std::filesystem::path default_dir(const std::filesystem::path& fallback);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(int dim, int count, const LcdConfig& cfg) const;

  std::optional<DiracMixture> load(int dim, int count, const LcdConfig& cfg) const;
  void store(const DiracMixture& mix, const LcdConfig& cfg) const;

  /// Loads if present, otherwise generates with optimize_mixture and stores.
  DiracMixture get(int dim, int count, const LcdConfig& cfg, unsigned threads = 1) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace obscheck
