#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace obscheck {

/// Discretization choices for the localized-cumulative-distribution (LCD)
/// distance and the point-placement optimizer.
struct LcdConfig {
  double b_max = 10.0;        ///< upper end of the kernel-width integral
  int quad_nodes = 128;       ///< Gauss-Legendre nodes on (0, b_max]
  int max_iters = 200;        ///< placement iteration cap
  double step_tol = 1e-10;    ///< gradient / relative-decrease tolerance
  std::uint64_t seed = 1;     ///< initializer seed

  void validate() const;
  /// Stable textual key covering every field; used for cache file names.
  std::string key() const;
};

/// M equally weighted points in d dimensions approximating N(0, I_d).
///
/// Mixtures produced by this module use the canonical antithetic layout:
/// rows [0, h) are the free points, rows [h, 2h) their negations in the same
/// order, and for odd M the last row is the origin (h = M / 2).
struct DiracMixture {
  Eigen::MatrixXd points;  ///< M x d, one point per row
  bool converged = true;   ///< false if placement hit max_iters
  int iterations = 0;
  double distance = 0.0;   ///< LCD distance of the final (whitened) points

  int dim() const { return static_cast<int>(points.cols()); }
  int count() const { return static_cast<int>(points.rows()); }
  int free_count() const { return count() / 2; }

  /// Builds the canonical layout from h free points (rows of `free_points`).
  static DiracMixture from_free_points(const Eigen::MatrixXd& free_points, bool with_origin);

  /// True if the rows follow the canonical antithetic layout exactly.
  bool is_canonical() const;

  /// Sample mean, accumulated pairwise (p + (-p)) so that it is exactly zero
  /// for canonical mixtures.
  Eigen::VectorXd sample_mean() const;
  /// Second moment (1/M) sum p p^T (the covariance, since the mean is zero).
  Eigen::MatrixXd sample_covariance() const;
};

/// LCD distance between the mixture and N(0, I_d):
///   D = int_0^{b_max} [T1(b) - 2 T2(b) + T3(b)] db,
/// with the inner m-integrals in closed form for the Gaussian kernel
/// exp(-|x - m|^2 / (2 b^2)). Throws InvalidMixture on non-finite results.
double lcd_distance(const DiracMixture& mix, const LcdConfig& cfg);

/// Unconstrained gradient: row i is dD/dx_i, treating every point as free.
Eigen::MatrixXd lcd_point_gradient(const DiracMixture& mix, const LcdConfig& cfg);

/// Gradient with respect to the free coordinates of a canonical mixture.
/// Rows [0, h) carry dD/df_i including the mirrored copy -f_i; the mirrored
/// rows and the origin row are zero.
Eigen::MatrixXd lcd_gradient(const DiracMixture& mix, const LcdConfig& cfg);

/// Result of the placement stage before whitening. Exposed for tests.
struct Placement {
  Eigen::MatrixXd free_points;  ///< h x d
  bool with_origin = false;
  double distance = 0.0;
  double initial_distance = 0.0;
  double grad_norm = 0.0;  ///< infinity norm of the free-coordinate gradient
  int iterations = 0;
  bool converged = false;
};

/// Row-major fill of independent standard-normal draws from a seeded
/// mt19937_64 (Box-Muller on raw engine output).
Eigen::MatrixXd standard_normal_matrix(int rows, int cols, std::uint64_t seed);

/// K x T matrix of random (not designed) disturbances, for baseline runs.
Eigen::MatrixXd random_disturbance_matrix(int horizon, int count, std::uint64_t seed);

/// Seeded initial free points: standard-normal draws scaled so the resulting
/// mixture has unit per-coordinate second moment.
Eigen::MatrixXd initial_free_points(int d, int m, std::uint64_t seed);

/// Gradient descent with backtracking on the free coordinates.
Placement place_points(int d, int m, const LcdConfig& cfg, unsigned threads = 1);

/// place_points followed by whitening to exact unit covariance. Whitening is
/// skipped when the placed covariance is singular, which is always the case
/// for fewer than d antithetic pairs. M = 1 returns the origin.
DiracMixture optimize_mixture(int d, int m, const LcdConfig& cfg, unsigned threads = 1);

class SampleCache;

/// Sorted coordinates of the 1-D, M = T mixture.
Eigen::VectorXd representative_disturbances(int horizon, const LcdConfig& cfg,
                                            const SampleCache* cache = nullptr);

/// K x T matrix whose rows are the points of the T-dimensional K-point
/// mixture. Throws InvalidMixture for K < 2.
Eigen::MatrixXd design_disturbance_matrix(int horizon, int count, const LcdConfig& cfg,
                                          const SampleCache* cache = nullptr,
                                          unsigned threads = 1);

}  // namespace obscheck
