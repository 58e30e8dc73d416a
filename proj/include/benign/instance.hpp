#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>

#include "benign/linalg.hpp"

namespace benign {

/// beta* = (1/sqrt3, -1/sqrt3, 1/sqrt3, 0, ..., 0); requires s = 3.
struct ThreeSpike {};

/// Caller-chosen beta*. Either the s leading nonzero values or a full
/// length-d vector whose nonzeros occupy exactly the first s coordinates.
struct ExplicitVector {
  Vector values;
};

using BetaSpec = std::variant<ThreeSpike, ExplicitVector>;

/// Synthetic sparse regression problem y = X beta* + xi.
///
/// The support of beta* is always the leading block [0, s); the sign
/// partition S+ / S- is read off beta* directly.
struct RegressionInstance {
  Matrix X;
  Vector y;
  Vector beta_star;
  Vector xi;
  Index n = 0;
  Index d = 0;
  Index s = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  bool in_support(Index k) const noexcept { return k < s; }
  bool positive_signal(Index k) const noexcept { return k < s && beta_star[k] > 0.0; }
  bool negative_signal(Index k) const noexcept { return k < s && beta_star[k] < 0.0; }

  /// Builds an instance from explicit parts (y is recomputed as X beta* + xi).
  /// Validates dimensions and the leading-support layout of beta*.
  static RegressionInstance from_parts(Matrix X, Vector beta_star, Vector xi, double sigma,
                                       std::uint64_t seed = 0);
};

/// Draws X and xi from a single mt19937_64 stream seeded with `seed`: the
/// n*d entries of X in row-major order, then the n noise values (skipped
/// when sigma = 0, in which case xi is exactly zero).
RegressionInstance generate_instance(Index n, Index d, Index s, double sigma, const BetaSpec& beta_spec,
                                     std::uint64_t seed);

/// n = round(3 sqrt(d)), the sample size used throughout the experiments.
Index auto_sample_size(Index d);

enum class RipMode { Exhaustive, MonteCarlo };

struct RipOptions {
  RipMode mode = RipMode::Exhaustive;
  std::int64_t num_supports = 0;           ///< MonteCarlo only.
  std::int64_t exhaustive_cap = 1'000'000;  ///< Largest C(d, k) allowed for Exhaustive.
  unsigned workers = 1;
};

/// Binomial coefficient saturating at INT64_MAX.
std::int64_t binomial_saturating(std::int64_t d, std::int64_t k) noexcept;

/// Largest deviation from 1 of the squared singular values of X_T / sqrt(n)
/// over the visited supports T of size k. Exhaustive enumerates every
/// support (exact RIP constant); MonteCarlo samples `num_supports` uniform
/// supports and yields a lower bound. Support i of a MonteCarlo run draws
/// from its own derived stream, so the result does not depend on `workers`.
double estimate_rip_delta(const Matrix& X, Index k, const RipOptions& options, std::uint64_t seed);

/// Normalized regularity quantities. Each entry divides a measured quantity
/// by its nominal scaling; noise ratios are +inf when sigma = 0.
struct AssumptionRatios {
  double xi_norm = 0.0;      ///< ||xi|| / (sigma sqrt n)
  double b_xi = 0.0;         ///< B_xi / (sigma sqrt(ln d / n))
  double xtxi_norm = 0.0;    ///< ||X^T xi|| / (sigma sqrt(d n))
  double lambda_min = 0.0;   ///< lambda_min(X X^T) / d
  double lambda_max = 0.0;   ///< lambda_max(X X^T) / d
  std::optional<double> rip; ///< delta / sqrt((k / n) ln(d / k))
};

struct AssumptionReport {
  double xi_norm = 0.0;
  double b_xi = 0.0;  ///< ||X^T xi / n||_inf
  double xtxi_norm = 0.0;
  double gram_lambda_min = 0.0;
  double gram_lambda_max = 0.0;
  std::optional<double> rip_delta;
  Index rip_k = 0;
  bool rip_exact = false;
  AssumptionRatios ratios;
};

/// Computes the regularity quantities. A positive `rip_budget` enables RIP
/// estimation: exhaustive when C(d, rip_k) <= rip_budget, otherwise
/// `rip_budget` random supports.
AssumptionReport regularity_report(const RegressionInstance& inst, Index rip_k, std::int64_t rip_budget);

/// Same, with explicit RIP options (rip_k ignored when `rip` is empty).
AssumptionReport regularity_report(const RegressionInstance& inst, Index rip_k,
                                   const std::optional<RipOptions>& rip);

/// Extreme eigenvalues of the n x n Gram matrix X X^T.
std::pair<double, double> gram_extreme_eigenvalues(const Matrix& X);

/// Binary dump: "SIL1", then n, d, s (u64), sigma (f64), seed (u64),
/// beta* (d), xi (n), X row-major (n*d); host little-endian.
void save_instance(const RegressionInstance& inst, const std::filesystem::path& path);
RegressionInstance load_instance(const std::filesystem::path& path);

}  // namespace benign
