#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "benign/instance.hpp"
#include "benign/model.hpp"

namespace benign {

/// Interpolators compared in the scaling experiment. `Full` is the
/// v + lambda(w^2 - u^2) model itself.
enum class Method { MinL2, Lasso, Hybrid, SecondOrderGD, Full };

const char* to_string(Method m) noexcept;
Method parse_method(const std::string& name);

/// Thrown when a solver stops without meeting its own convergence test.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using MetaFields = std::vector<std::pair<std::string, std::string>>;

struct BaselineResult {
  Vector beta;
  double train_resid_norm = 0.0;  ///< ||X beta - y||, recomputed on construction
  double test_loss_l2 = 0.0;      ///< ||beta - beta*||
  Method method = Method::MinL2;
  MetaFields meta;

  static BaselineResult make(const RegressionInstance& inst, Vector beta, Method method, MetaFields meta = {});
  /// "k1=v1;k2=v2"
  std::string meta_string() const;
};

/// beta = X^T z with (X X^T) z = rhs, via Cholesky of the n x n Gram plus one
/// refinement step. Throws std::runtime_error if the Gram is not positive
/// definite.
Vector min_norm_solution(const Matrix& X, const Vector& rhs);

BaselineResult min_l2_interpolator(const RegressionInstance& inst);

struct LassoConfig {
  double l1_penalty = 1.0;
  double tol = 1e-8;
  std::int64_t max_sweeps = 100'000;  ///< per penalty on the path
  /// Warm-start path lambda_max * r^k down to l1_penalty; 0 disables it.
  double path_ratio = 0.1;

  void validate() const;
};

struct LassoFit {
  Vector beta;
  std::int64_t sweeps = 0;  ///< including warm-start stages
  int path_stages = 0;
  double last_change = 0.0;
  bool converged = false;
  /// (1/2n)||X beta - y||^2 + l1 ||beta||_1 at the target penalty, from the
  /// starting point of the final stage and after each of its sweeps.
  std::vector<double> objective_history;
};

/// Cyclic coordinate descent with exact soft-threshold updates on
/// (1/2n)||X beta - y||^2 + l1 ||beta||_1, from beta = 0 along the warm-start
/// path. Sweeps alternate between all coordinates and the current nonzero
/// set; convergence is only declared after a full sweep whose largest
/// coordinate change is <= tol.
LassoFit lasso_fit(const Matrix& X, const Vector& y, const LassoConfig& cfg);

/// ||X^T y / n||_inf: the smallest penalty whose solution is zero.
double lasso_zero_threshold(const Matrix& X, const Vector& y);

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double l1_penalty);

/// Wraps lasso_fit; throws ConvergenceError if max_sweeps runs out.
BaselineResult lasso_coordinate_descent(const RegressionInstance& inst, const LassoConfig& cfg);

/// Picks the candidate with the smallest ||beta - beta*|| (first index on ties).
struct OracleTestLoss {};
/// Fits on the leading rows, scores on the trailing round(fraction * n) rows,
/// then refits the chosen penalty on all rows.
struct ValidationSplit {
  double fraction = 0.2;
};
using HybridSelection = std::variant<OracleTestLoss, ValidationSplit>;

/// {1/10, 1/5, 1/2, 1, 2, 5, 10}
std::vector<double> default_lasso_grid();

/// Lasso with penalty m * sigma * sqrt(ln d / n) for each grid multiplier m,
/// selection, then min-norm interpolation of the remaining residual.
BaselineResult hybrid_interpolator(const RegressionInstance& inst, std::span<const double> grid,
                                   const HybridSelection& selection, const LassoConfig& base = {});

/// eta = 0.1, alpha = 1e-15, epsilon = 1e-4, lambda = 1, v pinned at zero.
TrainConfig second_order_defaults();

/// GD on lambda(w^2 - u^2) only. Throws std::runtime_error on divergence; a
/// run that ends at cfg.max_iters is returned with stop=max_iters in meta.
BaselineResult second_order_gd(const RegressionInstance& inst, TrainConfig cfg);

}  // namespace benign
