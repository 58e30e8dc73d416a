#include "benign/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "benign/csv.hpp"

namespace benign {

namespace {

double soft_threshold(double x, double t) noexcept {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

Matrix take_rows(const Matrix& X, Index first, Index count) { return X.middleRows(first, count); }

}  // namespace

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::MinL2: return "min_l2";
    case Method::Lasso: return "lasso";
    case Method::Hybrid: return "hybrid";
    case Method::SecondOrderGD: return "second_order";
    case Method::Full: return "full";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::MinL2, Method::Lasso, Method::Hybrid, Method::SecondOrderGD, Method::Full}) {
    if (name == to_string(m)) return m;
  }
  if (name == "secondorder" || name == "SecondOrder") return Method::SecondOrderGD;
  if (name == "Full") return Method::Full;
  if (name == "Hybrid") return Method::Hybrid;
  throw std::invalid_argument("unknown method '" + name + "'");
}

BaselineResult BaselineResult::make(const RegressionInstance& inst, Vector beta, Method method, MetaFields meta) {
  BaselineResult out;
  Vector r = multiply(inst.X, beta);
  r -= inst.y;
  out.train_resid_norm = norm2(r);
  out.test_loss_l2 = norm2(beta - inst.beta_star);
  out.beta = std::move(beta);
  out.method = method;
  out.meta = std::move(meta);
  return out;
}

std::string BaselineResult::meta_string() const {
  std::string out;
  for (const auto& [key, value] : meta) {
    if (!out.empty()) out += ';';
    out += key;
    out += '=';
    out += value;
  }
  return out;
}

Vector min_norm_solution(const Matrix& X, const Vector& rhs) {
  if (rhs.size() != X.rows()) throw std::invalid_argument("right-hand side length must equal n");
  const Eigen::MatrixXd gram = X * X.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("Gram matrix X X^T is not positive definite (rank-deficient design)");
  }
  Vector z = llt.solve(rhs);
  Vector beta = multiply_transposed(X, z);
  // One step of iterative refinement; the correction stays in the row space.
  const Vector defect = rhs - multiply(X, beta);
  z = llt.solve(defect);
  beta += multiply_transposed(X, z);
  return beta;
}

BaselineResult min_l2_interpolator(const RegressionInstance& inst) {
  return BaselineResult::make(inst, min_norm_solution(inst.X, inst.y), Method::MinL2);
}

void LassoConfig::validate() const {
  if (!(l1_penalty > 0.0) || !std::isfinite(l1_penalty)) throw std::invalid_argument("l1_penalty must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("lasso tol must be positive");
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be positive");
  if (!(path_ratio >= 0.0 && path_ratio < 1.0)) throw std::invalid_argument("path_ratio must be in [0, 1)");
}

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double l1_penalty) {
  const Vector r = multiply(X, beta) - y;
  return dot_fixed(r.data(), r.data(), r.size()) / (2.0 * static_cast<double>(X.rows())) +
         l1_penalty * beta.lpNorm<1>();
}

namespace {

/// Cyclic coordinate descent on one penalty, continuing from fit.beta with
/// resid = y - X fit.beta. Returns whether the tolerance was met.
bool descend(const Eigen::MatrixXd& cols, const Vector& col_scale, double l1, const LassoConfig& cfg,
             Vector& resid, LassoFit& fit, bool record) {
  const Index n = cols.rows();
  const Index d = cols.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  auto objective = [&] {
    return dot_fixed(resid.data(), resid.data(), n) * 0.5 * inv_n + l1 * fit.beta.lpNorm<1>();
  };
  if (record) fit.objective_history.push_back(objective());

  auto update = [&](Index j) {
    if (col_scale[j] == 0.0) return 0.0;
    const double* c = cols.col(j).data();
    const double old = fit.beta[j];
    const double rho = dot_fixed(c, resid.data(), n) * inv_n + col_scale[j] * old;
    const double fresh = soft_threshold(rho, l1) / col_scale[j];
    const double delta = fresh - old;
    if (delta != 0.0) {
      for (Index i = 0; i < n; ++i) resid[i] -= c[i] * delta;
      fit.beta[j] = fresh;
    }
    return std::abs(delta);
  };

  std::vector<Index> active;
  std::int64_t sweeps = 0;
  while (sweeps < cfg.max_sweeps) {
    double change = 0.0;
    for (Index j = 0; j < d; ++j) change = std::max(change, update(j));
    ++sweeps;
    ++fit.sweeps;
    fit.last_change = change;
    if (record) fit.objective_history.push_back(objective());
    if (change <= cfg.tol) return true;
    active.clear();
    for (Index j = 0; j < d; ++j) {
      if (fit.beta[j] != 0.0) active.push_back(j);
    }
    while (sweeps < cfg.max_sweeps) {
      double inner = 0.0;
      for (Index j : active) inner = std::max(inner, update(j));
      ++sweeps;
      ++fit.sweeps;
      fit.last_change = inner;
      if (record) fit.objective_history.push_back(objective());
      if (inner <= cfg.tol) break;
    }
  }
  return false;
}

}  // namespace

double lasso_zero_threshold(const Matrix& X, const Vector& y) {
  return norm_inf(multiply_transposed(X, y, 1.0 / static_cast<double>(X.rows())));
}

LassoFit lasso_fit(const Matrix& X, const Vector& y, const LassoConfig& cfg) {
  cfg.validate();
  const Index n = X.rows();
  const Index d = X.cols();
  if (y.size() != n) throw std::invalid_argument("target length must equal n");
  const double inv_n = 1.0 / static_cast<double>(n);

  // Column-major copy so each coordinate update streams one contiguous column.
  const Eigen::MatrixXd cols = X;
  Vector col_scale(d);
  for (Index j = 0; j < d; ++j) {
    const double* c = cols.col(j).data();
    col_scale[j] = dot_fixed(c, c, n) * inv_n;
  }

  LassoFit fit;
  fit.beta = Vector::Zero(d);
  Vector resid = y;  // y - X beta

  // Small penalties are reached through a geometric path of warm starts;
  // cold-started descent at a tiny penalty crawls once more than n
  // coordinates are active.
  if (cfg.path_ratio > 0.0) {
    const double top = lasso_zero_threshold(X, y);
    for (double stage = top * cfg.path_ratio; stage > cfg.l1_penalty; stage *= cfg.path_ratio) {
      descend(cols, col_scale, stage, cfg, resid, fit, false);
      ++fit.path_stages;
    }
  }
  fit.converged = descend(cols, col_scale, cfg.l1_penalty, cfg, resid, fit, true);
  return fit;
}

BaselineResult lasso_coordinate_descent(const RegressionInstance& inst, const LassoConfig& cfg) {
  LassoFit fit = lasso_fit(inst.X, inst.y, cfg);
  if (!fit.converged) {
    throw ConvergenceError("lasso did not converge in " + std::to_string(cfg.max_sweeps) +
                           " sweeps (last change " + format_double(fit.last_change) + ")");
  }
  MetaFields meta{{"l1_penalty", format_double(cfg.l1_penalty)},
                  {"sweeps", std::to_string(fit.sweeps)},
                  {"tol", format_double(cfg.tol)},
                  {"max_sweeps", std::to_string(cfg.max_sweeps)}};
  return BaselineResult::make(inst, std::move(fit.beta), Method::Lasso, std::move(meta));
}

std::vector<double> default_lasso_grid() { return {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}; }

BaselineResult hybrid_interpolator(const RegressionInstance& inst, std::span<const double> grid,
                                   const HybridSelection& selection, const LassoConfig& base) {
  if (grid.empty()) throw std::invalid_argument("lasso grid must be nonempty");
  if (!(inst.sigma > 0.0)) throw std::invalid_argument("hybrid grid scale needs sigma > 0");
  const double scale = inst.sigma * std::sqrt(std::log(static_cast<double>(inst.d)) / static_cast<double>(inst.n));

  auto fit_with = [&](const Matrix& X, const Vector& y, double multiplier) {
    LassoConfig cfg = base;
    cfg.l1_penalty = multiplier * scale;
    LassoFit fit = lasso_fit(X, y, cfg);
    if (!fit.converged) {
      throw ConvergenceError("lasso did not converge at multiplier " + format_double(multiplier));
    }
    return fit;
  };

  std::size_t chosen = 0;
  LassoFit chosen_fit;
  if (std::holds_alternative<OracleTestLoss>(selection)) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      LassoFit fit = fit_with(inst.X, inst.y, grid[i]);
      const double loss = norm2(fit.beta - inst.beta_star);
      if (loss < best) {
        best = loss;
        chosen = i;
        chosen_fit = std::move(fit);
      }
    }
  } else {
    const double fraction = std::get<ValidationSplit>(selection).fraction;
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("validation fraction must be in (0, 1)");
    const Index held = std::clamp<Index>(static_cast<Index>(std::llround(fraction * static_cast<double>(inst.n))), 1,
                                         inst.n - 1);
    const Index kept = inst.n - held;
    const Matrix X_fit = take_rows(inst.X, 0, kept);
    const Vector y_fit = inst.y.head(kept);
    const Matrix X_val = take_rows(inst.X, kept, held);
    const Vector y_val = inst.y.tail(held);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const LassoFit fit = fit_with(X_fit, y_fit, grid[i]);
      const Vector err = multiply(X_val, fit.beta) - y_val;
      const double score = norm2(err);
      if (score < best) {
        best = score;
        chosen = i;
      }
    }
    chosen_fit = fit_with(inst.X, inst.y, grid[chosen]);
  }

  if (chosen_fit.beta.size() != inst.d) throw std::runtime_error("no finite lasso candidate on the grid");
  const Vector remainder = inst.y - multiply(inst.X, chosen_fit.beta);
  Vector beta = chosen_fit.beta + min_norm_solution(inst.X, remainder);
  MetaFields meta{{"multiplier", format_double(grid[chosen])},
                  {"l1_penalty", format_double(grid[chosen] * scale)},
                  {"sweeps", std::to_string(chosen_fit.sweeps)},
                  {"tol", format_double(base.tol)},
                  {"max_sweeps", std::to_string(base.max_sweeps)},
                  {"lasso_test_loss", format_double(norm2(chosen_fit.beta - inst.beta_star))},
                  {"selection", std::holds_alternative<OracleTestLoss>(selection) ? "oracle" : "validation"}};
  return BaselineResult::make(inst, std::move(beta), Method::Hybrid, std::move(meta));
}

TrainConfig second_order_defaults() {
  TrainConfig cfg;
  // With lambda = 1 the step size 1e-6 of the full model would need ~1e8
  // steps; the final test loss barely moves with eta below the stability edge.
  cfg.eta = 0.1;
  cfg.alpha = 1e-15;
  cfg.epsilon = 1e-4;
  cfg.lambda = 1.0;
  cfg.train_linear = false;
  cfg.track_decomposition = false;
  return cfg;
}

BaselineResult second_order_gd(const RegressionInstance& inst, TrainConfig cfg) {
  cfg.train_linear = false;
  cfg.track_decomposition = false;
  if (!cfg.lambda) cfg.lambda = 1.0;
  cfg.record_every = cfg.max_iters;
  TrainResult run = train(inst, cfg);
  if (run.stop == StopReason::Diverged) {
    throw std::runtime_error("second-order GD diverged at step " + std::to_string(run.final_state.step));
  }
  MetaFields meta{{"steps", std::to_string(run.final_state.step)},
                  {"stop", to_string(run.stop)},
                  {"eta", format_double(cfg.eta)},
                  {"alpha", format_double(cfg.alpha)},
                  {"lambda", format_double(*cfg.lambda)}};
  return BaselineResult::make(inst, run.final_state.beta(), Method::SecondOrderGD, std::move(meta));
}

}  // namespace benign
