#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "benign/instance.hpp"
#include "benign/linalg.hpp"

namespace benign {

/// Parameters of beta = v + lambda * (w*w - u*u).
struct ModelState {
  Vector v;
  Vector w;
  Vector u;
  double lambda = 1.0;
  std::int64_t step = 0;

  Index dim() const noexcept { return v.size(); }
  /// Recomputed on every call; never cached.
  Vector beta() const;
};

/// Hyperparameters for plain full-batch gradient descent.
struct TrainConfig {
  double eta = 1e-6;
  double alpha = 1e-10;
  std::optional<double> lambda;  ///< Empty: default_lambda(n, d, sigma).
  double epsilon = 1e-5;         ///< Stop once the training loss is <= epsilon.
  std::int64_t max_iters = 5'000'000;
  std::int64_t record_every = 100;
  double stage1_const = 1.0;
  bool track_decomposition = true;
  /// False pins v at zero, leaving the pure second-order model lambda(w*w - u*u).
  bool train_linear = true;

  void validate() const;
};

struct TraceRecord {
  std::int64_t t = 0;
  double train_loss = 0.0;
  double resid_norm = 0.0;
  double test_loss_l2 = 0.0;
  double signal_error_inf = 0.0;
  double v_norm = 0.0;
  double v_s_norm = 0.0;
  double second_order_norm = 0.0;
  double w_off_inf = 0.0;  ///< max |w_k| over k outside S+
  double u_off_inf = 0.0;  ///< max |u_k| over k outside S-
  double a_t = 0.0;
  double b_t = 0.0;
  double gamma_inf = 0.0;
  double zeta_inf = 0.0;
};

enum class StopReason { LossReached, MaxIters, Diverged };

const char* to_string(StopReason reason) noexcept;

/// Per-step quantities checked between records.
struct StepMonitor {
  double max_residual_increase = 0.0;  ///< max_t ||r(t+1)|| - ||r(t)||, or 0
  double min_wu = 0.0;                 ///< min over t, k of w_k u_k
  double max_wu = 0.0;                 ///< max over t, k of w_k u_k
};

struct TrainResult {
  ModelState final_state;
  std::vector<TraceRecord> trace;
  StopReason stop = StopReason::MaxIters;
  StepMonitor monitor;
};

using RecordHook = std::function<void(const TraceRecord&, const ModelState&)>;

double default_lambda(Index n, Index d, double sigma);

/// v = 0, w = u = alpha * 1, lambda resolved from cfg.
ModelState init_state(Index d, const TrainConfig& cfg, const RegressionInstance& inst);

Vector effective_beta(const ModelState& st);

struct ResidualLoss {
  Vector r;
  double loss = 0.0;
};

/// r = X beta - y, L = ||r||^2 / (2n).
ResidualLoss residual_and_loss(const ModelState& st, const RegressionInstance& inst);

struct Gradients {
  Vector g_w;
  Vector g_u;
  Vector g_v;
};

/// Loss gradients via g = X^T (X beta - y) / n without forming X^T X.
Gradients gradients(const ModelState& st, const RegressionInstance& inst);

struct StepResult {
  ModelState state;
  bool diverged = false;  ///< some coordinate of beta became non-finite
};

/// One simultaneous GD update of (w, u, v). Bitwise identical to the update
/// that train() performs at the same state.
StepResult gd_step(const ModelState& st, const RegressionInstance& inst, const TrainConfig& cfg);

/// Runs GD from init_state until the loss reaches cfg.epsilon, cfg.max_iters
/// steps, or divergence. Records t = 0, every cfg.record_every steps, and the
/// final step.
TrainResult train(const RegressionInstance& inst, const TrainConfig& cfg, const RecordHook& hook = {});
TrainResult train(const RegressionInstance& inst, const TrainConfig& cfg, ModelState start,
                  const RecordHook& hook = {});

/// || (d/n) v_S + lambda w_{S+}^2 - lambda u_{S-}^2 - beta* ||_inf
double signal_error_inf(const ModelState& st, const RegressionInstance& inst);

/// Stage-1 threshold c * (B_xi + sigma sqrt(n / d)).
double stage1_threshold(const RegressionInstance& inst, double b_xi, double c);

/// First recorded t whose signal error is at or below stage1_threshold.
std::optional<std::int64_t> detect_stage1_end(const std::vector<TraceRecord>& trace,
                                              const RegressionInstance& inst, double b_xi, double c);

}  // namespace benign
