#include "benign/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "benign/decomposition.hpp"

namespace benign {

namespace {

// One coordinate of the GD update, given g = (X^T r / n)_k at the pre-step state.
inline void update_coordinate(double g, double eta, double lambda, bool linear, double& v, double& w,
                              double& u) noexcept {
  const double grad_w = g * (2.0 * lambda * w);
  const double grad_u = -g * (2.0 * lambda * u);
  w = w - eta * grad_w;
  u = u - eta * grad_u;
  if (linear) v = v - eta * g;
}

inline double beta_coordinate(double v, double w, double u, double lambda) noexcept {
  return v + lambda * (w * w - u * u);
}

void check_dims(const ModelState& st, const RegressionInstance& inst) {
  if (st.v.size() != inst.d || st.w.size() != inst.d || st.u.size() != inst.d) {
    throw std::invalid_argument("model dimension does not match instance");
  }
}

/// One fused pass over X: g = X^T r / n per column block, coordinate
/// updates, then z += X_J beta_J with the updated block. Leaves the next
/// residual in r. Returns false if some beta coordinate is non-finite.
bool fused_step(const RegressionInstance& inst, const TrainConfig& cfg, ModelState& st, Vector& r, Vector& z,
                Vector& grad_block, Vector& beta_block, StepMonitor& monitor) {
  const Matrix& X = inst.X;
  const Index n = inst.n;
  const Index d = inst.d;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double eta = cfg.eta;
  const double lambda = st.lambda;
  const bool linear = cfg.train_linear;
  double* v = st.v.data();
  double* w = st.w.data();
  double* u = st.u.data();
  double* g = grad_block.data();
  double* b = beta_block.data();
  const double* base = X.data();

  z.setZero(n);
  bool finite = true;
  double min_wu = monitor.min_wu;
  double max_wu = monitor.max_wu;
  for (Index j0 = 0; j0 < d; j0 += kColumnBlock) {
    const Index width = std::min(kColumnBlock, d - j0);
    std::fill(g, g + width, 0.0);
    for (Index i = 0; i < n; ++i) {
      const double ri = r[i];
      const double* row = base + i * d + j0;
      for (Index j = 0; j < width; ++j) g[j] += ri * row[j];
    }
    for (Index j = 0; j < width; ++j) {
      const Index k = j0 + j;
      update_coordinate(g[j] * inv_n, eta, lambda, linear, v[k], w[k], u[k]);
      b[j] = beta_coordinate(v[k], w[k], u[k], lambda);
      finite = finite && std::isfinite(b[j]);
      const double wu = w[k] * u[k];
      min_wu = std::min(min_wu, wu);
      max_wu = std::max(max_wu, wu);
    }
    for (Index i = 0; i < n; ++i) z[i] += dot_fixed(base + i * d + j0, b, width);
  }
  monitor.min_wu = min_wu;
  monitor.max_wu = max_wu;
  r = z - inst.y;
  ++st.step;
  return finite;
}

TraceRecord make_record(const ModelState& st, const RegressionInstance& inst, const TrainConfig& cfg,
                        const std::optional<DecompositionContext>& ctx, double sumsq) {
  TraceRecord rec;
  rec.t = st.step;
  rec.train_loss = sumsq / (2.0 * static_cast<double>(inst.n));
  rec.resid_norm = std::sqrt(sumsq);
  const Vector beta = st.beta();
  rec.test_loss_l2 = norm2(beta - inst.beta_star);
  rec.signal_error_inf = signal_error_inf(st, inst);
  rec.v_norm = norm2(st.v);
  rec.v_s_norm = std::sqrt(dot_fixed(st.v.data(), st.v.data(), inst.s));
  const Vector second = st.lambda * (st.w.array().square() - st.u.array().square()).matrix();
  rec.second_order_norm = norm2(second);
  for (Index k = 0; k < inst.d; ++k) {
    if (!inst.positive_signal(k)) rec.w_off_inf = std::max(rec.w_off_inf, std::abs(st.w[k]));
    if (!inst.negative_signal(k)) rec.u_off_inf = std::max(rec.u_off_inf, std::abs(st.u[k]));
  }
  if (ctx) {
    const DecompositionState dec = decomposition_state(st, inst, *ctx, cfg.eta);
    rec.a_t = dec.a_t;
    rec.b_t = dec.b_t;
    rec.gamma_inf = dec.gamma_inf;
    rec.zeta_inf = dec.zeta_inf;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.a_t = rec.b_t = rec.gamma_inf = rec.zeta_inf = nan;
  }
  return rec;
}

}  // namespace

Vector ModelState::beta() const { return effective_beta(*this); }

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (lambda && !(*lambda > 0.0 && std::isfinite(*lambda))) throw std::invalid_argument("lambda must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (!(stage1_const > 0.0)) throw std::invalid_argument("stage1_const must be positive");
}

const char* to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::LossReached: return "loss_reached";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::Diverged: return "diverged";
  }
  return "unknown";
}

double default_lambda(Index n, Index d, double sigma) {
  if (n < 2) throw std::invalid_argument("default lambda needs n >= 2");
  if (d < 1) throw std::invalid_argument("default lambda needs d >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("default lambda needs sigma > 0; pass lambda explicitly");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  return 100.0 * dd / (sigma * nn * std::log(nn) * (std::sqrt(std::log(dd) / nn) + std::sqrt(nn / dd)));
}

ModelState init_state(Index d, const TrainConfig& cfg, const RegressionInstance& inst) {
  if (d != inst.d) throw std::invalid_argument("init_state dimension does not match instance");
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  ModelState st;
  st.v = Vector::Zero(d);
  st.w = Vector::Constant(d, cfg.alpha);
  st.u = Vector::Constant(d, cfg.alpha);
  st.lambda = cfg.lambda ? *cfg.lambda : default_lambda(inst.n, inst.d, inst.sigma);
  st.step = 0;
  return st;
}

Vector effective_beta(const ModelState& st) {
  Vector beta(st.dim());
  for (Index k = 0; k < st.dim(); ++k) beta[k] = beta_coordinate(st.v[k], st.w[k], st.u[k], st.lambda);
  return beta;
}

ResidualLoss residual_and_loss(const ModelState& st, const RegressionInstance& inst) {
  check_dims(st, inst);
  ResidualLoss out;
  multiply(inst.X, st.beta(), out.r);
  out.r -= inst.y;
  out.loss = dot_fixed(out.r.data(), out.r.data(), inst.n) / (2.0 * static_cast<double>(inst.n));
  return out;
}

Gradients gradients(const ModelState& st, const RegressionInstance& inst) {
  const ResidualLoss rl = residual_and_loss(st, inst);
  Gradients out;
  out.g_v = multiply_transposed(inst.X, rl.r, 1.0 / static_cast<double>(inst.n));
  out.g_w.resize(inst.d);
  out.g_u.resize(inst.d);
  for (Index k = 0; k < inst.d; ++k) {
    const double g = out.g_v[k];
    out.g_w[k] = g * (2.0 * st.lambda * st.w[k]);
    out.g_u[k] = -g * (2.0 * st.lambda * st.u[k]);
  }
  return out;
}

StepResult gd_step(const ModelState& st, const RegressionInstance& inst, const TrainConfig& cfg) {
  const ResidualLoss rl = residual_and_loss(st, inst);
  Vector g;
  multiply_transposed(inst.X, rl.r, 1.0 / static_cast<double>(inst.n), g);
  StepResult out{st, false};
  ModelState& next = out.state;
  for (Index k = 0; k < inst.d; ++k) {
    update_coordinate(g[k], cfg.eta, st.lambda, cfg.train_linear, next.v[k], next.w[k], next.u[k]);
    if (!std::isfinite(beta_coordinate(next.v[k], next.w[k], next.u[k], next.lambda))) out.diverged = true;
  }
  ++next.step;
  return out;
}

TrainResult train(const RegressionInstance& inst, const TrainConfig& cfg, const RecordHook& hook) {
  cfg.validate();
  return train(inst, cfg, init_state(inst.d, cfg, inst), hook);
}

TrainResult train(const RegressionInstance& inst, const TrainConfig& cfg, ModelState start, const RecordHook& hook) {
  cfg.validate();
  check_dims(start, inst);
  std::optional<DecompositionContext> ctx;
  if (cfg.track_decomposition) ctx.emplace(inst);

  TrainResult result;
  ModelState& st = result.final_state;
  st = std::move(start);

  Vector r;
  multiply(inst.X, st.beta(), r);
  r -= inst.y;
  Vector z(inst.n);
  Vector grad_block(kColumnBlock);
  Vector beta_block(kColumnBlock);

  const Vector wu = st.w.cwiseProduct(st.u);
  result.monitor.min_wu = wu.minCoeff();
  result.monitor.max_wu = wu.maxCoeff();

  double sumsq = dot_fixed(r.data(), r.data(), inst.n);
  const double two_n = 2.0 * static_cast<double>(inst.n);
  const std::int64_t first_step = st.step;
  bool diverged = false;
  for (;;) {
    const double loss = sumsq / two_n;
    const bool reached = loss <= cfg.epsilon;
    const bool exhausted = st.step - first_step >= cfg.max_iters;
    const bool finished = reached || exhausted || diverged;
    if (finished || st.step % cfg.record_every == 0) {
      result.trace.push_back(make_record(st, inst, cfg, ctx, sumsq));
      if (hook) hook(result.trace.back(), st);
    }
    if (diverged) {
      result.stop = StopReason::Diverged;
      break;
    }
    if (reached) {
      result.stop = StopReason::LossReached;
      break;
    }
    if (exhausted) {
      result.stop = StopReason::MaxIters;
      break;
    }
    const double previous_norm = std::sqrt(sumsq);
    diverged = !fused_step(inst, cfg, st, r, z, grad_block, beta_block, result.monitor);
    sumsq = dot_fixed(r.data(), r.data(), inst.n);
    if (!std::isfinite(sumsq)) diverged = true;
    if (!diverged) {
      result.monitor.max_residual_increase =
          std::max(result.monitor.max_residual_increase, std::sqrt(sumsq) - previous_norm);
    }
  }
  return result;
}

double signal_error_inf(const ModelState& st, const RegressionInstance& inst) {
  const double ratio = static_cast<double>(inst.d) / static_cast<double>(inst.n);
  double worst = 0.0;
  for (Index k = 0; k < inst.s; ++k) {
    double value = ratio * st.v[k];
    if (inst.positive_signal(k)) value += st.lambda * (st.w[k] * st.w[k]);
    if (inst.negative_signal(k)) value -= st.lambda * (st.u[k] * st.u[k]);
    worst = std::max(worst, std::abs(value - inst.beta_star[k]));
  }
  return worst;
}

double stage1_threshold(const RegressionInstance& inst, double b_xi, double c) {
  return c * (b_xi + inst.sigma * std::sqrt(static_cast<double>(inst.n) / static_cast<double>(inst.d)));
}

std::optional<std::int64_t> detect_stage1_end(const std::vector<TraceRecord>& trace,
                                              const RegressionInstance& inst, double b_xi, double c) {
  const double threshold = stage1_threshold(inst, b_xi, c);
  for (const TraceRecord& rec : trace) {
    if (rec.signal_error_inf <= threshold) return rec.t;
  }
  return std::nullopt;
}

}  // namespace benign
