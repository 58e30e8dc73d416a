#include "benign/decomposition.hpp"

#include <cmath>
#include <stdexcept>

namespace benign {

IdealCoefficients ideal_coefficients(std::int64_t t, double eta, Index n, Index d) {
  if (t < 0) throw std::invalid_argument("ideal_coefficients needs t >= 0");
  if (t == 0) return {0.0, 0.0};
  const double rate = eta * static_cast<double>(d) / static_cast<double>(n);
  const double tt = static_cast<double>(t);
  // 1 - (1 - rate)^t; log1p/expm1 keep the small-rate regime accurate.
  const double saturation = rate < 1.0 ? -std::expm1(tt * std::log1p(-rate)) : 1.0 - std::pow(1.0 - rate, tt);
  return {saturation / static_cast<double>(d), saturation / static_cast<double>(n)};
}

DecompositionContext::DecompositionContext(const RegressionInstance& inst)
    : xt_xi(multiply_transposed(inst.X, inst.xi)) {}

GramDecomposition decompose_gram_term(const ModelState& st, const RegressionInstance& inst,
                                      const DecompositionContext& ctx, double b_t) {
  if (st.v.size() != inst.d) throw std::invalid_argument("model dimension does not match instance");
  const double ratio = static_cast<double>(inst.d) / static_cast<double>(inst.n);
  GramDecomposition out;
  out.xtxv = multiply_transposed(inst.X, multiply(inst.X, st.v), 1.0 / static_cast<double>(inst.n));
  out.signal = Vector::Zero(inst.d);
  out.noise_fit = Vector::Zero(inst.d);
  for (Index k = 0; k < inst.d; ++k) {
    if (inst.in_support(k)) {
      out.signal[k] = ratio * st.v[k];
    } else {
      out.noise_fit[k] = b_t * ctx.xt_xi[k];
    }
  }
  out.gamma = out.xtxv - out.signal - out.noise_fit;
  return out;
}

Remainders decomposition_residuals(const ModelState& st, const RegressionInstance& inst,
                                   const DecompositionContext& ctx, double a_t, double b_t) {
  Remainders out;
  out.gamma_inf = norm_inf(decompose_gram_term(st, inst, ctx, b_t).gamma);
  for (Index k = 0; k < inst.d; ++k) {
    const double off_support = inst.in_support(k) ? 0.0 : st.v[k];
    out.zeta_inf = std::max(out.zeta_inf, std::abs(off_support - a_t * ctx.xt_xi[k]));
  }
  return out;
}

Remainders decomposition_residuals(const ModelState& st, const RegressionInstance& inst, double a_t, double b_t) {
  return decomposition_residuals(st, inst, DecompositionContext(inst), a_t, b_t);
}

DecompositionState decomposition_state(const ModelState& st, const RegressionInstance& inst,
                                       const DecompositionContext& ctx, double eta) {
  const IdealCoefficients coeffs = ideal_coefficients(st.step, eta, inst.n, inst.d);
  const Remainders rem = decomposition_residuals(st, inst, ctx, coeffs.a_t, coeffs.b_t);
  return {coeffs.a_t, coeffs.b_t, rem.gamma_inf, rem.zeta_inf, st.step};
}

}  // namespace benign
