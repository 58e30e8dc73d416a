#pragma once

#include <cstdint>

#include "benign/instance.hpp"
#include "benign/model.hpp"

namespace benign {

struct DecompositionState {
  double a_t = 0.0;
  double b_t = 0.0;
  double gamma_inf = 0.0;
  double zeta_inf = 0.0;
  std::int64_t t = 0;
};

struct IdealCoefficients {
  double a_t = 0.0;
  double b_t = 0.0;
};

/// b_t = (1 - (1 - eta d / n)^t) / n and a_t = (1 - (1 - eta d / n)^t) / d.
/// The saturation factor is evaluated as -expm1(t * log1p(-eta d / n)).
IdealCoefficients ideal_coefficients(std::int64_t t, double eta, Index n, Index d);

/// Per-instance constants reused at every recorded step.
struct DecompositionContext {
  Vector xt_xi;  ///< X^T xi

  explicit DecompositionContext(const RegressionInstance& inst);
};

struct Remainders {
  double gamma_inf = 0.0;
  double zeta_inf = 0.0;
};

/// Gamma = X^T X v / n - (d/n) v_S - b_t (X^T xi)_e,
/// Delta = v - v_S - a_t X^T xi; returns their sup norms.
Remainders decomposition_residuals(const ModelState& st, const RegressionInstance& inst, double a_t, double b_t);
Remainders decomposition_residuals(const ModelState& st, const RegressionInstance& inst,
                                   const DecompositionContext& ctx, double a_t, double b_t);

/// The three terms of the X^T X v / n decomposition, for callers that need
/// the vectors rather than their norms.
struct GramDecomposition {
  Vector xtxv;       ///< X^T X v / n
  Vector signal;     ///< (d/n) v_S
  Vector noise_fit;  ///< b_t (X^T xi)_e
  Vector gamma;      ///< remainder
};
GramDecomposition decompose_gram_term(const ModelState& st, const RegressionInstance& inst,
                                      const DecompositionContext& ctx, double b_t);

DecompositionState decomposition_state(const ModelState& st, const RegressionInstance& inst,
                                       const DecompositionContext& ctx, double eta);

}  // namespace benign
