#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "benign/baselines.hpp"
#include "test_support.hpp"

using namespace benign;
using namespace benign::testing;

namespace {

Eigen::MatrixXd pseudoinverse(const Matrix& X) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::MatrixXd inv_s = Eigen::MatrixXd::Zero(X.cols(), X.rows());
  for (Index i = 0; i < sv.size(); ++i) inv_s(i, i) = 1.0 / sv[i];
  return svd.matrixV() * inv_s * svd.matrixU().transpose();
}

/// Proximal gradient (ISTA) in extended precision with step 1/L.
Vector ista_oracle(const Matrix& X, const Vector& y, double l1, int iterations) {
  using Ext = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const Ext A = X.cast<long double>();
  const ExtVector b = y.cast<long double>();
  const long double n = static_cast<long double>(X.rows());
  const Ext gram = A.transpose() * A / n;
  const ExtVector xty = A.transpose() * b / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.cast<double>());
  const long double step = 1.0L / (1.0001L * eig.eigenvalues().maxCoeff());
  ExtVector beta = ExtVector::Zero(X.cols());
  for (int it = 0; it < iterations; ++it) {
    const ExtVector z = beta - step * (gram * beta - xty);
    for (Index j = 0; j < z.size(); ++j) {
      const long double t = step * l1;
      beta[j] = z[j] > t ? z[j] - t : (z[j] < -t ? z[j] + t : 0.0L);
    }
  }
  return beta.cast<double>();
}

RegressionInstance sparse_instance(Rng& rng, Index n, Index d, double sigma) {
  Vector beta = Vector::Zero(d);
  beta.head(3) << 1.0, -0.8, 0.6;
  return RegressionInstance::from_parts(random_matrix(rng, n, d), beta, random_vector(rng, n, sigma), sigma);
}

}  // namespace

TEST_CASE("min_l2: square design is the unique interpolator") {
  Rng rng(31);
  const Matrix X = random_matrix(rng, 5, 5);
  const Vector y = random_vector(rng, 5);
  const Vector beta = min_norm_solution(X, y);
  const Vector direct = Eigen::MatrixXd(X).partialPivLu().solve(y);
  CHECK((beta - direct).norm() <= 1e-10 * direct.norm());
}

TEST_CASE("min_l2: zero target gives zero") {
  Rng rng(32);
  const Matrix X = random_matrix(rng, 6, 20);
  CHECK(min_norm_solution(X, Vector::Zero(6)).isZero(0.0));
}

TEST_CASE("min_l2: matches the SVD pseudoinverse and has minimal norm") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(rng, 6, 20, 2, 0.3);
    const BaselineResult res = min_l2_interpolator(inst);
    const Vector oracle = pseudoinverse(inst.X) * inst.y;
    CHECK((res.beta - oracle).norm() <= 1e-10 * oracle.norm());
    CHECK(res.train_resid_norm <= 1e-8 * inst.y.norm());
    CHECK(res.method == Method::MinL2);
    CHECK(rel_err(res.test_loss_l2, (res.beta - inst.beta_star).norm()) < 1e-14);

    const Eigen::MatrixXd Xd = inst.X;
    const Eigen::LLT<Eigen::MatrixXd> llt(Xd * Xd.transpose());
    const double base = res.beta.norm();
    for (int k = 0; k < 100; ++k) {
      const Vector z0 = random_vector(rng, 20);
      const Vector z = z0 - Xd.transpose() * llt.solve(Xd * z0);
      CHECK(base <= (res.beta + z).norm());
    }
  }
}

TEST_CASE("min_l2: rank-deficient design is reported") {
  Matrix X(3, 6);
  X.setZero();
  X.row(0).setOnes();
  X.row(1).setOnes();
  X(2, 3) = 1.0;
  CHECK_THROWS_AS(min_norm_solution(X, Vector::Ones(3)), std::runtime_error);
  CHECK_THROWS_AS(min_norm_solution(X, Vector::Ones(2)), std::invalid_argument);
}

TEST_CASE("lasso: large penalty gives the zero solution") {
  Rng rng(34);
  const auto inst = random_instance(rng, 30, 50, 3, 0.1);
  const double lmax = (inst.X.transpose() * inst.y / 30.0).lpNorm<Eigen::Infinity>();
  LassoConfig cfg;
  cfg.l1_penalty = lmax;
  const LassoFit fit = lasso_fit(inst.X, inst.y, cfg);
  CHECK(fit.converged);
  CHECK(fit.beta.isZero(0.0));
  CHECK(fit.sweeps == 1);
}

TEST_CASE("lasso: orthogonal design has the soft-threshold closed form") {
  Rng rng(35);
  const Index n = 40, d = 8;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(random_matrix(rng, n, d)));
  const Matrix X = Eigen::MatrixXd(qr.householderQ()).leftCols(d) * std::sqrt(static_cast<double>(n));
  const Vector y = random_vector(rng, n);
  LassoConfig cfg;
  cfg.l1_penalty = 0.15;
  cfg.tol = 1e-13;
  const LassoFit fit = lasso_fit(X, y, cfg);
  REQUIRE(fit.converged);
  const Vector c = X.transpose() * y / static_cast<double>(n);
  for (Index j = 0; j < d; ++j) {
    const double expected = std::copysign(std::max(std::abs(c[j]) - 0.15, 0.0), c[j]);
    CHECK(std::abs(fit.beta[j] - expected) <= 1e-10);
  }
}

TEST_CASE("lasso: objective matches a proximal-gradient oracle") {
  Rng rng(36);
  for (double l1 : {0.02, 0.1, 0.4}) {
    const Matrix X = random_matrix(rng, 40, 10);
    const Vector y = random_vector(rng, 40);
    LassoConfig cfg;
    cfg.l1_penalty = l1;
    const LassoFit fit = lasso_fit(X, y, cfg);
    REQUIRE(fit.converged);
    const Vector oracle = ista_oracle(X, y, l1, 20000);
    const double got = lasso_objective(X, y, fit.beta, l1);
    const double want = lasso_objective(X, y, oracle, l1);
    CHECK(rel_err(got, want) <= 1e-6);
    CHECK((fit.beta - oracle).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("lasso: KKT conditions and monotone objective") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 20 + static_cast<Index>(rng.below(40));
    const Index d = 30 + static_cast<Index>(rng.below(200));
    const auto inst = random_instance(rng, n, d, 3, 0.2);
    LassoConfig cfg;
    cfg.l1_penalty = 0.05 + 0.2 * rng.uniform01();
    const LassoFit fit = lasso_fit(inst.X, inst.y, cfg);
    REQUIRE(fit.converged);
    const Vector corr = inst.X.transpose() * (inst.y - inst.X * fit.beta) / static_cast<double>(n);
    const double slack = 1e-6;
    for (Index j = 0; j < d; ++j) {
      if (fit.beta[j] != 0.0) {
        CHECK(std::abs(corr[j] - std::copysign(cfg.l1_penalty, fit.beta[j])) <= slack);
      } else {
        CHECK(std::abs(corr[j]) <= cfg.l1_penalty + slack);
      }
    }
    for (std::size_t k = 1; k < fit.objective_history.size(); ++k) {
      CHECK(fit.objective_history[k] <= fit.objective_history[k - 1] * (1.0 + 1e-12));
    }
    CHECK(rel_err(fit.objective_history.back(), lasso_objective(inst.X, inst.y, fit.beta, cfg.l1_penalty)) <= 1e-10);
  }
}

TEST_CASE("lasso: warm-start path reaches the same solution as a cold start") {
  Rng rng(47);
  const auto inst = random_instance(rng, 30, 80, 3, 0.2);
  LassoConfig cfg;
  cfg.l1_penalty = 0.01;
  cfg.tol = 1e-12;
  const LassoFit path = lasso_fit(inst.X, inst.y, cfg);
  cfg.path_ratio = 0.0;
  const LassoFit cold = lasso_fit(inst.X, inst.y, cfg);
  REQUIRE(path.converged);
  REQUIRE(cold.converged);
  CHECK(path.path_stages > 0);
  CHECK(cold.path_stages == 0);
  CHECK((path.beta - cold.beta).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(lasso_zero_threshold(inst.X, inst.y) ==
        doctest::Approx((inst.X.transpose() * inst.y / 30.0).lpNorm<Eigen::Infinity>()).epsilon(1e-14));
  cfg.path_ratio = 1.0;
  CHECK_THROWS_AS(lasso_fit(inst.X, inst.y, cfg), std::invalid_argument);
}

TEST_CASE("lasso: non-convergence and bad configs are reported") {
  Rng rng(38);
  const auto inst = random_instance(rng, 20, 60, 3, 0.2);
  LassoConfig cfg;
  cfg.l1_penalty = 1e-3;
  cfg.max_sweeps = 2;
  CHECK_THROWS_AS(lasso_coordinate_descent(inst, cfg), ConvergenceError);
  cfg.max_sweeps = 0;
  CHECK_THROWS_AS(lasso_coordinate_descent(inst, cfg), std::invalid_argument);
  cfg = LassoConfig{};
  cfg.l1_penalty = -1.0;
  CHECK_THROWS_AS(lasso_coordinate_descent(inst, cfg), std::invalid_argument);
}

TEST_CASE("hybrid: one-element grid equals Lasso followed by min-norm fitting") {
  Rng rng(39);
  const auto inst = sparse_instance(rng, 30, 120, 0.2);
  const double m = 1.0;
  const double l1 = m * inst.sigma * std::sqrt(std::log(120.0) / 30.0);
  const std::vector<double> grid{m};
  const BaselineResult hybrid = hybrid_interpolator(inst, grid, OracleTestLoss{});
  LassoConfig cfg;
  cfg.l1_penalty = l1;
  const LassoFit fit = lasso_fit(inst.X, inst.y, cfg);
  const Vector expected = fit.beta + min_norm_solution(inst.X, inst.y - multiply(inst.X, fit.beta));
  CHECK((hybrid.beta - expected).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(hybrid.train_resid_norm <= 1e-8 * inst.y.norm());
  const BaselineResult val = hybrid_interpolator(inst, grid, ValidationSplit{});
  CHECK((val.beta - expected).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("hybrid: noiseless recovery is exact") {
  Rng rng(40);
  const auto clean = sparse_instance(rng, 60, 200, 0.0);
  const auto scale_from = RegressionInstance::from_parts(clean.X, clean.beta_star, Vector::Zero(60), 1e-6);
  const BaselineResult res = hybrid_interpolator(scale_from, default_lasso_grid(), OracleTestLoss{});
  CHECK(res.test_loss_l2 <= 1e-6);
  CHECK_THROWS_AS(hybrid_interpolator(clean, default_lasso_grid(), OracleTestLoss{}), std::invalid_argument);
}

TEST_CASE("hybrid: interpolation and grid-order invariance") {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = sparse_instance(rng, 40, 300, 0.3);
    std::vector<double> grid = default_lasso_grid();
    const BaselineResult a = hybrid_interpolator(inst, grid, OracleTestLoss{});
    CHECK(a.train_resid_norm <= 1e-8 * inst.y.norm());
    std::reverse(grid.begin(), grid.end());
    const BaselineResult b = hybrid_interpolator(inst, grid, OracleTestLoss{});
    CHECK(a.meta_string() == b.meta_string());
    CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("hybrid: oracle selection minimizes the Lasso test loss") {
  Rng rng(42);
  const auto inst = sparse_instance(rng, 40, 300, 0.3);
  const auto grid = default_lasso_grid();
  const BaselineResult res = hybrid_interpolator(inst, grid, OracleTestLoss{});
  const double scale = inst.sigma * std::sqrt(std::log(300.0) / 40.0);
  double best = 1e300, best_m = 0.0;
  for (double m : grid) {
    LassoConfig cfg;
    cfg.l1_penalty = m * scale;
    const double loss = (lasso_fit(inst.X, inst.y, cfg).beta - inst.beta_star).norm();
    if (loss < best) best = loss, best_m = m;
  }
  CHECK(res.meta_string().find("multiplier=" + std::to_string(static_cast<int>(best_m))) != std::string::npos);
}

TEST_CASE("hybrid: validation split selects on held-out rows") {
  Rng rng(43);
  const auto inst = sparse_instance(rng, 50, 200, 0.3);
  const auto grid = default_lasso_grid();
  const BaselineResult res = hybrid_interpolator(inst, grid, ValidationSplit{0.2});
  const double scale = inst.sigma * std::sqrt(std::log(200.0) / 50.0);
  double best = 1e300;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    LassoConfig cfg;
    cfg.l1_penalty = grid[i] * scale;
    const Vector beta = lasso_fit(inst.X.topRows(40), inst.y.head(40), cfg).beta;
    const double score = (inst.X.bottomRows(10) * beta - inst.y.tail(10)).norm();
    if (score < best) best = score, best_i = i;
  }
  const std::vector<double> only{grid[best_i]};
  const BaselineResult refit = hybrid_interpolator(inst, only, OracleTestLoss{});
  CHECK((res.beta - refit.beta).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(res.meta_string().find("selection=validation") != std::string::npos);
  CHECK_THROWS_AS(hybrid_interpolator(inst, grid, ValidationSplit{1.5}), std::invalid_argument);
  CHECK_THROWS_AS(hybrid_interpolator(inst, std::vector<double>{}, OracleTestLoss{}), std::invalid_argument);
}

TEST_CASE("second_order: zero at initialization") {
  Rng rng(44);
  const auto inst = random_instance(rng, 10, 30, 1, 0.1);
  TrainConfig cfg = second_order_defaults();
  const ModelState st = init_state(inst.d, cfg, inst);
  CHECK(st.beta().isZero(0.0));
  cfg.max_iters = 0;
  CHECK_THROWS_AS(second_order_gd(inst, cfg), std::invalid_argument);
}

TEST_CASE("second_order: noiseless one-sparse recovery") {
  Rng rng(45);
  Vector beta = Vector::Zero(100);
  beta[0] = 1.0;
  const auto inst = RegressionInstance::from_parts(random_matrix(rng, 50, 100), beta, Vector::Zero(50), 0.0);
  TrainConfig cfg = second_order_defaults();
  cfg.alpha = 1e-6;
  cfg.eta = 0.02;
  cfg.epsilon = 1e-12;
  cfg.max_iters = 200000;
  const BaselineResult res = second_order_gd(inst, cfg);
  CHECK(res.test_loss_l2 <= 1e-3);
  CHECK(res.meta_string().find("stop=loss_reached") != std::string::npos);
  CHECK(res.method == Method::SecondOrderGD);
}

TEST_CASE("second_order: v stays at zero and divergence is reported") {
  Rng rng(46);
  const auto inst = random_instance(rng, 10, 30, 2, 0.1);
  TrainConfig cfg = second_order_defaults();
  cfg.alpha = 0.1;
  cfg.eta = 0.01;
  cfg.max_iters = 50;
  const TrainResult run = train(inst, [&] {
    TrainConfig c = cfg;
    c.train_linear = false;
    return c;
  }());
  CHECK(run.final_state.v.isZero(0.0));
  cfg.eta = 1e4;
  cfg.alpha = 10.0;
  CHECK_THROWS_AS(second_order_gd(inst, cfg), std::runtime_error);
}

TEST_CASE("parse_method: round trip") {
  for (Method m : {Method::MinL2, Method::Lasso, Method::Hybrid, Method::SecondOrderGD, Method::Full}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("ridge"), std::invalid_argument);
}
