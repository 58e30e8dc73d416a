#include "benign/instance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "benign/rng.hpp"

namespace benign {

namespace {

static_assert(std::endian::native == std::endian::little, "instance dumps assume a little-endian host");

constexpr char kMagic[4] = {'S', 'I', 'L', '1'};

Vector resolve_beta(const BetaSpec& spec, Index d, Index s) {
  if (std::holds_alternative<ThreeSpike>(spec)) {
    if (s != 3) throw std::invalid_argument("ThreeSpike requires s = 3");
    if (d < 3) throw std::invalid_argument("ThreeSpike requires d >= 3");
    Vector beta = Vector::Zero(d);
    const double a = 1.0 / std::sqrt(3.0);
    beta[0] = a;
    beta[1] = -a;
    beta[2] = a;
    return beta;
  }
  const Vector& values = std::get<ExplicitVector>(spec).values;
  Vector beta = Vector::Zero(d);
  if (values.size() == s) {
    beta.head(s) = values;
  } else if (values.size() == d) {
    beta = values;
  } else {
    throw std::invalid_argument("explicit beta* must have length s or d");
  }
  return beta;
}

void check_leading_support(const Vector& beta, Index s) {
  for (Index k = 0; k < beta.size(); ++k) {
    const bool nonzero = beta[k] != 0.0;
    if (k < s && !nonzero) throw std::invalid_argument("beta* must be nonzero on its first s coordinates");
    if (k >= s && nonzero) throw std::invalid_argument("beta* must vanish beyond its first s coordinates");
  }
}

Index count_leading_support(const Vector& beta) {
  Index s = 0;
  while (s < beta.size() && beta[s] != 0.0) ++s;
  return s;
}

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated instance file");
  return value;
}

void read_doubles(std::ifstream& in, double* dst, Index count) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated instance file");
}

double support_delta(const Eigen::MatrixXd& gram) {
  if (gram.rows() == 1) return std::abs(gram(0, 0) - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return std::max(std::abs(ev[0] - 1.0), std::abs(ev[ev.size() - 1] - 1.0));
}

/// Supplies k x k blocks of X^T X / n, either from a precomputed full Gram or
/// column by column.
class SupportGram {
 public:
  SupportGram(const Matrix& X, Index k) : X_(X), k_(k), block_(k, k) {
    constexpr Index kFullGramLimit = 2048;
    if (X.cols() <= kFullGramLimit) {
      full_ = X.transpose() * X / static_cast<double>(X.rows());
      has_full_ = true;
    }
  }

  const Eigen::MatrixXd& block(const std::vector<Index>& support) {
    const double inv_n = 1.0 / static_cast<double>(X_.rows());
    for (Index a = 0; a < k_; ++a) {
      for (Index b = 0; b <= a; ++b) {
        double value;
        if (has_full_) {
          value = full_(support[a], support[b]);
        } else {
          value = X_.col(support[a]).dot(X_.col(support[b])) * inv_n;
        }
        block_(a, b) = value;
        block_(b, a) = value;
      }
    }
    return block_;
  }

 private:
  const Matrix& X_;
  Index k_;
  Eigen::MatrixXd block_;
  Eigen::MatrixXd full_;
  bool has_full_ = false;
};

double exhaustive_delta(const Matrix& X, Index k) {
  const Index d = X.cols();
  SupportGram gram(X, k);
  std::vector<Index> support(k);
  for (Index i = 0; i < k; ++i) support[i] = i;
  double delta = 0.0;
  for (;;) {
    delta = std::max(delta, support_delta(gram.block(support)));
    Index i = k - 1;
    while (i >= 0 && support[i] == d - k + i) --i;
    if (i < 0) break;
    ++support[i];
    for (Index j = i + 1; j < k; ++j) support[j] = support[j - 1] + 1;
  }
  return delta;
}

// Floyd's algorithm: k distinct indices, uniform over k-subsets of [0, d).
void sample_support(Rng& rng, Index d, Index k, std::vector<Index>& support) {
  support.clear();
  for (Index j = d - k; j < d; ++j) {
    const auto t = static_cast<Index>(rng.below(static_cast<std::uint64_t>(j + 1)));
    if (std::find(support.begin(), support.end(), t) == support.end()) {
      support.push_back(t);
    } else {
      support.push_back(j);
    }
  }
  std::sort(support.begin(), support.end());
}

double monte_carlo_delta(const Matrix& X, Index k, std::int64_t num_supports, unsigned workers,
                         std::uint64_t seed) {
  const Index d = X.cols();
  workers = std::max(1u, workers);
  std::vector<double> partial(workers, 0.0);
  auto run = [&](unsigned worker) {
    SupportGram gram(X, k);
    std::vector<Index> support;
    double delta = 0.0;
    for (std::int64_t i = worker; i < num_supports; i += workers) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
      sample_support(rng, d, k, support);
      delta = std::max(delta, support_delta(gram.block(support)));
    }
    partial[worker] = delta;
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  return *std::max_element(partial.begin(), partial.end());
}

double noise_ratio(double value, double scale) {
  if (scale > 0.0) return value / scale;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

RegressionInstance RegressionInstance::from_parts(Matrix X, Vector beta_star, Vector xi, double sigma,
                                                  std::uint64_t seed) {
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("design matrix must be nonempty");
  if (beta_star.size() != X.cols()) throw std::invalid_argument("beta* length must equal d");
  if (xi.size() != X.rows()) throw std::invalid_argument("noise length must equal n");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  RegressionInstance inst;
  inst.s = count_leading_support(beta_star);
  check_leading_support(beta_star, inst.s);
  inst.n = X.rows();
  inst.d = X.cols();
  inst.sigma = sigma;
  inst.seed = seed;
  inst.X = std::move(X);
  inst.beta_star = std::move(beta_star);
  inst.xi = std::move(xi);
  inst.y = multiply(inst.X, inst.beta_star) + inst.xi;
  return inst;
}

RegressionInstance generate_instance(Index n, Index d, Index s, double sigma, const BetaSpec& beta_spec,
                                     std::uint64_t seed) {
  if (n < 1 || d < 1 || s < 1) throw std::invalid_argument("n, d, s must be positive");
  if (s > d) throw std::invalid_argument("s must not exceed d");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be finite and nonnegative");
  Vector beta = resolve_beta(beta_spec, d, s);
  check_leading_support(beta, s);

  Rng rng(seed);
  Matrix X(n, d);
  double* x = X.data();
  for (Index i = 0; i < n * d; ++i) x[i] = rng.normal();
  Vector xi = Vector::Zero(n);
  if (sigma > 0.0) {
    for (Index i = 0; i < n; ++i) xi[i] = sigma * rng.normal();
  }
  return RegressionInstance::from_parts(std::move(X), std::move(beta), std::move(xi), sigma, seed);
}

Index auto_sample_size(Index d) {
  return static_cast<Index>(std::llround(3.0 * std::sqrt(static_cast<double>(d))));
}

std::int64_t binomial_saturating(std::int64_t d, std::int64_t k) noexcept {
  if (k < 0 || k > d) return 0;
  k = std::min(k, d - k);
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  __int128 value = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    value = value * (d - k + i) / i;
    if (value > kMax) return kMax;
  }
  return static_cast<std::int64_t>(value);
}

double estimate_rip_delta(const Matrix& X, Index k, const RipOptions& options, std::uint64_t seed) {
  const Index d = X.cols();
  if (k < 1 || k > d) throw std::invalid_argument("RIP order k must satisfy 1 <= k <= d");
  if (options.mode == RipMode::Exhaustive) {
    if (binomial_saturating(d, k) > options.exhaustive_cap) {
      throw std::invalid_argument("exhaustive RIP over " + std::to_string(d) + " choose " + std::to_string(k) +
                                  " supports exceeds the cap");
    }
    return exhaustive_delta(X, k);
  }
  if (options.num_supports < 1) throw std::invalid_argument("MonteCarlo RIP needs at least one support");
  return monte_carlo_delta(X, k, options.num_supports, options.workers, seed);
}

std::pair<double, double> gram_extreme_eigenvalues(const Matrix& X) {
  const Eigen::MatrixXd gram = X * X.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double lo = std::max(0.0, ev[0]);
  const double hi = std::max(lo, ev[ev.size() - 1]);
  return {lo, hi};
}

AssumptionReport regularity_report(const RegressionInstance& inst, Index rip_k, std::int64_t rip_budget) {
  if (rip_k < 1) throw std::invalid_argument("rip_k must be >= 1");
  if (rip_budget < 0) throw std::invalid_argument("rip_budget must be >= 0");
  std::optional<RipOptions> rip;
  if (rip_budget > 0) {
    RipOptions opts;
    if (binomial_saturating(inst.d, rip_k) <= std::min(rip_budget, opts.exhaustive_cap)) {
      opts.mode = RipMode::Exhaustive;
    } else {
      opts.mode = RipMode::MonteCarlo;
      opts.num_supports = rip_budget;
    }
    rip = opts;
  }
  return regularity_report(inst, rip_k, rip);
}

AssumptionReport regularity_report(const RegressionInstance& inst, Index rip_k,
                                   const std::optional<RipOptions>& rip) {
  const double n = static_cast<double>(inst.n);
  const double d = static_cast<double>(inst.d);
  const double sigma = inst.sigma;

  AssumptionReport report;
  report.xi_norm = norm2(inst.xi);
  const Vector xtxi = multiply_transposed(inst.X, inst.xi);
  report.xtxi_norm = norm2(xtxi);
  report.b_xi = norm_inf(xtxi) / n;
  std::tie(report.gram_lambda_min, report.gram_lambda_max) = gram_extreme_eigenvalues(inst.X);

  report.ratios.xi_norm = noise_ratio(report.xi_norm, sigma * std::sqrt(n));
  report.ratios.b_xi = noise_ratio(report.b_xi, sigma * std::sqrt(std::log(d) / n));
  report.ratios.xtxi_norm = noise_ratio(report.xtxi_norm, sigma * std::sqrt(d * n));
  report.ratios.lambda_min = report.gram_lambda_min / d;
  report.ratios.lambda_max = report.gram_lambda_max / d;

  if (rip) {
    if (rip_k < 1 || rip_k > inst.d) throw std::invalid_argument("rip_k must satisfy 1 <= k <= d");
    report.rip_k = rip_k;
    report.rip_exact = rip->mode == RipMode::Exhaustive;
    report.rip_delta = estimate_rip_delta(inst.X, rip_k, *rip, derive_seed(inst.seed, {0x726970ULL}));
    const double k = static_cast<double>(rip_k);
    const double scale = std::sqrt(k / n * std::log(d / k));
    report.ratios.rip = scale > 0.0 ? *report.rip_delta / scale : std::numeric_limits<double>::infinity();
  }
  return report;
}

void save_instance(const RegressionInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(inst.n));
  write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(inst.d));
  write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(inst.s));
  write_raw<double>(out, inst.sigma);
  write_raw<std::uint64_t>(out, inst.seed);
  out.write(reinterpret_cast<const char*>(inst.beta_star.data()),
            static_cast<std::streamsize>(inst.d * sizeof(double)));
  out.write(reinterpret_cast<const char*>(inst.xi.data()), static_cast<std::streamsize>(inst.n * sizeof(double)));
  out.write(reinterpret_cast<const char*>(inst.X.data()),
            static_cast<std::streamsize>(inst.n * inst.d * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RegressionInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a SIL1 instance file");
  }
  const auto n = static_cast<Index>(read_raw<std::uint64_t>(in));
  const auto d = static_cast<Index>(read_raw<std::uint64_t>(in));
  const auto s = static_cast<Index>(read_raw<std::uint64_t>(in));
  const double sigma = read_raw<double>(in);
  const std::uint64_t seed = read_raw<std::uint64_t>(in);
  if (n < 1 || d < 1 || s > d || n > (Index{1} << 32) || d > (Index{1} << 32)) {
    throw std::runtime_error("corrupt instance header in " + path.string());
  }
  Vector beta(d);
  Vector xi(n);
  Matrix X(n, d);
  read_doubles(in, beta.data(), d);
  read_doubles(in, xi.data(), n);
  read_doubles(in, X.data(), n * d);
  RegressionInstance inst = RegressionInstance::from_parts(std::move(X), std::move(beta), std::move(xi), sigma, seed);
  if (inst.s != s) throw std::runtime_error("instance header sparsity disagrees with beta* in " + path.string());
  return inst;
}

}  // namespace benign
