#include "benign/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "benign/csv.hpp"
#include "benign/rng.hpp"

namespace benign {

namespace {

constexpr const char* kAutoNRule = "round(3*sqrt(d))";

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string optional_step(const std::optional<std::int64_t>& t) { return t ? std::to_string(*t) : "none"; }

void check_output_dir(const std::filesystem::path& path) {
  if (path.empty()) return;
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw std::runtime_error("output directory " + parent.string() + " does not exist");
  }
}

TrainConfig with_resolved_lambda(TrainConfig cfg, const RegressionInstance& inst, double lambda_scale) {
  const double base = cfg.lambda ? *cfg.lambda : default_lambda(inst.n, inst.d, inst.sigma);
  cfg.lambda = base * lambda_scale;
  return cfg;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace

Index DynamicsExperimentConfig::resolved_n() const { return n ? *n : auto_sample_size(d); }

void DynamicsExperimentConfig::validate() const {
  if (d < 1 || s < 1 || s > d) throw std::invalid_argument("dynamics config needs 1 <= s <= d");
  if (resolved_n() < 2) throw std::invalid_argument("dynamics config needs n >= 2");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  if (!(lambda_scale > 0.0)) throw std::invalid_argument("lambda scale must be positive");
  train.validate();
}

DynamicsOutcome run_dynamics(const DynamicsExperimentConfig& cfg) {
  cfg.validate();
  check_output_dir(cfg.output_path);
  const Index n = cfg.resolved_n();
  const BetaSpec spec = cfg.s == 3 ? BetaSpec{ThreeSpike{}}
                                   : BetaSpec{ExplicitVector{Vector::Constant(cfg.s, 1.0 / std::sqrt(double(cfg.s)))}};
  const RegressionInstance inst = generate_instance(n, cfg.d, cfg.s, cfg.sigma, spec, cfg.seed);
  const AssumptionReport report = regularity_report(inst, cfg.s + 1, 0);

  TrainConfig train_cfg = with_resolved_lambda(cfg.train, inst, cfg.lambda_scale);
  train_cfg.track_decomposition = true;
  TrainResult run = train(inst, train_cfg);

  DynamicsOutcome out;
  DynamicsSummary& sum = out.summary;
  sum.n = n;
  sum.d = cfg.d;
  sum.s = cfg.s;
  sum.sigma = cfg.sigma;
  sum.seed = cfg.seed;
  sum.lambda = *train_cfg.lambda;
  sum.stop = run.stop;
  sum.total_steps = run.final_state.step;
  sum.report = report;
  sum.monitor = run.monitor;
  sum.stage1_threshold = stage1_threshold(inst, report.b_xi, train_cfg.stage1_const);
  sum.stage1_end = detect_stage1_end(run.trace, inst, report.b_xi, train_cfg.stage1_const);
  const TraceRecord& last = run.trace.back();
  sum.final_train_loss = last.train_loss;
  sum.final_test_loss_l2 = last.test_loss_l2;
  const double beta_half = norm2(inst.beta_star) / 2.0;
  const double v_half = last.v_norm / 2.0;
  for (const TraceRecord& rec : run.trace) {
    sum.max_gamma_inf = std::max(sum.max_gamma_inf, rec.gamma_inf);
    sum.max_zeta_inf = std::max(sum.max_zeta_inf, rec.zeta_inf);
    if (!sum.second_order_half_step && rec.second_order_norm > beta_half) sum.second_order_half_step = rec.t;
    if (!sum.v_half_step && rec.v_norm > v_half) sum.v_half_step = rec.t;
  }
  out.trace = std::move(run.trace);

  if (!cfg.output_path.empty()) {
    write_trace_csv(cfg.output_path, out.trace);
    auto meta_path = cfg.output_path;
    meta_path += ".meta";
    std::ofstream meta(meta_path, std::ios::trunc);
    if (!meta) throw std::runtime_error("cannot open " + meta_path.string() + " for writing");
    write_summary(meta, sum);
    if (!meta) throw std::runtime_error("failed writing " + meta_path.string());
  }
  return out;
}

void write_summary(std::ostream& out, const DynamicsSummary& s) {
  out << "n=" << s.n << '\n'
      << "n_rule=" << kAutoNRule << '\n'
      << "d=" << s.d << '\n'
      << "s=" << s.s << '\n'
      << "sigma=" << format_double(s.sigma) << '\n'
      << "seed=" << s.seed << '\n'
      << "lambda=" << format_double(s.lambda) << '\n'
      << "stop_reason=" << to_string(s.stop) << '\n'
      << "total_steps=" << s.total_steps << '\n'
      << "stage1_end=" << optional_step(s.stage1_end) << '\n'
      << "stage1_threshold=" << format_double(s.stage1_threshold) << '\n'
      << "final_train_loss=" << format_double(s.final_train_loss) << '\n'
      << "final_test_loss_l2=" << format_double(s.final_test_loss_l2) << '\n'
      << "max_gamma_inf=" << format_double(s.max_gamma_inf) << '\n'
      << "max_zeta_inf=" << format_double(s.max_zeta_inf) << '\n'
      << "second_order_half_step=" << optional_step(s.second_order_half_step) << '\n'
      << "v_half_step=" << optional_step(s.v_half_step) << '\n'
      << "max_residual_increase=" << format_double(s.monitor.max_residual_increase) << '\n'
      << "min_wu=" << format_double(s.monitor.min_wu) << '\n'
      << "max_wu=" << format_double(s.monitor.max_wu) << '\n';
  write_report(out, s.report);
}

void write_report(std::ostream& out, const AssumptionReport& r) {
  out << "xi_norm=" << format_double(r.xi_norm) << '\n'
      << "b_xi=" << format_double(r.b_xi) << '\n'
      << "xtxi_norm=" << format_double(r.xtxi_norm) << '\n'
      << "gram_lambda_min=" << format_double(r.gram_lambda_min) << '\n'
      << "gram_lambda_max=" << format_double(r.gram_lambda_max) << '\n'
      << "rip_k=" << r.rip_k << '\n'
      << "rip_delta=" << (r.rip_delta ? format_double(*r.rip_delta) : "none") << '\n'
      << "rip_exact=" << bool_text(r.rip_exact) << '\n'
      << "ratio_xi_norm=" << format_double(r.ratios.xi_norm) << '\n'
      << "ratio_b_xi=" << format_double(r.ratios.b_xi) << '\n'
      << "ratio_xtxi_norm=" << format_double(r.ratios.xtxi_norm) << '\n'
      << "ratio_lambda_min=" << format_double(r.ratios.lambda_min) << '\n'
      << "ratio_lambda_max=" << format_double(r.ratios.lambda_max) << '\n'
      << "ratio_rip=" << (r.ratios.rip ? format_double(*r.ratios.rip) : "none") << '\n';
}

void write_report_csv(std::ostream& out, const AssumptionReport& r) {
  out << "xi_norm,b_xi,xtxi_norm,gram_lambda_min,gram_lambda_max,rip_k,rip_delta,rip_exact,ratio_xi_norm,"
         "ratio_b_xi,ratio_xtxi_norm,ratio_lambda_min,ratio_lambda_max,ratio_rip\n";
  out << format_double(r.xi_norm) << ',' << format_double(r.b_xi) << ',' << format_double(r.xtxi_norm) << ','
      << format_double(r.gram_lambda_min) << ',' << format_double(r.gram_lambda_max) << ',' << r.rip_k << ','
      << (r.rip_delta ? format_double(*r.rip_delta) : "") << ',' << bool_text(r.rip_exact) << ','
      << format_double(r.ratios.xi_norm) << ',' << format_double(r.ratios.b_xi) << ','
      << format_double(r.ratios.xtxi_norm) << ',' << format_double(r.ratios.lambda_min) << ','
      << format_double(r.ratios.lambda_max) << ',' << (r.ratios.rip ? format_double(*r.ratios.rip) : "") << '\n';
}

void ScalingExperimentConfig::validate() const {
  if (d_values.empty()) throw std::invalid_argument("d_values must be nonempty");
  if (!std::is_sorted(d_values.begin(), d_values.end()) ||
      std::adjacent_find(d_values.begin(), d_values.end()) != d_values.end()) {
    throw std::invalid_argument("d_values must be strictly ascending");
  }
  for (Index d : d_values) {
    if (d < s || auto_sample_size(d) < 2) throw std::invalid_argument("every d must allow s <= d and n >= 2");
  }
  if (seeds_per_d < 1) throw std::invalid_argument("seeds_per_d must be positive");
  if (methods.empty()) throw std::invalid_argument("methods must be nonempty");
  if (!(sigma > 0.0)) throw std::invalid_argument("scaling needs sigma > 0");
  if (!(stop_eps > 0.0)) throw std::invalid_argument("stop_eps must be positive");
  if (!(lambda_scale > 0.0)) throw std::invalid_argument("lambda scale must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be positive");
  full.validate();
  second_order.validate();
}

std::uint64_t scaling_instance_seed(std::uint64_t base_seed, Index d, int seed_index) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(seed_index)});
}

void write_result_row(std::ostream& out, const ResultRow& row) {
  out << to_string(row.method) << ',' << row.d << ',' << row.n << ',' << row.s << ',' << format_double(row.sigma)
      << ',' << row.seed << ',' << format_double(row.train_resid_norm) << ',' << format_double(row.test_loss_l2)
      << ',' << format_double(row.test_loss_sq) << ',' << row.meta << '\n';
}

ResultRow to_row(const BaselineResult& result, const RegressionInstance& inst, const std::string& extra_meta) {
  ResultRow row;
  row.method = result.method;
  row.d = inst.d;
  row.n = inst.n;
  row.s = inst.s;
  row.sigma = inst.sigma;
  row.seed = std::to_string(inst.seed);
  row.train_resid_norm = result.train_resid_norm;
  row.test_loss_l2 = result.test_loss_l2;
  row.test_loss_sq = result.test_loss_l2 * result.test_loss_l2;
  row.meta = result.meta_string();
  if (!extra_meta.empty()) row.meta = row.meta.empty() ? extra_meta : row.meta + ";" + extra_meta;
  return row;
}

BaselineResult full_model_fit(const RegressionInstance& inst, TrainConfig cfg) {
  cfg.track_decomposition = false;
  cfg.train_linear = true;
  cfg.record_every = cfg.max_iters;
  TrainResult run = train(inst, cfg);
  if (run.stop == StopReason::Diverged) {
    throw std::runtime_error("full model diverged at step " + std::to_string(run.final_state.step));
  }
  MetaFields meta{{"steps", std::to_string(run.final_state.step)},
                  {"stop", to_string(run.stop)},
                  {"eta", format_double(cfg.eta)},
                  {"alpha", format_double(cfg.alpha)},
                  {"lambda", format_double(run.final_state.lambda)}};
  return BaselineResult::make(inst, run.final_state.beta(), Method::Full, std::move(meta));
}

ScalingOutcome run_scaling(const ScalingExperimentConfig& cfg) {
  cfg.validate();
  check_output_dir(cfg.output_path);
  struct Cell {
    Index d;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (Index d : cfg.d_values) {
    for (int k = 0; k < cfg.seeds_per_d; ++k) cells.push_back({d, k});
  }
  const std::size_t num_methods = cfg.methods.size();
  // results[cell * num_methods + method]
  std::vector<ResultRow> results(cells.size() * num_methods);

  auto run_cell = [&](std::size_t c) {
    const Cell cell = cells[c];
    const Index n = auto_sample_size(cell.d);
    const std::uint64_t seed = scaling_instance_seed(cfg.base_seed, cell.d, cell.seed_index);
    const std::string tag = "seed_index=" + std::to_string(cell.seed_index) + ";n_rule=" + kAutoNRule;
    std::optional<RegressionInstance> inst;
    std::string instance_error;
    try {
      inst = generate_instance(n, cell.d, cfg.s, cfg.sigma,
                               cfg.s == 3 ? BetaSpec{ThreeSpike{}}
                                          : BetaSpec{ExplicitVector{Vector::Constant(cfg.s, 1.0)}},
                               seed);
    } catch (const std::exception& e) {
      instance_error = e.what();
    }
    for (std::size_t m = 0; m < num_methods; ++m) {
      ResultRow& row = results[c * num_methods + m];
      const Method method = cfg.methods[m];
      try {
        if (!inst) throw std::runtime_error(instance_error);
        BaselineResult res;
        switch (method) {
          case Method::Full: {
            TrainConfig tc = with_resolved_lambda(cfg.full, *inst, cfg.lambda_scale);
            tc.epsilon = cfg.stop_eps;
            res = full_model_fit(*inst, tc);
            break;
          }
          case Method::Hybrid:
            res = hybrid_interpolator(*inst, cfg.lasso_grid, OracleTestLoss{}, cfg.lasso);
            break;
          case Method::SecondOrderGD: {
            TrainConfig tc = cfg.second_order;
            tc.epsilon = cfg.stop_eps;
            res = second_order_gd(*inst, tc);
            break;
          }
          case Method::MinL2:
            res = min_l2_interpolator(*inst);
            break;
          case Method::Lasso: {
            LassoConfig lc = cfg.lasso;
            lc.l1_penalty = cfg.sigma * std::sqrt(std::log(double(cell.d)) / double(n));
            res = lasso_coordinate_descent(*inst, lc);
            break;
          }
        }
        row = to_row(res, *inst, tag);
      } catch (const std::exception& e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), ',', ' ');
        std::replace(what.begin(), what.end(), '\n', ' ');
        row = ResultRow{};
        row.method = method;
        row.d = cell.d;
        row.n = n;
        row.s = cfg.s;
        row.sigma = cfg.sigma;
        row.seed = std::to_string(seed);
        row.train_resid_norm = row.test_loss_l2 = row.test_loss_sq = std::nan("");
        row.meta = "error=" + what + ";" + tag;
        row.failed = true;
      }
    }
  };

  if (cfg.workers <= 1 || cells.size() <= 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    const unsigned count = std::min<unsigned>(cfg.workers, static_cast<unsigned>(cells.size()));
    for (unsigned w = 0; w < count; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells.size(); c = next++) run_cell(c);
      });
    }
  }

  ScalingOutcome out;
  for (Index d : cfg.d_values) {
    for (std::size_t m = 0; m < num_methods; ++m) {
      std::vector<double> losses;
      std::vector<double> squares;
      std::vector<double> resids;
      int failed = 0;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].d != d) continue;
        const ResultRow& row = results[c * num_methods + m];
        out.runs.push_back(row);
        if (row.failed) {
          ++failed;
          continue;
        }
        losses.push_back(row.test_loss_l2);
        squares.push_back(row.test_loss_sq);
        resids.push_back(row.train_resid_norm);
      }
      auto mean = [](const std::vector<double>& xs) {
        return xs.empty() ? std::nan("") : std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
      };
      const double mu = mean(losses);
      double var = 0.0;
      for (double x : losses) var += (x - mu) * (x - mu);
      const double sd = losses.size() > 1 ? std::sqrt(var / double(losses.size() - 1)) : 0.0;
      ResultRow agg;
      agg.method = cfg.methods[m];
      agg.d = d;
      agg.n = auto_sample_size(d);
      agg.s = cfg.s;
      agg.sigma = cfg.sigma;
      agg.seed = "agg";
      agg.train_resid_norm = mean(resids);
      agg.test_loss_l2 = mu;
      agg.test_loss_sq = mean(squares);
      agg.meta = "std_l2=" + format_double(sd) + ";median_l2=" + format_double(median(losses)) +
                 ";runs=" + std::to_string(losses.size()) + ";failed=" + std::to_string(failed) +
                 ";n_rule=" + kAutoNRule;
      out.aggregates.push_back(agg);
    }
  }

  if (!cfg.output_path.empty()) {
    std::ofstream file(cfg.output_path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open " + cfg.output_path.string() + " for writing");
    write_scaling_csv(file, out);
    if (!file) throw std::runtime_error("failed writing " + cfg.output_path.string());
  }
  return out;
}

void write_scaling_csv(std::ostream& out, const ScalingOutcome& outcome) {
  out << kResultHeader << '\n';
  for (const ResultRow& row : outcome.runs) write_result_row(out, row);
  for (const ResultRow& row : outcome.aggregates) write_result_row(out, row);
}

}  // namespace benign
