// Command-line front end: dynamics, scaling, diagnose and baseline runs.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "benign/baselines.hpp"
#include "benign/csv.hpp"
#include "benign/harness.hpp"
#include "benign/instance.hpp"

namespace {

using namespace benign;

struct SharedFlags {
  Index d = 5000;
  std::optional<Index> n;
  Index s = 3;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<double> lambda;
  double lambda_scale = 1.0;
  std::optional<double> eps;
  std::optional<std::int64_t> max_iters;
  std::optional<std::int64_t> record_every;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--d", d, "Dimension");
    app.add_option("--n", n, "Sample size (default round(3*sqrt(d)))");
    app.add_option("--s", s, "Sparsity");
    app.add_option("--sigma", sigma, "Noise standard deviation");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--eta", eta, "Step size");
    app.add_option("--alpha", alpha, "Initialization scale");
    app.add_option("--lambda", lambda, "Second-order scale (default: automatic rule)");
    app.add_option("--lambda-scale", lambda_scale, "Multiplier applied to lambda");
    app.add_option("--eps", eps, "Stop once the training loss is at or below this value");
    app.add_option("--max-iters", max_iters, "Iteration cap");
    app.add_option("--record-every", record_every, "Trace recording cadence");
    app.add_option("--out", out, "Output path");
  }

  void apply(TrainConfig& cfg) const {
    if (eta) cfg.eta = *eta;
    if (alpha) cfg.alpha = *alpha;
    if (lambda) cfg.lambda = *lambda;
    if (eps) cfg.epsilon = *eps;
    if (max_iters) cfg.max_iters = *max_iters;
    if (record_every) cfg.record_every = *record_every;
  }

  Index resolved_n() const { return n ? *n : auto_sample_size(d); }

  RegressionInstance make_instance() const {
    const BetaSpec spec =
        s == 3 ? BetaSpec{ThreeSpike{}} : BetaSpec{ExplicitVector{Vector::Constant(s, 1.0 / std::sqrt(double(s)))}};
    return generate_instance(resolved_n(), d, s, sigma, spec, seed);
  }
};

struct SecondOrderFlags {
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<std::int64_t> max_iters;

  void attach(CLI::App& app) {
    app.add_option("--so-eta", eta, "Step size of the second-order-only model");
    app.add_option("--so-alpha", alpha, "Initialization scale of the second-order-only model");
    app.add_option("--so-max-iters", max_iters, "Iteration cap of the second-order-only model");
  }

  void apply(TrainConfig& cfg) const {
    if (eta) cfg.eta = *eta;
    if (alpha) cfg.alpha = *alpha;
    if (max_iters) cfg.max_iters = *max_iters;
  }
};

void check_parent_dir(const std::string& path) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw std::runtime_error("output directory " + parent.string() + " does not exist");
  }
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  check_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  fn(out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> methods;
  for (const std::string& name : names) methods.push_back(parse_method(name));
  return methods;
}

/// Splices "--config FILE" into the argument list: each key=value line
/// becomes "--key value" right after the subcommand unless the same flag is
/// given explicitly. Blank lines and lines starting with '#' are skipped.
std::vector<std::string> expand_config(int argc, char** argv, const std::vector<std::string>& subcommands) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot read " + path);

  auto trim = [](std::string text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string{};
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
  };
  auto given = [&](const std::string& flag) {
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> extra;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--config", "expected key=value, got '" + line + "'");
    const std::string flag = "--" + trim(line.substr(0, eq));
    if (given(flag)) continue;
    extra.push_back(flag);
    extra.push_back(trim(line.substr(eq + 1)));
  }
  auto sub = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
    return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
  });
  if (sub == args.end()) throw CLI::ValidationError("--config", "needs a subcommand");
  args.insert(sub + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-descent training of v + lambda(w^2 - u^2) for sparse regression, with baselines"};
  app.require_subcommand(1);
  app.footer("--config FILE (anywhere on the line) reads key=value lines as subcommand flags; explicit flags win.");

  SharedFlags shared;
  SecondOrderFlags so;

  CLI::App* dynamics = app.add_subcommand("dynamics", "Train the full model and write its trace CSV");
  shared.attach(*dynamics);

  CLI::App* scaling = app.add_subcommand("scaling", "Test loss versus dimension for several interpolators");
  shared.attach(*scaling);
  so.attach(*scaling);
  std::vector<Index> d_values{400, 1600, 6400, 25600};
  int seeds = 3;
  std::vector<std::string> method_names{"full", "hybrid", "second_order"};
  unsigned workers = 1;
  scaling->add_option("--d-values", d_values, "Ascending list of dimensions")->delimiter(',');
  scaling->add_option("--seeds", seeds, "Replicates per dimension");
  scaling->add_option("--methods", method_names, "Subset of full,hybrid,second_order,min_l2,lasso")->delimiter(',');
  scaling->add_option("--workers", workers, "Parallel cells");

  CLI::App* diagnose = app.add_subcommand("diagnose", "Print regularity diagnostics of an instance");
  shared.attach(*diagnose);
  Index rip_k = 0;
  std::string rip_mode = "montecarlo";
  std::int64_t rip_samples = 10000;
  std::string instance_path;
  std::string save_instance_path;
  diagnose->add_option("--rip-k", rip_k, "RIP order (0 skips RIP estimation)");
  diagnose->add_option("--rip-mode", rip_mode, "exhaustive or montecarlo")
      ->check(CLI::IsMember({"exhaustive", "montecarlo"}));
  diagnose->add_option("--rip-samples", rip_samples, "Random supports for montecarlo mode");
  diagnose->add_option("--instance", instance_path, "Load a SIL1 instance instead of generating one");
  diagnose->add_option("--save-instance", save_instance_path, "Write the instance as SIL1");
  diagnose->add_option("--workers", workers, "Threads for montecarlo RIP");

  CLI::App* baseline = app.add_subcommand("baseline", "Fit one interpolator and print its result row");
  shared.attach(*baseline);
  so.attach(*baseline);
  std::string method_name = "hybrid";
  double l1_penalty = 0.0;
  baseline->add_option("--method", method_name, "full, hybrid, second_order, min_l2 or lasso");
  baseline->add_option("--l1", l1_penalty, "Lasso penalty (default sigma*sqrt(ln d / n))");
  baseline->add_option("--instance", instance_path, "Load a SIL1 instance instead of generating one");

  try {
    std::vector<std::string> args = expand_config(argc, argv, {"dynamics", "scaling", "diagnose", "baseline"});
    std::vector<char*> raw;
    for (std::string& a : args) raw.push_back(a.data());
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*dynamics) {
      DynamicsExperimentConfig cfg;
      cfg.d = shared.d;
      cfg.n = shared.n;
      cfg.s = shared.s;
      cfg.sigma = shared.sigma;
      cfg.seed = shared.seed;
      shared.apply(cfg.train);
      cfg.lambda_scale = shared.lambda_scale;
      cfg.output_path = shared.out;
      const DynamicsOutcome outcome = run_dynamics(cfg);
      if (shared.out.empty()) write_trace_csv(std::cout, outcome.trace);
      else write_summary(std::cout, outcome.summary);
      return outcome.summary.stop == StopReason::Diverged ? 2 : 0;
    }
    if (*scaling) {
      ScalingExperimentConfig cfg;
      cfg.d_values = d_values;
      cfg.seeds_per_d = seeds;
      cfg.sigma = shared.sigma;
      cfg.s = shared.s;
      cfg.base_seed = shared.seed;
      cfg.methods = parse_methods(method_names);
      if (shared.eps) cfg.stop_eps = *shared.eps;
      shared.apply(cfg.full);
      cfg.lambda_scale = shared.lambda_scale;
      so.apply(cfg.second_order);
      cfg.workers = workers;
      cfg.output_path = shared.out;
      const ScalingOutcome outcome = run_scaling(cfg);
      if (shared.out.empty()) write_scaling_csv(std::cout, outcome);
      return 0;
    }
    if (*diagnose) {
      check_parent_dir(shared.out);
      check_parent_dir(save_instance_path);
      const RegressionInstance inst = instance_path.empty() ? shared.make_instance() : load_instance(instance_path);
      if (!save_instance_path.empty()) save_instance(inst, save_instance_path);
      std::optional<RipOptions> rip;
      if (rip_k > 0) {
        RipOptions opts;
        opts.mode = rip_mode == "exhaustive" ? RipMode::Exhaustive : RipMode::MonteCarlo;
        opts.num_supports = rip_samples;
        opts.workers = workers;
        rip = opts;
      }
      const AssumptionReport report = regularity_report(inst, rip_k > 0 ? rip_k : 1, rip);
      std::cout << "n=" << inst.n << "\nd=" << inst.d << "\ns=" << inst.s << "\nsigma=" << format_double(inst.sigma)
                << "\nseed=" << inst.seed << '\n';
      write_report(std::cout, report);
      if (!shared.out.empty()) with_output(shared.out, [&](std::ostream& os) { write_report_csv(os, report); });
      return 0;
    }
    if (*baseline) {
      check_parent_dir(shared.out);
      const RegressionInstance inst = instance_path.empty() ? shared.make_instance() : load_instance(instance_path);
      const Method method = parse_method(method_name);
      BaselineResult res;
      switch (method) {
        case Method::MinL2:
          res = min_l2_interpolator(inst);
          break;
        case Method::Lasso: {
          LassoConfig lc;
          lc.l1_penalty = l1_penalty > 0.0 ? l1_penalty
                                           : inst.sigma * std::sqrt(std::log(double(inst.d)) / double(inst.n));
          res = lasso_coordinate_descent(inst, lc);
          break;
        }
        case Method::Hybrid:
          res = hybrid_interpolator(inst, default_lasso_grid(), OracleTestLoss{});
          break;
        case Method::SecondOrderGD: {
          TrainConfig tc = second_order_defaults();
          so.apply(tc);
          if (shared.eps) tc.epsilon = *shared.eps;
          res = second_order_gd(inst, tc);
          break;
        }
        case Method::Full: {
          TrainConfig tc;
          shared.apply(tc);
          const double base = tc.lambda ? *tc.lambda : default_lambda(inst.n, inst.d, inst.sigma);
          tc.lambda = base * shared.lambda_scale;
          res = full_model_fit(inst, tc);
          break;
        }
      }
      with_output(shared.out, [&](std::ostream& os) {
        os << kResultHeader << '\n';
        write_result_row(os, to_row(res, inst));
      });
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
