#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "benign/baselines.hpp"
#include "benign/instance.hpp"
#include "benign/model.hpp"

namespace benign {

/// Defaults reproduce the training-dynamics figure at desk scale (d = 5000).
struct DynamicsExperimentConfig {
  Index d = 5000;
  std::optional<Index> n;  ///< Empty: round(3 sqrt(d)).
  Index s = 3;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  TrainConfig train;  ///< alpha = 1e-10, eta = 1e-6, epsilon = 1e-5, lambda = Auto
  double lambda_scale = 1.0;
  std::filesystem::path output_path;  ///< Trace CSV; "<output>.meta" gets the summary.

  Index resolved_n() const;
  void validate() const;
};

struct DynamicsSummary {
  Index n = 0;
  Index d = 0;
  Index s = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  StopReason stop = StopReason::MaxIters;
  std::int64_t total_steps = 0;
  std::optional<std::int64_t> stage1_end;
  double stage1_threshold = 0.0;
  double final_train_loss = 0.0;
  double final_test_loss_l2 = 0.0;
  double max_gamma_inf = 0.0;
  double max_zeta_inf = 0.0;
  /// First recorded t with second_order_norm > ||beta*|| / 2.
  std::optional<std::int64_t> second_order_half_step;
  /// First recorded t with v_norm > (final v_norm) / 2.
  std::optional<std::int64_t> v_half_step;
  StepMonitor monitor;
  AssumptionReport report;
};

struct DynamicsOutcome {
  DynamicsSummary summary;
  std::vector<TraceRecord> trace;
};

/// Generates the instance, trains the full model with decomposition
/// tracking and writes the trace CSV plus summary metadata (when an
/// output path is set).
DynamicsOutcome run_dynamics(const DynamicsExperimentConfig& cfg);

void write_summary(std::ostream& out, const DynamicsSummary& summary);

/// Defaults follow the dimension sweep at desk scale.
struct ScalingExperimentConfig {
  std::vector<Index> d_values{400, 1600, 6400, 25600};
  int seeds_per_d = 3;
  double sigma = 0.1;
  Index s = 3;
  std::uint64_t base_seed = 0;
  std::vector<Method> methods{Method::Full, Method::Hybrid, Method::SecondOrderGD};
  double stop_eps = 1e-4;
  TrainConfig full;          ///< alpha = 1e-10, eta = 1e-6, lambda = Auto
  double lambda_scale = 1.0;
  TrainConfig second_order = second_order_defaults();
  std::vector<double> lasso_grid = default_lasso_grid();
  LassoConfig lasso;
  unsigned workers = 1;
  std::filesystem::path output_path;

  void validate() const;
};

inline constexpr const char* kResultHeader = "method,d,n,s,sigma,seed,train_resid_norm,test_loss_l2,test_loss_sq,meta";

/// One line of the result CSV. Per-run rows carry the instance seed;
/// aggregate rows carry "agg" and mean values, with spread in meta.
struct ResultRow {
  Method method = Method::Full;
  Index d = 0;
  Index n = 0;
  Index s = 0;
  double sigma = 0.0;
  std::string seed;
  double train_resid_norm = 0.0;
  double test_loss_l2 = 0.0;
  double test_loss_sq = 0.0;
  std::string meta;
  bool failed = false;
};

void write_result_row(std::ostream& out, const ResultRow& row);
ResultRow to_row(const BaselineResult& result, const RegressionInstance& inst, const std::string& extra_meta = {});

struct ScalingOutcome {
  std::vector<ResultRow> runs;        ///< ordered by (d, method, seed index)
  std::vector<ResultRow> aggregates;  ///< one per (d, method)
};

/// Seed of replicate `seed_index` at dimension d.
std::uint64_t scaling_instance_seed(std::uint64_t base_seed, Index d, int seed_index);

/// Runs every (d, replicate) cell, optionally on `workers` threads, and
/// writes the CSV when an output path is set. Per-run failures become rows
/// with an "error=" meta field; the sweep continues.
ScalingOutcome run_scaling(const ScalingExperimentConfig& cfg);

void write_scaling_csv(std::ostream& out, const ScalingOutcome& outcome);

/// Full-model fit reported in the baseline row format.
BaselineResult full_model_fit(const RegressionInstance& inst, TrainConfig cfg);

/// Key=value dump of a regularity report.
void write_report(std::ostream& out, const AssumptionReport& report);
void write_report_csv(std::ostream& out, const AssumptionReport& report);

}  // namespace benign
