#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "rollout.hpp"

namespace etmpc {

// Pre-drawn evaluation episodes, content-addressed so every results file can
// assert which set it was computed on.
struct TestSet {
  std::vector<EpisodeSpec> episodes;
  std::uint64_t hash = 0;
  static TestSet build(const ExperimentConfig& config);
};

struct SweepCell {
  int schedule = 0;
  int horizon = 0;
  double total_cost = 0.0;  // summed over the test set
  double stage = 0.0, violation = 0.0, computation = 0.0;
  int violations = 0;
  double solve_time = 0.0;
  std::int64_t solves = 0;
  std::int64_t steps = 0;
  bool valid = true;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // schedule-major over config.sweep_schedules x sweep_horizons
  int best_index = -1;
  const SweepCell& best() const { return cells.at(best_index); }
};

// Full baseline grid over the test set. When out_dir is non-empty, writes
// grid.csv, argmin.txt and solver_log.csv there.
SweepResult run_sweep(const ExperimentConfig& config, const TestSet& testset, int workers,
                      const std::string& out_dir = "");

struct EvalOptions {
  int horizon_cap = 0;
  int forced_period = 0;
  int eval_seeds = 0;  // 0: use config.eval_seeds
};

struct EvalSummary {
  double mean_cost = 0.0;  // mean over eval seeds of the test-set total
  double std_cost = 0.0;
  double stage = 0.0, violation = 0.0, computation = 0.0;  // mean components
  double recompute_fraction = 0.0;
  double mean_horizon = 0.0;
  int violations = 0;
  double solve_time = 0.0;
  std::vector<double> per_seed_cost;
  std::map<int, std::int64_t> horizon_hist;
  std::map<int, std::int64_t> gap_hist;
};

// Exploitation-mode evaluation over the test set (stochastic recompute head
// only), averaged over eval seeds.
EvalSummary evaluate_policy(const ExperimentConfig& config, const MetaPolicy& policy,
                            const TestSet& testset, int workers, const EvalOptions& options = {});

void write_eval_outputs(const ExperimentConfig& config, const TestSet& testset,
                        const EvalSummary& summary, const std::string& out_dir);

// one exploitation-mode episode on the first test episode, exported as an
// episode trace plus the per-solve diagnostics log
void write_eval_trace(const ExperimentConfig& config, const MetaPolicy& policy,
                      const TestSet& testset, const std::string& out_dir);

struct StopRule {
  double cost_target = 0.0;
  double max_recompute_fraction = 1.0;
};

struct TrainResult {
  std::int64_t env_steps = 0;
  int phases = 0;
  double best_eval_cost = 0.0;
  EvalSummary best_eval;
  EvalSummary stop_eval;  // the evaluation that satisfied the stop rule
  std::string best_checkpoint;
  std::string last_checkpoint;
  bool stop_rule_met = false;
};

// Training driver: phase loop with periodic test-set evaluation, metrics and
// checkpoint files under out_dir. An optional stop rule ends the run early
// once the evaluated policy clears its thresholds.
TrainResult run_training(const ExperimentConfig& config, TrainMode mode, std::uint64_t seed,
                         std::int64_t max_steps, int workers, const std::string& out_dir,
                         const std::optional<StopRule>& stop = std::nullopt);

struct AblationReport {
  double base_cost = 0.0;
  double lqr_reset_cost = 0.0;
  double horizon_cap_cost = 0.0;
  double fixed_schedule_cost = 0.0;
  int horizon_cap = 31;
  int fixed_period = 1;
  double lqr_reset_pct = 0.0;
  double horizon_cap_pct = 0.0;
  double fixed_schedule_pct = 0.0;
  std::uint64_t testset_hash = 0;
};

// Table-style ablation: reset the LQR weights to their initialization, cap
// the horizon, and replace the recompute head with a periodic schedule at
// the learned average frequency.
AblationReport run_ablation(const ExperimentConfig& config, const std::string& checkpoint_path,
                            int workers, const std::string& out_dir);

// Gnuplot-ready whitespace-separated plot data from prior run outputs found
// under metrics_dir (recursively): training curves with seed bands, the
// baseline surface, and the evaluation histograms.
void emit_plots(const std::string& metrics_dir, const std::string& out_dir);

// one episode trace, exported as CSV rows
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     const ExperimentConfig& config, std::uint64_t testset_hash);
// per-solve diagnostics extracted from a trace
void write_solver_log_csv(const std::string& path, const std::vector<TraceRow>& trace,
                          const ExperimentConfig& config, std::uint64_t testset_hash);

}  // namespace etmpc
