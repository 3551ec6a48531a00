#pragma once

#include <optional>
#include <vector>

#include "controller.hpp"
#include "env.hpp"
#include "policy.hpp"

namespace etmpc {

// Episode-level cost accounting in cost space (C = -R): stage costs, the
// violation term, and the computation penalty, each kept separately so
// reports can break the total down.
struct EpisodeStats {
  double cost_stage = 0.0;
  double cost_violation = 0.0;
  double cost_computation = 0.0;
  int steps = 0;
  int solves = 0;
  bool violated = false;
  double solve_time = 0.0;
  std::vector<int> horizons;  // horizon of every computation
  std::vector<int> gaps;      // steps between consecutive computations

  double total() const { return cost_stage + cost_violation + cost_computation; }
};

// Per-plant-step trace row for CSV export. Solver diagnostics are filled on
// rows where the OCP was computed.
struct TraceRow {
  int step = 0;
  State x = State::Zero();
  double u = 0.0;
  double psi_ref = 0.0;
  double cost = 0.0;
  int computed = 0;
  int horizon = 0;
  int iterations = 0;
  double kkt_residual = 0.0;
  double solve_time = 0.0;
};

// Deterministic dual-mode baseline: fixed horizon, recompute every `period`
// steps, LQR correction between computations and after plan exhaustion.
EpisodeStats run_baseline_episode(const EpisodeSpec& spec, int horizon, int period,
                                  const lqr::Weights& weights, PendulumEnv* env,
                                  ControlSession* session, const RewardConfig& reward,
                                  std::vector<TraceRow>* trace = nullptr);

// Ablation overrides for evaluation runs: cap the selected horizon and/or
// replace the recompute head by a fixed periodic schedule.
struct EpisodeOverrides {
  int horizon_cap = 0;
  int forced_period = 0;
};

// One episode under the meta policy. Exploit mode keeps only the recompute
// draw stochastic. The initial solve runs at n_max per the control loop's
// startup protocol; frame_skip holds each sampled input for d plant steps.
EpisodeStats run_policy_episode(const EpisodeSpec& spec, const MetaPolicy& policy,
                                PendulumEnv* env, ControlSession* session,
                                const RewardConfig& reward, Rng* rng, bool exploit, int frame_skip,
                                std::vector<TraceRow>* trace = nullptr,
                                const EpisodeOverrides& overrides = {});

}  // namespace etmpc
