#include "rollout.hpp"

namespace etmpc {

namespace {

void account_violation(EpisodeStats* stats, const RewardConfig& reward, int t_decision,
                       int max_steps) {
  stats->violated = true;
  stats->cost_violation += -reward.lambda_h * (max_steps - t_decision);
}

void push_trace(std::vector<TraceRow>* trace, int step, const State& x, double u, double ref,
                double cost, int computed, int horizon, const ControlSession& session) {
  if (!trace) return;
  TraceRow row{step, x, u, ref, cost, computed, horizon};
  if (computed) {
    const auto& d = session.last_diagnostics();
    row.iterations = d.iterations;
    row.kkt_residual = d.kkt_residual;
    row.solve_time = d.solve_time;
  }
  trace->push_back(row);
}

}  // namespace

EpisodeStats run_baseline_episode(const EpisodeSpec& spec, int horizon, int period,
                                  const lqr::Weights& weights, PendulumEnv* env,
                                  ControlSession* session, const RewardConfig& reward,
                                  std::vector<TraceRow>* trace) {
  EpisodeStats stats;
  env->reset(spec);
  session->reset();
  int last_compute = 0;
  while (!env->done()) {
    const int t = env->t();
    const int offset = t - last_compute;
    int computed = 0;
    if (!session->has_plan() || offset >= period) {
      session->recompute(env->state(), env->reference(), horizon, weights, env->u_prev(),
                         session->has_plan() ? offset : 0);
      if (session->has_plan() && !stats.horizons.empty()) stats.gaps.push_back(offset);
      stats.horizons.push_back(horizon);
      stats.cost_computation += reward.lambda_c * horizon;
      ++stats.solves;
      last_compute = t;
      computed = 1;
    }
    const int j = t - last_compute;
    const double u = clamp_input(j == 0 ? session->mpc_input(0)
                                        : session->dual_mode_input(j, env->state(), env->reference()));
    const State x_before = env->state();
    const double ref_before = env->reference();
    const auto r = env->step(u);
    stats.cost_stage += r.stage_cost;
    if (r.violated) account_violation(&stats, reward, t, env->episode().max_steps);
    ++stats.steps;
    push_trace(trace, t, x_before, u, ref_before, r.stage_cost, computed, horizon, *session);
  }
  stats.solve_time = session->total_solve_time();
  return stats;
}

EpisodeStats run_policy_episode(const EpisodeSpec& spec, const MetaPolicy& policy,
                                PendulumEnv* env, ControlSession* session,
                                const RewardConfig& reward, Rng* rng, bool exploit, int frame_skip,
                                std::vector<TraceRow>* trace, const EpisodeOverrides& overrides) {
  EpisodeStats stats;
  env->reset(spec);
  session->reset();
  const int n_max = policy.config().n_max;

  // startup: one solve at the maximum horizon, execute its first input
  session->recompute(env->state(), env->reference(), n_max, policy.params().weights, 0.0, 0);
  stats.cost_computation += reward.lambda_c * n_max;
  ++stats.solves;
  stats.horizons.push_back(n_max);
  AugmentedState s;
  s.x_at_compute = env->state();
  s.ref_at_compute = env->reference();
  s.horizon_at_compute = n_max;
  {
    const double u0 = clamp_input(session->mpc_input(0));
    const State x_before = env->state();
    const double ref_before = env->reference();
    const auto r = env->step(u0);
    stats.cost_stage += r.stage_cost;
    if (r.violated) account_violation(&stats, reward, 0, env->episode().max_steps);
    ++stats.steps;
    push_trace(trace, 0, x_before, u0, ref_before, r.stage_cost, 1, n_max, *session);
  }
  s.x_now = env->state();
  s.ref_now = env->reference();
  s.steps_since = 1;
  int last_compute = 0;

  while (!env->done()) {
    ActOverrides act_ov;
    act_ov.horizon_cap = overrides.horizon_cap;
    if (overrides.forced_period > 0)
      act_ov.force_recompute = s.steps_since >= overrides.forced_period ? 1 : 0;
    const Action a = policy.act(s, session, env->u_prev(), rng, exploit, act_ov);
    if (a.recompute) {
      stats.gaps.push_back(env->t() - last_compute);
      last_compute = env->t();
      stats.horizons.push_back(a.horizon);
      stats.cost_computation += reward.lambda_c * a.horizon;
      ++stats.solves;
    }
    s = MetaPolicy::transition_bookkeeping(s, a);
    for (int sub = 0; sub < frame_skip && !env->done(); ++sub) {
      const int t_decision = env->t();
      const State x_before = env->state();
      const double ref_before = env->reference();
      const auto r = env->step(a.u_executed);
      stats.cost_stage += r.stage_cost;
      if (r.violated) account_violation(&stats, reward, t_decision, env->episode().max_steps);
      ++stats.steps;
      ++s.steps_since;
      push_trace(trace, t_decision, x_before, a.u_executed, ref_before, r.stage_cost,
                 sub == 0 ? a.recompute : 0, s.horizon_at_compute, *session);
    }
    s.x_now = env->state();
    s.ref_now = env->reference();
  }
  stats.solve_time = session->total_solve_time();
  return stats;
}

}  // namespace etmpc
