#include "ppo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "errors.hpp"

namespace etmpc {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "joint") return TrainMode::kJoint;
  if (name == "recompute") return TrainMode::kRecompute;
  if (name == "horizon") return TrainMode::kHorizon;
  if (name == "lqr") return TrainMode::kLqr;
  throw ConfigError("unknown training mode: " + name);
}

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kJoint: return "joint";
    case TrainMode::kRecompute: return "recompute";
    case TrainMode::kHorizon: return "horizon";
    case TrainMode::kLqr: return "lqr";
  }
  return "?";
}

Surrogate ppo_surrogate(double ratio, double advantage, double clip) {
  Surrogate s;
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  s.objective = std::min(unclipped, clipped);
  s.clipped = unclipped > clipped;
  // d(r A)/d(logp_new) = r A; the min gates the gradient
  s.d_dlogp = s.clipped ? 0.0 : unclipped;
  return s;
}

std::vector<double> gae_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<double>& next_values,
                                   const std::vector<bool>& terminal,
                                   const std::vector<bool>& episode_end, double gamma, double lam) {
  const int n = static_cast<int>(rewards.size());
  std::vector<double> adv(n, 0.0);
  double carry = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double v_next = terminal[i] ? 0.0 : next_values[i];
    const double delta = rewards[i] + gamma * v_next - values[i];
    carry = delta + gamma * lam * (episode_end[i] ? 0.0 : carry);
    adv[i] = carry;
  }
  return adv;
}

PpoTrainer::PpoTrainer(const TrainSetup& setup)
    : setup_(setup),
      init_rng_(setup.seed),
      policy_(setup.policy, &init_rng_),
      value_net_({AugmentedState::kFeatureDim, setup.policy.value_hidden, setup.policy.value_hidden, 1}) {
  value_net_.init(&init_rng_, 1.0, 1.0);
  for (int e = 0; e < setup_.ppo.n_envs; ++e)
    runners_.push_back(std::make_unique<EnvRunner>(setup_.plant, setup_.episode, setup_.controller,
                                                   setup_.seed * 9576890767ULL + 1000003ULL * e + 17ULL));
  mask_ = build_mask();
  adam_m_ = Eigen::VectorXd::Zero(mask_.size());
  adam_v_ = Eigen::VectorXd::Zero(mask_.size());
}

Eigen::VectorXd PpoTrainer::flatten_params() const {
  const auto& p = policy_.params();
  const Eigen::VectorXd c = p.recompute_net.flatten();
  const Eigen::VectorXd h = p.horizon_net.flatten();
  const Eigen::VectorXd l = p.weights.params();
  const Eigen::VectorXd v = value_net_.flatten();
  Eigen::VectorXd out(c.size() + h.size() + 1 + l.size() + 2 + v.size());
  out << c, h, p.alpha, l, p.log_sigma_m, p.log_sigma_ml, v;
  return out;
}

void PpoTrainer::scatter_params(const Eigen::VectorXd& flat) {
  auto& p = policy_.params();
  int at = 0;
  const int nc = p.recompute_net.num_params();
  p.recompute_net.set_flat(flat.segment(at, nc));
  at += nc;
  const int nh = p.horizon_net.num_params();
  p.horizon_net.set_flat(flat.segment(at, nh));
  at += nh;
  p.alpha = flat(at++);
  const int nl = p.weights.num_params();
  p.weights.set_params(flat.segment(at, nl));
  at += nl;
  p.log_sigma_m = flat(at++);
  p.log_sigma_ml = flat(at++);
  value_net_.set_flat(flat.segment(at, value_net_.num_params()));
}

Eigen::VectorXd PpoTrainer::build_mask() const {
  const auto& p = policy_.params();
  const int nc = p.recompute_net.num_params();
  const int nh = p.horizon_net.num_params();
  const int nl = p.weights.num_params();
  const int nv = value_net_.num_params();
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(nc + nh + 1 + nl + 2 + nv);
  const bool joint = setup_.mode == TrainMode::kJoint;
  if (joint || setup_.mode == TrainMode::kRecompute) mask.segment(0, nc).setOnes();
  if (joint || setup_.mode == TrainMode::kHorizon) {
    mask.segment(nc, nh).setOnes();
    mask(nc + nh) = 1.0;  // alpha belongs to the horizon policy
  }
  if (joint || setup_.mode == TrainMode::kLqr) mask.segment(nc + nh + 1, nl).setOnes();
  if (joint) {
    mask(nc + nh + 1 + nl) = 1.0;
    mask(nc + nh + 1 + nl + 1) = 1.0;
  }
  mask.tail(nv).setOnes();  // the critic always trains
  return mask;
}

void PpoTrainer::restore_optimizer(const Eigen::VectorXd& m, const Eigen::VectorXd& v,
                                   std::int64_t t) {
  adam_m_ = m;
  adam_v_ = v;
  adam_t_ = t;
}

PpoTrainer::RunnerState PpoTrainer::runner_state(int env_id) const {
  const EnvRunner& r = *runners_[env_id];
  RunnerState st;
  st.rng = r.rng.serialize();
  st.env_x = r.env.state();
  st.env_refs = r.env.refs();
  st.env_t = r.env.t();
  st.env_u_prev = r.env.u_prev();
  st.env_violated = r.env.violated();
  st.s = r.s;
  st.episode_active = r.episode_active;
  st.frame_skip = r.frame_skip;
  st.last_compute = r.last_compute;
  st.stats = r.stats;
  if (r.session.has_plan()) st.segment = r.session.segment();
  return st;
}

void PpoTrainer::restore_runner_state(int env_id, const RunnerState& state) {
  EnvRunner& r = *runners_[env_id];
  r.rng.deserialize(state.rng);
  r.env.restore(state.env_x, state.env_refs, state.env_t, state.env_u_prev, state.env_violated);
  r.s = state.s;
  r.episode_active = state.episode_active;
  r.frame_skip = state.frame_skip;
  r.last_compute = state.last_compute;
  r.stats = state.stats;
  r.session.reset();
  if (state.segment) r.session.restore_plan(*state.segment, policy_.params().weights);
}

void PpoTrainer::collect_env(EnvRunner* runner, int env_id, std::vector<BufferEntry>* out,
                             std::vector<EpisodeStats>* completed) {
  const RewardConfig& rw = setup_.reward;
  const int n_max = setup_.policy.n_max;
  while (static_cast<int>(out->size()) < setup_.ppo.z) {
    if (!runner->episode_active) {
      const EpisodeSpec spec = draw_episode(&runner->rng, setup_.episode);
      runner->env.reset(spec);
      runner->session.reset();
      runner->stats = EpisodeStats{};
      runner->frame_skip = setup_.frame_skip_choices[static_cast<std::size_t>(
          runner->rng.raw() % setup_.frame_skip_choices.size())];
      runner->session.recompute(runner->env.state(), runner->env.reference(), n_max,
                                policy_.params().weights, 0.0, 0);
      runner->stats.cost_computation += rw.lambda_c * n_max;
      ++runner->stats.solves;
      runner->stats.horizons.push_back(n_max);
      runner->s = AugmentedState{};
      runner->s.x_at_compute = runner->env.state();
      runner->s.ref_at_compute = runner->env.reference();
      runner->s.horizon_at_compute = n_max;
      runner->last_compute = 0;
      const double u0 = clamp_input(runner->session.mpc_input(0));
      const auto r0 = runner->env.step(u0);
      runner->stats.cost_stage += r0.stage_cost;
      if (r0.violated) {
        runner->stats.violated = true;
        runner->stats.cost_violation += -rw.lambda_h * runner->env.episode().max_steps;
      }
      ++runner->stats.steps;
      runner->s.x_now = runner->env.state();
      runner->s.ref_now = runner->env.reference();
      runner->s.steps_since = 1;
      runner->episode_active = !runner->env.done();
      if (!runner->episode_active) completed->push_back(runner->stats);
      continue;
    }

    BufferEntry entry;
    entry.env_id = env_id;
    entry.features = runner->s.features();
    entry.offset = runner->s.steps_since;
    entry.x_at_decision = runner->s.x_now;
    entry.ref_at_decision = runner->s.ref_now;

    const Action a = policy_.act(runner->s, &runner->session, runner->env.u_prev(), &runner->rng,
                                 /*exploit=*/false);
    entry.c = a.recompute;
    entry.horizon_term = a.horizon;
    entry.u_sampled = a.u_sampled;
    entry.mean_old = a.mean;
    entry.log_prob_old = a.log_prob;
    entry.segment = runner->session.segment();
    if (a.recompute) {
      runner->stats.gaps.push_back(runner->env.t() - runner->last_compute);
      runner->last_compute = runner->env.t();
      runner->stats.horizons.push_back(a.horizon);
      runner->stats.cost_computation += rw.lambda_c * a.horizon;
      ++runner->stats.solves;
    }
    runner->s = MetaPolicy::transition_bookkeeping(runner->s, a);

    int spanned = 0;
    for (int sub = 0; sub < runner->frame_skip && !runner->env.done(); ++sub) {
      const int t_decision = runner->env.t();
      const auto r = runner->env.step(a.u_executed);
      const auto rt = step_reward(r.stage_cost, r.violated, t_decision,
                                  runner->env.episode().max_steps,
                                  sub == 0 && a.recompute, a.horizon, rw);
      entry.reward_terms.accumulate(rt);
      runner->stats.cost_stage += r.stage_cost;
      if (r.violated) {
        runner->stats.cost_violation += -rt.violation;
        runner->stats.violated = true;
        entry.terminal = true;
      }
      ++runner->stats.steps;
      ++runner->s.steps_since;
      ++spanned;
    }
    runner->s.x_now = runner->env.state();
    runner->s.ref_now = runner->env.reference();
    entry.plant_steps = spanned;
    entry.reward = entry.reward_terms.total();
    entry.features_next = runner->s.features();
    if (runner->env.done()) {
      entry.episode_end = true;
      runner->episode_active = false;
      completed->push_back(runner->stats);
    }
    out->push_back(std::move(entry));
  }
  // phase boundary: bootstrap the trailing partial episode
  if (!out->empty() && !out->back().episode_end) out->back().episode_end = true;
}

void PpoTrainer::collect(std::vector<BufferEntry>* buffer, PhaseMetrics* metrics) {
  const int n_envs = setup_.ppo.n_envs;
  std::vector<std::vector<BufferEntry>> per_env(n_envs);
  std::vector<std::vector<EpisodeStats>> per_env_completed(n_envs);

  const int workers = std::max(1, std::min(setup_.workers, n_envs));
  if (workers == 1) {
    for (int e = 0; e < n_envs; ++e)
      collect_env(runners_[e].get(), e, &per_env[e], &per_env_completed[e]);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int wk = 0; wk < workers; ++wk)
      pool.emplace_back([&] {
        for (int e = next.fetch_add(1); e < n_envs; e = next.fetch_add(1))
          collect_env(runners_[e].get(), e, &per_env[e], &per_env_completed[e]);
      });
    for (auto& th : pool) th.join();
  }

  std::int64_t plant_steps = 0, computed = 0, horizon_sum = 0, computations = 0;
  for (int e = 0; e < n_envs; ++e) {
    for (auto& entry : per_env[e]) {
      plant_steps += entry.plant_steps;
      if (entry.c) {
        ++computed;
        horizon_sum += entry.horizon_term;
        ++computations;
      }
      buffer->push_back(std::move(entry));
    }
    for (const auto& st : per_env_completed[e]) {
      metrics->mean_episode_cost += st.total();
      ++metrics->episodes_completed;
      if (st.violated) ++metrics->violations;
    }
  }
  if (metrics->episodes_completed > 0) metrics->mean_episode_cost /= metrics->episodes_completed;
  metrics->recompute_fraction =
      plant_steps > 0 ? static_cast<double>(computed) / static_cast<double>(plant_steps) : 0.0;
  metrics->mean_horizon =
      computations > 0 ? static_cast<double>(horizon_sum) / static_cast<double>(computations) : 0.0;
  env_steps_ += plant_steps;
  decisions_ += static_cast<std::int64_t>(buffer->size());
}

void PpoTrainer::update(std::vector<BufferEntry>* buffer, PhaseMetrics* metrics) {
  const int batch = static_cast<int>(buffer->size());
  const PpoConfig& cfg = setup_.ppo;

  // fresh values and advantages for this phase
  {
    std::vector<double> rewards, values, next_values;
    std::vector<bool> terminal, episode_end;
    for (auto& e : *buffer) {
      e.value = value_net_.forward(policy_.normalizer().normalize(e.features))(0);
      e.next_value = value_net_.forward(policy_.normalizer().normalize(e.features_next))(0);
      rewards.push_back(e.reward);
      values.push_back(e.value);
      next_values.push_back(e.next_value);
      terminal.push_back(e.terminal);
      episode_end.push_back(e.episode_end);
    }
    const auto adv = gae_advantages(rewards, values, next_values, terminal, episode_end, cfg.gamma, cfg.lam);
    for (int i = 0; i < batch; ++i) {
      (*buffer)[i].advantage = adv[i];
      (*buffer)[i].ret = adv[i] + (*buffer)[i].value;
    }
  }
  double adv_mean = 0.0, adv_sq = 0.0;
  for (const auto& e : *buffer) adv_mean += e.advantage;
  adv_mean /= batch;
  for (const auto& e : *buffer) adv_sq += (e.advantage - adv_mean) * (e.advantage - adv_mean);
  const double adv_std = std::sqrt(adv_sq / batch) + 1e-8;

  const bool need_lqr_sens =
      setup_.mode == TrainMode::kJoint || setup_.mode == TrainMode::kLqr;

  const int n_minibatches = std::max(1, cfg.nminibatches);
  for (int epoch = 0; epoch < cfg.noptepochs; ++epoch) {
    // gains under the current LQR weights, one bundle per segment
    std::map<const PlanSegment*, SegmentGains> gains;
    for (const auto& e : *buffer)
      if (!e.c && e.segment && !gains.count(e.segment.get()))
        gains.emplace(e.segment.get(),
                      compute_segment_gains(*e.segment, policy_.params().weights,
                                            runners_[0]->session.a_steady(),
                                            runners_[0]->session.b_steady(), need_lqr_sens));

    for (int mb = 0; mb < n_minibatches; ++mb) {
      const int lo = batch * mb / n_minibatches;
      const int hi = batch * (mb + 1) / n_minibatches;
      const int mb_size = hi - lo;
      if (mb_size == 0) continue;

      PolicyGradients pgrads = policy_.zero_gradients();
      auto vgrads = value_net_.zero_gradients();
      double policy_loss = 0.0, value_loss = 0.0, clip_count = 0.0, ratio_err = 0.0;
      for (int i = lo; i < hi; ++i) {
        const auto& e = (*buffer)[i];
        const double adv = (e.advantage - adv_mean) / adv_std;
        double mean_new = e.mean_old;
        Eigen::VectorXd dmean;
        const Eigen::VectorXd* dmean_ptr = nullptr;
        if (!e.c) {
          const auto& g = gains.at(e.segment.get());
          mean_new = dual_mode_mean(*e.segment, g, e.offset, e.x_at_decision, e.ref_at_decision,
                                    need_lqr_sens ? &dmean : nullptr);
          if (need_lqr_sens) dmean_ptr = &dmean;
        }
        const double lp_new = policy_.logprob(e.features, e.c, e.horizon_term, e.u_sampled, mean_new);
        const double ratio = std::exp(lp_new - e.log_prob_old);
        if (epoch == 0 && mb == 0) ratio_err = std::max(ratio_err, std::abs(ratio - 1.0));
        const auto sur = ppo_surrogate(ratio, adv, cfg.clip);
        policy_loss += -sur.objective;
        if (sur.clipped) clip_count += 1.0;
        if (sur.d_dlogp != 0.0)
          policy_.logprob_gradients(e.features, e.c, e.horizon_term, e.u_sampled, mean_new,
                                    dmean_ptr, -sur.d_dlogp / mb_size, &pgrads);
        // critic
        Mlp::Workspace ws;
        const double v = value_net_.forward(policy_.normalizer().normalize(e.features), &ws)(0);
        value_loss += (v - e.ret) * (v - e.ret);
        value_net_.backward(
            ws, Eigen::VectorXd::Constant(1, cfg.vf_coef * 2.0 * (v - e.ret) / mb_size), &vgrads);
      }
      policy_loss /= mb_size;
      value_loss /= mb_size;

      Eigen::VectorXd flat(mask_.size());
      flat << Mlp::flatten_gradients(pgrads.recompute_net),
          Mlp::flatten_gradients(pgrads.horizon_net), pgrads.alpha, pgrads.lqr,
          pgrads.log_sigma_m, pgrads.log_sigma_ml, Mlp::flatten_gradients(vgrads);
      flat = flat.cwiseProduct(mask_);
      if (!flat.allFinite()) {
        ++metrics->skipped_nonfinite;
        continue;
      }
      const double gnorm = flat.norm();
      if (gnorm > cfg.max_grad_norm) flat *= cfg.max_grad_norm / gnorm;

      ++adam_t_;
      Eigen::VectorXd params = flatten_params();
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-5;
      adam_m_ = b1 * adam_m_ + (1.0 - b1) * flat;
      adam_v_ = b2 * adam_v_ + (1.0 - b2) * flat.cwiseProduct(flat);
      const double corr1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
      const double corr2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
      params.array() -=
          cfg.lr * (adam_m_.array() / corr1) / ((adam_v_.array() / corr2).sqrt() + eps);
      scatter_params(params);
      policy_.clip_alpha();

      if (epoch == cfg.noptepochs - 1 && mb == n_minibatches - 1) {
        metrics->policy_loss = policy_loss;
        metrics->value_loss = value_loss;
        metrics->grad_norm = gnorm;
        metrics->clip_fraction = clip_count / mb_size;
      }
      if (epoch == 0 && mb == 0) metrics->mean_ratio_error = ratio_err;
    }
  }
  metrics->sigma_m = policy_.sigma_m();
  metrics->sigma_ml = policy_.sigma_ml();
  metrics->alpha = policy_.params().alpha;
}

PhaseMetrics PpoTrainer::run_phase(std::vector<BufferEntry>* inspect) {
  const auto t0 = std::chrono::steady_clock::now();
  PhaseMetrics metrics;
  std::vector<BufferEntry> buffer;
  buffer.reserve(static_cast<std::size_t>(setup_.ppo.z) * setup_.ppo.n_envs);
  collect(&buffer, &metrics);
  if (inspect) *inspect = buffer;
  update(&buffer, &metrics);
  // live plans re-derive their gains under the updated LQR weights, keeping
  // the executed control law consistent with the next phase's log-probs
  for (auto& runner : runners_) runner->session.refresh_gains(policy_.params().weights);
  // normalizer statistics advance only after the update has consumed the
  // buffer, so stored log-probs stay reproducible within the phase
  auto& norm = policy_.normalizer();
  if (!norm.frozen()) {
    for (const auto& entry : buffer) norm.observe(entry.features);
    if (env_steps_ >= setup_.ppo.normalizer_warmup_steps) norm.freeze();
  }
  wall_clock_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  metrics.env_steps = env_steps_;
  metrics.decisions = decisions_;
  metrics.wall_clock = wall_clock_;
  return metrics;
}

}  // namespace etmpc
