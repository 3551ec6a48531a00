#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "controller.hpp"
#include "env.hpp"
#include "mlp.hpp"
#include "policy.hpp"
#include "rollout.hpp"

namespace etmpc {

struct PpoConfig {
  double gamma = 0.99;
  double lam = 0.9;  // GAE bias-variance factor
  int z = 256;       // trajectory length collected by each actor
  int n_envs = 4;
  int noptepochs = 10;
  int nminibatches = 1;
  double lr = 3e-4;
  double clip = 0.25;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;
  int normalizer_warmup_steps = 10000;
};

enum class TrainMode { kJoint, kRecompute, kHorizon, kLqr };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode mode);

struct BufferEntry {
  Eigen::VectorXd features;
  Eigen::VectorXd features_next;
  int c = 0;
  int horizon_term = 0;
  int offset = 0;  // steps since the segment's computation, at decision time
  double u_sampled = 0.0;
  double mean_old = 0.0;
  double log_prob_old = 0.0;
  std::shared_ptr<const PlanSegment> segment;
  State x_at_decision = State::Zero();
  double ref_at_decision = 0.0;
  double reward = 0.0;
  RewardTerms reward_terms;
  bool terminal = false;     // constraint violation: bootstrap 0
  bool episode_end = false;  // terminal or truncated (bootstrap V(s'))
  int env_id = 0;
  int plant_steps = 1;  // frame-skip span
  // filled during the update phase
  double value = 0.0;
  double next_value = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

// Generalized advantage estimation over one contiguous stream:
// delta_t = r_t + gamma (1 - terminal_t) V(s'_t) - V(s_t),
// A_t = delta_t + gamma lam (1 - episode_end_t) A_{t+1}.
std::vector<double> gae_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<double>& next_values,
                                   const std::vector<bool>& terminal,
                                   const std::vector<bool>& episode_end, double gamma, double lam);

// Clipped surrogate objective for one sample: min(r A, clip(r, 1-e, 1+e) A).
// d_dlogp is the derivative w.r.t. the new log-probability (zero when the
// clipped branch is active).
struct Surrogate {
  double objective = 0.0;
  double d_dlogp = 0.0;
  bool clipped = false;
};
Surrogate ppo_surrogate(double ratio, double advantage, double clip);

struct PhaseMetrics {
  std::int64_t env_steps = 0;     // cumulative
  std::int64_t decisions = 0;     // cumulative recorded decisions
  double wall_clock = 0.0;        // cumulative seconds in the trainer
  double mean_episode_cost = 0.0; // completed episodes this phase
  int episodes_completed = 0;
  int violations = 0;
  double recompute_fraction = 0.0;  // computed steps / plant steps this phase
  double mean_horizon = 0.0;        // over computations this phase
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio_error = 0.0;  // |r - 1| on the first epoch, fresh-buffer sanity
  double sigma_m = 0.0, sigma_ml = 0.0, alpha = 0.0;
  int skipped_nonfinite = 0;
};

struct TrainSetup {
  PolicyConfig policy;
  PpoConfig ppo;
  ControllerConfig controller;
  RewardConfig reward;
  EpisodeConfig episode;
  PendulumParams plant = PendulumParams::plant_truth();
  TrainMode mode = TrainMode::kJoint;
  std::uint64_t seed = 0;
  std::vector<int> frame_skip_choices = {1, 2, 3, 4};  // drawn per episode
  int workers = 1;
};

class PpoTrainer {
 public:
  explicit PpoTrainer(const TrainSetup& setup);

  // One collect + update phase over n_envs * z decisions. When inspect is
  // given the collected buffer is copied out before the update consumes it.
  PhaseMetrics run_phase(std::vector<BufferEntry>* inspect = nullptr);

  MetaPolicy& policy() { return policy_; }
  const MetaPolicy& policy() const { return policy_; }
  Mlp& value_net() { return value_net_; }
  const Mlp& value_net() const { return value_net_; }
  std::int64_t env_steps() const { return env_steps_; }
  const TrainSetup& setup() const { return setup_; }

  // exact-resume state
  Eigen::VectorXd optimizer_m() const { return adam_m_; }
  Eigen::VectorXd optimizer_v() const { return adam_v_; }
  std::int64_t optimizer_t() const { return adam_t_; }
  void restore_optimizer(const Eigen::VectorXd& m, const Eigen::VectorXd& v, std::int64_t t);
  void set_env_steps(std::int64_t n) { env_steps_ = n; }

  // Complete per-environment state so a resumed run continues mid-episode.
  struct RunnerState {
    std::string rng;
    State env_x = State::Zero();
    std::vector<double> env_refs;
    int env_t = 0;
    double env_u_prev = 0.0;
    bool env_violated = false;
    AugmentedState s;
    bool episode_active = false;
    int frame_skip = 1;
    int last_compute = 0;
    EpisodeStats stats;
    std::shared_ptr<const PlanSegment> segment;  // null when no plan is live
  };
  RunnerState runner_state(int env_id) const;
  void restore_runner_state(int env_id, const RunnerState& state);

  // flat trainable-parameter plumbing (policy groups + value net)
  Eigen::VectorXd flatten_params() const;
  void scatter_params(const Eigen::VectorXd& p);
  int num_params() const { return static_cast<int>(mask_.size()); }

 private:
  struct EnvRunner {
    PendulumEnv env;
    ControlSession session;
    Rng rng;
    AugmentedState s;
    bool episode_active = false;
    int frame_skip = 1;
    int last_compute = 0;
    EpisodeStats stats;
    EnvRunner(const PendulumParams& plant, const EpisodeConfig& episode,
              const ControllerConfig& controller, std::uint64_t seed)
        : env(plant, episode), session(controller), rng(seed) {}
  };

  void collect(std::vector<BufferEntry>* buffer, PhaseMetrics* metrics);
  void collect_env(EnvRunner* runner, int env_id, std::vector<BufferEntry>* out,
                   std::vector<EpisodeStats>* completed);
  void update(std::vector<BufferEntry>* buffer, PhaseMetrics* metrics);
  Eigen::VectorXd build_mask() const;

  TrainSetup setup_;
  Rng init_rng_;
  MetaPolicy policy_;
  Mlp value_net_;
  std::vector<std::unique_ptr<EnvRunner>> runners_;
  Eigen::VectorXd mask_;
  Eigen::VectorXd adam_m_, adam_v_;
  std::int64_t adam_t_ = 0;
  std::int64_t env_steps_ = 0;
  std::int64_t decisions_ = 0;
  double wall_clock_ = 0.0;
};

}  // namespace etmpc
