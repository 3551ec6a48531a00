#pragma once

#include <vector>

#include "pendulum.hpp"
#include "rng.hpp"

namespace etmpc {

struct RewardConfig {
  double lambda_h = -10.0;  // constraint-violation weight (negative)
  double lambda_c = 1e-2;   // computation weight; enters the reward as a penalty
};

struct RewardTerms {
  double stage = 0.0;        // -stage_cost of the arrival state
  double violation = 0.0;    // lambda_h (T - t) on violating transitions
  double computation = 0.0;  // -lambda_c N when the OCP was computed
  double total() const { return stage + violation + computation; }
  void accumulate(const RewardTerms& o) {
    stage += o.stage;
    violation += o.violation;
    computation += o.computation;
  }
};

// Reward of one plant transition decided at step t_decision:
// R = -stage_cost + lambda_h (T - t) 1{violated} - lambda_c N 1{computed}.
inline RewardTerms step_reward(double stage_cost_value, bool violated, int t_decision,
                               int max_steps, bool computed, int horizon,
                               const RewardConfig& reward) {
  RewardTerms t;
  t.stage = -stage_cost_value;
  if (violated) t.violation = reward.lambda_h * (max_steps - t_decision);
  if (computed) t.computation = -reward.lambda_c * horizon;
  return t;
}

// A fully pre-drawn episode: initial state plus one reference per redraw
// segment. Test-set episodes are immutable instances of this.
struct EpisodeSpec {
  State x0 = State::Zero();
  std::vector<double> refs;  // ceil(T / period) entries
  std::uint64_t seed = 0;    // decision-noise stream for this episode
};

EpisodeSpec draw_episode(Rng* rng, const EpisodeConfig& episode);

// Ground-truth plant with the episode protocol: reference redraw schedule,
// position-constraint termination, per-step stage-cost accounting.
class PendulumEnv {
 public:
  PendulumEnv(const PendulumParams& plant, const EpisodeConfig& episode)
      : plant_(plant), episode_(episode) {}

  void reset(const EpisodeSpec& spec);

  const State& state() const { return x_; }
  double reference() const { return ref_at(t_); }
  int t() const { return t_; }
  bool done() const { return violated_ || t_ >= episode_.max_steps; }
  bool violated() const { return violated_; }
  int steps_remaining() const { return episode_.max_steps - t_; }
  double u_prev() const { return u_prev_; }
  const EpisodeConfig& episode() const { return episode_; }
  const PendulumParams& plant() const { return plant_; }

  struct StepResult {
    double stage_cost = 0.0;  // of the arrival state under the arrival-time reference
    bool violated = false;
    bool truncated = false;  // reached max_steps without violation
  };
  StepResult step(double u);

  // checkpoint support
  const std::vector<double>& refs() const { return refs_; }
  void restore(const State& x, std::vector<double> refs, int t, double u_prev, bool violated) {
    x_ = x;
    refs_ = std::move(refs);
    t_ = t;
    u_prev_ = u_prev;
    violated_ = violated;
  }

 private:
  double ref_at(int t) const {
    if (refs_.empty()) return 0.0;
    const std::size_t idx = std::min<std::size_t>(t / episode_.reference_period, refs_.size() - 1);
    return refs_[idx];
  }

  PendulumParams plant_;
  EpisodeConfig episode_;
  State x_ = State::Zero();
  std::vector<double> refs_;
  double u_prev_ = 0.0;
  int t_ = 0;
  bool violated_ = false;
};

}  // namespace etmpc
