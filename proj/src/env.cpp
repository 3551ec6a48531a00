#include "env.hpp"

namespace etmpc {

EpisodeSpec draw_episode(Rng* rng, const EpisodeConfig& episode) {
  EpisodeSpec spec;
  spec.x0 = sample_initial(*rng);
  const int segments =
      (episode.max_steps + episode.reference_period - 1) / episode.reference_period;
  spec.refs.resize(segments);
  for (auto& r : spec.refs) r = sample_reference(*rng);
  spec.seed = rng->raw();
  return spec;
}

void PendulumEnv::reset(const EpisodeSpec& spec) {
  x_ = spec.x0;
  refs_ = spec.refs;
  u_prev_ = 0.0;
  t_ = 0;
  violated_ = false;
}

PendulumEnv::StepResult PendulumEnv::step(double u) {
  StepResult out;
  x_ = rk4_step(x_, u, plant_);
  ++t_;
  out.stage_cost = stage_cost(x_, u, u_prev_, ref_at(t_), plant_);
  u_prev_ = u;
  violated_ = position_violated(x_);
  out.violated = violated_;
  out.truncated = !violated_ && t_ >= episode_.max_steps;
  return out;
}

}  // namespace etmpc
