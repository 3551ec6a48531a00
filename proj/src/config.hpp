#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "controller.hpp"
#include "env.hpp"
#include "pendulum.hpp"
#include "policy.hpp"
#include "ppo.hpp"

namespace etmpc {

// Whole-experiment configuration, serialized as sectioned key = value text.
// Parsing is strict: unknown sections or keys are rejected.
struct ExperimentConfig {
  PendulumParams plant = PendulumParams::plant_truth();
  PendulumParams model = PendulumParams::mpc_model();
  EpisodeConfig episode;
  ocp::Settings ocp;
  double rho = 1.0;
  double u_min = -kInputLimit, u_max = kInputLimit;
  double psi_min = -kPositionLimit, psi_max = kPositionLimit;
  int n_min = 1, n_max = 40;
  RewardConfig reward;
  PolicyConfig policy;
  PpoConfig ppo;

  // experiment section
  int test_set_size = 25;
  std::uint64_t test_set_seed = 9000;
  int model_seeds = 5;
  int eval_seeds = 5;
  std::vector<int> sweep_horizons = {4, 8, 12, 16, 20, 24, 28, 31, 36, 40};
  std::vector<int> sweep_schedules = {1, 2, 3, 4, 5, 8, 10, 15, 20};
  std::int64_t train_steps = 300000;
  int eval_interval_phases = 5;
  int checkpoint_interval_phases = 20;
  std::vector<int> frame_skip = {1, 2, 3, 4};
  int frame_skip_horizon_mode = 10;

  static ExperimentConfig defaults() { return {}; }
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_string(const std::string& text);
  std::string serialize() const;
  void save(const std::string& path) const;
  std::uint64_t hash() const;

  ControllerConfig controller_config() const;
  TrainSetup train_setup(TrainMode mode, std::uint64_t seed, int workers) const;
  void validate() const;
};

}  // namespace etmpc
