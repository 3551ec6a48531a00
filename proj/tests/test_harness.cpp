#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "harness.hpp"

using namespace etmpc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("etmpc_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  static inline int counter = 0;
};

ExperimentConfig tiny_config() {
  auto c = ExperimentConfig::defaults();
  c.test_set_size = 2;
  c.eval_seeds = 2;
  c.sweep_horizons = {8, 20};
  c.sweep_schedules = {1, 5};
  c.ppo.z = 12;
  c.ppo.n_envs = 2;
  c.ppo.noptepochs = 2;
  c.eval_interval_phases = 1;
  c.checkpoint_interval_phases = 1;
  return c;
}

}  // namespace

TEST_CASE("config serialization round-trips losslessly") {
  auto c = ExperimentConfig::defaults();
  c.reward.lambda_c = 0.0125;
  c.ppo.lr = 2.5e-4;
  c.sweep_horizons = {3, 7, 31};
  const std::string text = c.serialize();
  const auto back = ExperimentConfig::from_string(text);
  CHECK(back.serialize() == text);
  CHECK(back.hash() == c.hash());
  CHECK(back.reward.lambda_c == 0.0125);
  CHECK(back.sweep_horizons == std::vector<int>{3, 7, 31});
}

TEST_CASE("config parser rejects unknown keys and malformed input") {
  CHECK_THROWS_AS(ExperimentConfig::from_string("[plant]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("[nosuchsection]\nm = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("m = 1\n"), ConfigError);          // no section
  CHECK_THROWS_AS(ExperimentConfig::from_string("[plant]\nm 1\n"), ConfigError);   // no '='
  CHECK_THROWS_AS(ExperimentConfig::from_string("[plant]\nm = abc\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_string("[reward]\nlambda_h = 10\n"), ConfigError);
  CHECK_NOTHROW(ExperimentConfig::from_string("# comment only\n"));
  // comments and blank lines are fine
  const auto c = ExperimentConfig::from_string("[plant]\nm = 0.15  # heavier\n\n; note\n");
  CHECK(c.plant.m == 0.15);
}

TEST_CASE("test set is deterministic and content-addressed") {
  const auto config = tiny_config();
  const auto a = TestSet::build(config);
  const auto b = TestSet::build(config);
  CHECK(a.hash == b.hash);
  REQUIRE(a.episodes.size() == 2);
  CHECK(a.episodes[0].x0 == b.episodes[0].x0);
  CHECK(a.episodes[0].refs == b.episodes[0].refs);
  CHECK(a.episodes[0].x0(0) == 0.0);
  CHECK(a.episodes[0].refs.size() == 3);  // 150 steps / 50 redraw period

  auto other = config;
  other.test_set_seed += 1;
  CHECK(TestSet::build(other).hash != a.hash);
}

TEST_CASE("checkpoint archive round-trips tensors and blobs") {
  TempDir dir;
  Checkpoint ck;
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4.5, -5, 6e-17;
  ck.put("some.matrix", m);
  ck.put_scalar("a.scalar", -0.25);
  ck.put_bytes("rng.blob", std::string("state \0 with nul", 16));
  const std::string path = dir.str() + "/ck.bin";
  ck.save(path);
  const auto back = Checkpoint::load(path);
  CHECK(back.get("some.matrix") == m);
  CHECK(back.get_scalar("a.scalar") == -0.25);
  CHECK(back.get_bytes("rng.blob") == std::string("state \0 with nul", 16));
  CHECK_THROWS(back.get("missing"));
}

TEST_CASE("sweep: mini grid is deterministic and ranks sensibly") {
  const auto config = tiny_config();
  const auto testset = TestSet::build(config);
  TempDir dir;
  const auto r1 = run_sweep(config, testset, 1, dir.str());
  const auto r2 = run_sweep(config, testset, 2, "");
  REQUIRE(r1.cells.size() == 4);
  for (std::size_t i = 0; i < r1.cells.size(); ++i) {
    CHECK(r1.cells[i].total_cost == r2.cells[i].total_cost);  // bitwise, any worker count
    CHECK(r1.cells[i].valid);
  }
  CHECK(r1.best_index == r2.best_index);
  // longer horizon beats the too-short one under every-step recomputation
  const auto cost_of = [&](int schedule, int horizon) {
    for (const auto& c : r1.cells)
      if (c.schedule == schedule && c.horizon == horizon) return c.total_cost;
    FAIL("cell missing");
    return 0.0;
  };
  CHECK(cost_of(1, 20) < cost_of(1, 8));
  CHECK(fs::exists(dir.path / "grid.csv"));
  CHECK(fs::exists(dir.path / "argmin.txt"));
  CHECK(fs::exists(dir.path / "solver_log.csv"));
  // results artifacts carry the hashes
  std::ifstream grid(dir.path / "grid.csv");
  std::string line1, line2, line3;
  std::getline(grid, line1);
  std::getline(grid, line2);
  std::getline(grid, line3);
  CHECK(line1.find("etmpc") != std::string::npos);
  CHECK(line2.find("config_hash") != std::string::npos);
  CHECK(line3.find("testset_hash") != std::string::npos);
}

TEST_CASE("training driver writes artifacts and checkpoints restore exactly") {
  auto config = tiny_config();
  TempDir dir;
  const auto result = run_training(config, TrainMode::kJoint, 11, /*max_steps=*/40, 1, dir.str());
  CHECK(result.env_steps >= 40);
  CHECK(fs::exists(result.best_checkpoint));
  CHECK(fs::exists(result.last_checkpoint));
  CHECK(fs::exists(dir.path / "metrics.csv"));
  CHECK(fs::exists(dir.path / "evals.csv"));

  // restored policy reproduces evaluation bit-for-bit
  const auto testset = TestSet::build(config);
  Rng dummy(0);
  MetaPolicy policy(config.policy, &dummy);
  restore_policy(Checkpoint::load(result.best_checkpoint), &policy, nullptr);
  const auto e1 = evaluate_policy(config, policy, testset, 1);
  const auto e2 = evaluate_policy(config, policy, testset, 2);
  CHECK(e1.mean_cost == e2.mean_cost);
  CHECK(e1.recompute_fraction == e2.recompute_fraction);
  CHECK(result.best_eval_cost == e1.mean_cost);
}

TEST_CASE("training resume from checkpoint matches an uninterrupted run") {
  auto config = tiny_config();
  const auto testset = TestSet::build(config);

  PpoTrainer straight(config.train_setup(TrainMode::kJoint, 5, 1));
  straight.run_phase();
  straight.run_phase();

  PpoTrainer part1(config.train_setup(TrainMode::kJoint, 5, 1));
  part1.run_phase();
  TempDir dir;
  const std::string path = dir.str() + "/resume.bin";
  make_checkpoint(part1, config.hash(), testset.hash).save(path);
  PpoTrainer part2(config.train_setup(TrainMode::kJoint, 5, 1));
  restore_trainer(Checkpoint::load(path), &part2);
  part2.run_phase();

  CHECK(part2.flatten_params() == straight.flatten_params());
  CHECK(part2.env_steps() == straight.env_steps());
}

TEST_CASE("ablation scenarios") {
  auto config = tiny_config();
  TempDir dir;
  const auto result = run_training(config, TrainMode::kJoint, 3, 30, 1, dir.str());
  const auto report = run_ablation(config, result.best_checkpoint, 2, dir.str());
  CHECK(report.base_cost != 0.0);
  CHECK(report.horizon_cap == 31);
  CHECK(report.fixed_period >= 1);
  CHECK(fs::exists(dir.path / "ablation.csv"));
  // untrained policy at ~90% recompute: the learned-average schedule is every step
  CHECK(report.fixed_period <= 2);
}

TEST_CASE("plot emission") {
  auto config = tiny_config();
  TempDir dir;
  const auto testset = TestSet::build(config);
  run_sweep(config, testset, 2, dir.str() + "/sweep");
  run_training(config, TrainMode::kJoint, 1, 30, 1, dir.str() + "/seed0");
  run_training(config, TrainMode::kJoint, 2, 30, 1, dir.str() + "/seed1");
  Rng dummy(0);
  MetaPolicy policy(config.policy, &dummy);
  restore_policy(Checkpoint::load(dir.str() + "/seed0/checkpoint_best.bin"), &policy, nullptr);
  write_eval_outputs(config, testset, evaluate_policy(config, policy, testset, 2),
                     dir.str() + "/eval");
  emit_plots(dir.str(), dir.str() + "/plots");

  CHECK(fs::exists(dir.path / "plots/training_curve.dat"));
  CHECK(fs::exists(dir.path / "plots/surface.dat"));
  CHECK(fs::exists(dir.path / "plots/horizon_hist.dat"));
  CHECK(fs::exists(dir.path / "plots/gap_hist.dat"));

  // surface has |schedules| x |horizons| data rows
  std::ifstream surface(dir.path / "plots/surface.dat");
  std::string line;
  int rows = 0;
  while (std::getline(surface, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 4);  // |schedules| x |horizons| data rows

  // training curve steps strictly increase, one column per run
  std::ifstream curve(dir.path / "plots/training_curve.dat");
  double last_step = -1;
  int curve_rows = 0;
  while (std::getline(curve, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    double step, mean, sd, r0, r1;
    REQUIRE(static_cast<bool>(is >> step >> mean >> sd >> r0 >> r1));
    CHECK(step > last_step);
    last_step = step;
    ++curve_rows;
  }
  CHECK(curve_rows >= 1);
}

TEST_CASE("trace csv schema") {
  auto config = tiny_config();
  const auto testset = TestSet::build(config);
  PendulumEnv env(config.plant, config.episode);
  ControlSession session(config.controller_config());
  const PendulumTaskCost mc(config.model);
  const auto w = lqr::init_weights(mc, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1), 0.0,
                                   kInputChangeWeight);
  std::vector<TraceRow> trace;
  run_baseline_episode(testset.episodes[0], 10, 2, w, &env, &session, config.reward, &trace);
  TempDir dir;
  write_trace_csv(dir.str() + "/trace.csv", trace, config, testset.hash);
  std::ifstream in(dir.path / "trace.csv");
  std::string line;
  int data_rows = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.rfind("step,psi,v,phi,omega,u,psi_r,cost,computed_flag,horizon", 0) == 0)
      header_seen = true;
    else if (!line.empty() && line[0] != '#')
      ++data_rows;
  }
  CHECK(header_seen);
  CHECK(data_rows == static_cast<int>(trace.size()));
}
