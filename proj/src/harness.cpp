#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "hash.hpp"

namespace etmpc {

namespace fs = std::filesystem;

namespace {

void run_indexed(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::ofstream open_results_file(const std::string& path, const ExperimentConfig& config,
                                std::uint64_t testset_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write results file: " + path);
  out << "# etmpc " << kVersion << "\n";
  out << "# config_hash " << hash_hex(config.hash()) << "\n";
  out << "# testset_hash " << hash_hex(testset_hash) << "\n";
  out << std::setprecision(17);
  return out;
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

TestSet TestSet::build(const ExperimentConfig& config) {
  TestSet ts;
  Rng rng(config.test_set_seed);
  ts.episodes.reserve(config.test_set_size);
  Fnv1a fnv;
  for (int i = 0; i < config.test_set_size; ++i) {
    ts.episodes.push_back(draw_episode(&rng, config.episode));
    const auto& e = ts.episodes.back();
    for (int j = 0; j < 4; ++j) fnv.add(e.x0(j));
    for (const double r : e.refs) fnv.add(r);
    fnv.add(e.seed);
  }
  ts.hash = fnv.value();
  return ts;
}

SweepResult run_sweep(const ExperimentConfig& config, const TestSet& testset, int workers,
                      const std::string& out_dir) {
  const auto& schedules = config.sweep_schedules;
  const auto& horizons = config.sweep_horizons;
  const int n_cells = static_cast<int>(schedules.size() * horizons.size());
  SweepResult result;
  result.cells.resize(n_cells);

  // initialization weights shared by every cell
  const PendulumTaskCost model_cost(config.model);
  const auto weights = lqr::init_weights(model_cost, Eigen::VectorXd::Zero(4),
                                         Eigen::VectorXd::Zero(1), 0.0, kInputChangeWeight);

  std::vector<std::vector<TraceRow>> first_cell_trace(1);
  run_indexed(n_cells, workers, [&](int idx) {
    SweepCell& cell = result.cells[idx];
    cell.schedule = schedules[idx / horizons.size()];
    cell.horizon = horizons[idx % horizons.size()];
    PendulumEnv env(config.plant, config.episode);
    ControlSession session(config.controller_config());
    for (const auto& spec : testset.episodes) {
      try {
        std::vector<TraceRow>* trace =
            (idx == 0 && &spec == &testset.episodes.front()) ? &first_cell_trace[0] : nullptr;
        const auto stats = run_baseline_episode(spec, cell.horizon, cell.schedule, weights, &env,
                                                &session, config.reward, trace);
        cell.total_cost += stats.total();
        cell.stage += stats.cost_stage;
        cell.violation += stats.cost_violation;
        cell.computation += stats.cost_computation;
        cell.steps += stats.steps;
        if (stats.violated) ++cell.violations;
      } catch (const SolverError&) {
        cell.valid = false;
      } catch (const NumericError&) {
        cell.valid = false;
      }
    }
    cell.solve_time = session.total_solve_time();
    cell.solves = session.total_solves();
  });

  for (int i = 0; i < n_cells; ++i) {
    if (!result.cells[i].valid) continue;
    if (result.best_index < 0 || result.cells[i].total_cost < result.cells[result.best_index].total_cost)
      result.best_index = i;
  }
  if (result.best_index < 0) throw SolverError("sweep: every grid cell failed");

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto grid = open_results_file(out_dir + "/grid.csv", config, testset.hash);
    grid << "schedule,horizon,total_cost,stage,violation,computation,violations,solve_time,solves,valid\n";
    for (const auto& c : result.cells)
      grid << c.schedule << ',' << c.horizon << ',' << c.total_cost << ',' << c.stage << ','
           << c.violation << ',' << c.computation << ',' << c.violations << ',' << c.solve_time
           << ',' << c.solves << ',' << (c.valid ? 1 : 0) << '\n';
    auto best = open_results_file(out_dir + "/argmin.txt", config, testset.hash);
    const auto& b = result.best();
    best << "schedule " << b.schedule << "\nhorizon " << b.horizon << "\ntotal_cost "
         << b.total_cost << "\n";
    write_trace_csv(out_dir + "/episode_trace.csv", first_cell_trace[0], config, testset.hash);
    write_solver_log_csv(out_dir + "/solver_log.csv", first_cell_trace[0], config, testset.hash);
  }
  return result;
}

EvalSummary evaluate_policy(const ExperimentConfig& config, const MetaPolicy& policy,
                            const TestSet& testset, int workers, const EvalOptions& options) {
  const int seeds = options.eval_seeds > 0 ? options.eval_seeds : config.eval_seeds;
  const int episodes = static_cast<int>(testset.episodes.size());
  const int jobs = seeds * episodes;
  std::vector<EpisodeStats> all(jobs);
  EpisodeOverrides ov;
  ov.horizon_cap = options.horizon_cap;
  ov.forced_period = options.forced_period;

  run_indexed(jobs, workers, [&](int idx) {
    const int seed_idx = idx / episodes;
    const int ep_idx = idx % episodes;
    PendulumEnv env(config.plant, config.episode);
    ControlSession session(config.controller_config());
    Rng rng(testset.episodes[ep_idx].seed + 0x9e3779b97f4a7c15ULL * (seed_idx + 1));
    all[idx] = run_policy_episode(testset.episodes[ep_idx], policy, &env, &session, config.reward,
                                  &rng, /*exploit=*/true, /*frame_skip=*/1, nullptr, ov);
  });

  EvalSummary summary;
  summary.per_seed_cost.assign(seeds, 0.0);
  std::int64_t plant_steps = 0, computed = 0, horizon_sum = 0;
  for (int idx = 0; idx < jobs; ++idx) {
    const auto& st = all[idx];
    summary.per_seed_cost[idx / episodes] += st.total();
    summary.stage += st.cost_stage;
    summary.violation += st.cost_violation;
    summary.computation += st.cost_computation;
    summary.solve_time += st.solve_time;
    if (st.violated) ++summary.violations;
    plant_steps += st.steps;
    computed += st.solves;
    for (const int h : st.horizons) {
      ++summary.horizon_hist[h];
      horizon_sum += h;
    }
    for (const int g : st.gaps) ++summary.gap_hist[g];
  }
  for (const double c : summary.per_seed_cost) summary.mean_cost += c;
  summary.mean_cost /= seeds;
  double var = 0.0;
  for (const double c : summary.per_seed_cost)
    var += (c - summary.mean_cost) * (c - summary.mean_cost);
  summary.std_cost = seeds > 1 ? std::sqrt(var / (seeds - 1)) : 0.0;
  summary.stage /= seeds;
  summary.violation /= seeds;
  summary.computation /= seeds;
  summary.recompute_fraction =
      plant_steps > 0 ? static_cast<double>(computed) / static_cast<double>(plant_steps) : 0.0;
  summary.mean_horizon = computed > 0 ? static_cast<double>(horizon_sum) / computed : 0.0;
  return summary;
}

void write_eval_outputs(const ExperimentConfig& config, const TestSet& testset,
                        const EvalSummary& s, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto out = open_results_file(out_dir + "/eval.csv", config, testset.hash);
  out << "seed,total_cost\n";
  for (std::size_t i = 0; i < s.per_seed_cost.size(); ++i) out << i << ',' << s.per_seed_cost[i] << '\n';
  out << "# mean_cost " << s.mean_cost << "\n# std_cost " << s.std_cost << "\n# stage " << s.stage
      << "\n# violation " << s.violation << "\n# computation " << s.computation
      << "\n# recompute_fraction " << s.recompute_fraction << "\n# mean_horizon " << s.mean_horizon
      << "\n# violations " << s.violations << "\n# solve_time " << s.solve_time << "\n";
  auto hh = open_results_file(out_dir + "/horizon_hist.csv", config, testset.hash);
  hh << "horizon,count\n";
  for (const auto& [h, c] : s.horizon_hist) hh << h << ',' << c << '\n';
  auto gh = open_results_file(out_dir + "/gap_hist.csv", config, testset.hash);
  gh << "gap,count\n";
  for (const auto& [g, c] : s.gap_hist) gh << g << ',' << c << '\n';
}

void write_eval_trace(const ExperimentConfig& config, const MetaPolicy& policy,
                      const TestSet& testset, const std::string& out_dir) {
  if (testset.episodes.empty()) return;
  fs::create_directories(out_dir);
  PendulumEnv env(config.plant, config.episode);
  ControlSession session(config.controller_config());
  Rng rng(testset.episodes[0].seed + 0x9e3779b97f4a7c15ULL);
  std::vector<TraceRow> trace;
  run_policy_episode(testset.episodes[0], policy, &env, &session, config.reward, &rng,
                     /*exploit=*/true, /*frame_skip=*/1, &trace);
  write_trace_csv(out_dir + "/episode_trace.csv", trace, config, testset.hash);
  write_solver_log_csv(out_dir + "/solver_log.csv", trace, config, testset.hash);
}

TrainResult run_training(const ExperimentConfig& config, TrainMode mode, std::uint64_t seed,
                         std::int64_t max_steps, int workers, const std::string& out_dir,
                         const std::optional<StopRule>& stop) {
  fs::create_directories(out_dir);
  const TestSet testset = TestSet::build(config);
  PpoTrainer trainer(config.train_setup(mode, seed, workers));

  auto metrics = open_results_file(out_dir + "/metrics.csv", config, testset.hash);
  metrics << "phase,env_steps,decisions,wall_clock,mean_episode_cost,episodes,violations,"
             "recompute_fraction,mean_horizon,policy_loss,value_loss,grad_norm,clip_fraction,"
             "ratio_error,sigma_m,sigma_ml,alpha,skipped_nonfinite\n";
  auto evals = open_results_file(out_dir + "/evals.csv", config, testset.hash);
  evals << "phase,env_steps,mean_cost,std_cost,stage,violation,computation,recompute_fraction,"
           "mean_horizon,violations\n";

  TrainResult result;
  result.best_eval_cost = std::numeric_limits<double>::infinity();
  const std::int64_t budget = max_steps > 0 ? max_steps : config.train_steps;
  int phase = 0;

  auto evaluate_and_record = [&](int at_phase) {
    const EvalSummary ev = evaluate_policy(config, trainer.policy(), testset, workers);
    evals << at_phase << ',' << trainer.env_steps() << ',' << ev.mean_cost << ',' << ev.std_cost
          << ',' << ev.stage << ',' << ev.violation << ',' << ev.computation << ','
          << ev.recompute_fraction << ',' << ev.mean_horizon << ',' << ev.violations << '\n';
    evals.flush();
    if (ev.mean_cost < result.best_eval_cost) {
      result.best_eval_cost = ev.mean_cost;
      result.best_eval = ev;
      result.best_checkpoint = out_dir + "/checkpoint_best.bin";
      make_checkpoint(trainer, config.hash(), testset.hash).save(result.best_checkpoint);
    }
    if (stop && ev.mean_cost <= stop->cost_target &&
        ev.recompute_fraction <= stop->max_recompute_fraction) {
      result.stop_rule_met = true;
      result.stop_eval = ev;
    }
    return ev;
  };

  int last_eval_phase = -1;
  while (trainer.env_steps() < budget) {
    const PhaseMetrics m = trainer.run_phase();
    ++phase;
    metrics << phase << ',' << m.env_steps << ',' << m.decisions << ',' << m.wall_clock << ','
            << m.mean_episode_cost << ',' << m.episodes_completed << ',' << m.violations << ','
            << m.recompute_fraction << ',' << m.mean_horizon << ',' << m.policy_loss << ','
            << m.value_loss << ',' << m.grad_norm << ',' << m.clip_fraction << ','
            << m.mean_ratio_error << ',' << m.sigma_m << ',' << m.sigma_ml << ',' << m.alpha << ','
            << m.skipped_nonfinite << '\n';
    metrics.flush();
    if (phase % config.eval_interval_phases == 0) {
      evaluate_and_record(phase);
      last_eval_phase = phase;
      if (result.stop_rule_met) break;
    }
    if (phase % config.checkpoint_interval_phases == 0)
      make_checkpoint(trainer, config.hash(), testset.hash).save(out_dir + "/checkpoint_last.bin");
  }
  if (last_eval_phase != phase) evaluate_and_record(phase);
  result.last_checkpoint = out_dir + "/checkpoint_last.bin";
  make_checkpoint(trainer, config.hash(), testset.hash).save(result.last_checkpoint);
  if (result.best_checkpoint.empty()) result.best_checkpoint = result.last_checkpoint;
  result.env_steps = trainer.env_steps();
  result.phases = phase;
  return result;
}

AblationReport run_ablation(const ExperimentConfig& config, const std::string& checkpoint_path,
                            int workers, const std::string& out_dir) {
  const TestSet testset = TestSet::build(config);
  const Checkpoint ck = Checkpoint::load(checkpoint_path);

  Rng dummy(0);
  MetaPolicy policy(config.policy, &dummy);
  restore_policy(ck, &policy, nullptr);

  AblationReport report;
  report.testset_hash = testset.hash;
  const EvalSummary base = evaluate_policy(config, policy, testset, workers);
  report.base_cost = base.mean_cost;

  // (1) reset the LQR weights to their initialization
  {
    MetaPolicy reset = policy;
    const PendulumTaskCost model_cost(config.model);
    reset.params().weights = lqr::init_weights(model_cost, Eigen::VectorXd::Zero(4),
                                               Eigen::VectorXd::Zero(1), 0.0, kInputChangeWeight);
    report.lqr_reset_cost = evaluate_policy(config, reset, testset, workers).mean_cost;
  }
  // (2) cap the horizon
  {
    EvalOptions opt;
    opt.horizon_cap = report.horizon_cap;
    report.horizon_cap_cost = evaluate_policy(config, policy, testset, workers, opt).mean_cost;
  }
  // (3) recompute on a fixed schedule at the learned average frequency
  {
    report.fixed_period =
        std::max(1, static_cast<int>(std::lround(1.0 / std::max(base.recompute_fraction, 1e-6))));
    EvalOptions opt;
    opt.forced_period = report.fixed_period;
    report.fixed_schedule_cost = evaluate_policy(config, policy, testset, workers, opt).mean_cost;
  }
  auto pct = [&](double v) { return 100.0 * (v - report.base_cost) / std::abs(report.base_cost); };
  report.lqr_reset_pct = pct(report.lqr_reset_cost);
  report.horizon_cap_pct = pct(report.horizon_cap_cost);
  report.fixed_schedule_pct = pct(report.fixed_schedule_cost);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto out = open_results_file(out_dir + "/ablation.csv", config, testset.hash);
    out << "scenario,cost,change_pct\n";
    out << "unmodified," << report.base_cost << ",0\n";
    out << "default_lqr," << report.lqr_reset_cost << ',' << report.lqr_reset_pct << '\n';
    out << "max_horizon_" << report.horizon_cap << ',' << report.horizon_cap_cost << ','
        << report.horizon_cap_pct << '\n';
    out << "fixed_schedule_" << report.fixed_period << ',' << report.fixed_schedule_cost << ','
        << report.fixed_schedule_pct << '\n';
  }
  return report;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     const ExperimentConfig& config, std::uint64_t testset_hash) {
  auto out = open_results_file(path, config, testset_hash);
  out << "step,psi,v,phi,omega,u,psi_r,cost,computed_flag,horizon\n";
  for (const auto& r : trace)
    out << r.step << ',' << r.x(0) << ',' << r.x(1) << ',' << r.x(2) << ',' << r.x(3) << ',' << r.u
        << ',' << r.psi_ref << ',' << r.cost << ',' << r.computed << ',' << r.horizon << '\n';
}

void write_solver_log_csv(const std::string& path, const std::vector<TraceRow>& trace,
                          const ExperimentConfig& config, std::uint64_t testset_hash) {
  auto out = open_results_file(path, config, testset_hash);
  out << "step,N,iterations,kkt_residual,solve_time\n";
  for (const auto& r : trace)
    if (r.computed)
      out << r.step << ',' << r.horizon << ',' << r.iterations << ',' << r.kkt_residual << ','
          << r.solve_time << '\n';
}

namespace {

// minimal CSV reader for the plot emitter: skips '#' lines, splits on commas
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void emit_plots(const std::string& metrics_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> eval_files, grid_files, hist_files, gap_files;
  for (const auto& entry : fs::recursive_directory_iterator(metrics_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "evals.csv") eval_files.push_back(entry.path());
    if (name == "grid.csv") grid_files.push_back(entry.path());
    if (name == "horizon_hist.csv") hist_files.push_back(entry.path());
    if (name == "gap_hist.csv") gap_files.push_back(entry.path());
  }
  std::sort(eval_files.begin(), eval_files.end());

  if (!eval_files.empty()) {
    // columns: env_steps, mean over runs, std, then one column per run
    std::vector<std::vector<std::pair<double, double>>> curves;  // (env_steps, mean_cost)
    for (const auto& f : eval_files) {
      std::vector<std::pair<double, double>> curve;
      for (const auto& row : read_csv(f)) {
        if (row.size() < 3 || row[0] == "phase") continue;
        curve.emplace_back(std::stod(row[1]), std::stod(row[2]));
      }
      if (!curve.empty()) curves.push_back(std::move(curve));
    }
    if (!curves.empty()) {
      std::ofstream out(out_dir + "/training_curve.dat");
      out << std::setprecision(17);
      out << "# env_steps mean_cost std_cost";
      for (std::size_t i = 0; i < curves.size(); ++i) out << " run" << i;
      out << "\n";
      std::size_t rows = curves[0].size();
      for (const auto& c : curves) rows = std::min(rows, c.size());
      for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (const auto& c : curves) mean += c[r].second;
        mean /= curves.size();
        double var = 0.0;
        for (const auto& c : curves) var += (c[r].second - mean) * (c[r].second - mean);
        const double sd = curves.size() > 1 ? std::sqrt(var / (curves.size() - 1)) : 0.0;
        out << curves[0][r].first << ' ' << mean << ' ' << sd;
        for (const auto& c : curves) out << ' ' << c[r].second;
        out << '\n';
      }
    }
  }

  if (!grid_files.empty()) {
    std::ofstream out(out_dir + "/surface.dat");
    out << std::setprecision(17);
    out << "# schedule horizon total_cost valid\n";
    std::string last_schedule;
    for (const auto& row : read_csv(grid_files.back())) {
      if (row.size() < 10 || row[0] == "schedule") continue;
      if (!last_schedule.empty() && row[0] != last_schedule) out << '\n';  // gnuplot grid blocks
      last_schedule = row[0];
      out << row[0] << ' ' << row[1] << ' ' << row[2] << ' ' << row[9] << '\n';
    }
  }

  auto emit_hist = [&](const std::vector<fs::path>& files, const std::string& name,
                       const std::string& header) {
    if (files.empty()) return;
    std::map<int, std::int64_t> merged;
    for (const auto& f : files)
      for (const auto& row : read_csv(f)) {
        if (row.size() < 2 || !std::isdigit(static_cast<unsigned char>(row[0][0]))) continue;
        merged[std::stoi(row[0])] += std::stoll(row[1]);
      }
    std::ofstream out(out_dir + "/" + name);
    out << "# " << header << "\n";
    for (const auto& [k, v] : merged) out << k << ' ' << v << '\n';
  };
  emit_hist(hist_files, "horizon_hist.dat", "horizon count");
  emit_hist(gap_files, "gap_hist.dat", "steps_between_computations count");
}

}  // namespace etmpc
