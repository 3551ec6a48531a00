// Command-line front end for the etmpc shared library. Talks to the core
// exclusively through the C API.
#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <string>

#include "etmpc/etmpc.h"

namespace {

struct SessionGuard {
  etmpc_session* session = nullptr;
  ~SessionGuard() { etmpc_session_destroy(session); }
};

int finish(const SessionGuard& guard, etmpc_status status, const char* what) {
  if (status == ETMPC_OK) return 0;
  std::fprintf(stderr, "etmpc %s failed (%d): %s\n", what, static_cast<int>(status),
               etmpc_session_last_error(guard.session));
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"etmpc - event-triggered MPC with learned meta-parameters"};
  app.set_version_flag("--version", etmpc_version());
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", mode = "joint", checkpoint, metrics_dir;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  int workers = 1;

  auto add_common = [&](CLI::App* cmd, bool with_checkpoint = false) {
    cmd->add_option("--config", config_path, "experiment config file (defaults when omitted)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--workers", workers, "worker threads");
    cmd->add_option("--seed", seed, "random seed");
    if (with_checkpoint) cmd->add_option("--checkpoint", checkpoint, "policy checkpoint file");
  };

  auto* sweep = app.add_subcommand("sweep", "baseline grid over horizons and schedules");
  add_common(sweep);
  auto* train = app.add_subcommand("train", "train the meta policy");
  add_common(train);
  train->add_option("--mode", mode, "joint | recompute | horizon | lqr");
  train->add_option("--steps", steps, "environment-step budget (0: config value)");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  add_common(eval, true);
  auto* ablate = app.add_subcommand("ablate", "ablation scenarios for a checkpoint");
  add_common(ablate, true);
  auto* plots = app.add_subcommand("plots", "emit gnuplot data from run outputs");
  add_common(plots);
  plots->add_option("--metrics", metrics_dir, "directory scanned for run outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ETMPC_ERR_CONFIG;
  }

  SessionGuard guard;
  const etmpc_status created =
      etmpc_session_create(config_path.empty() ? nullptr : config_path.c_str(), &guard.session);
  if (created != ETMPC_OK) {
    std::fprintf(stderr, "etmpc: cannot load config: %s\n",
                 guard.session ? etmpc_session_last_error(guard.session) : "unknown error");
    return static_cast<int>(created);
  }

  if (sweep->parsed())
    return finish(guard, etmpc_run_sweep(guard.session, out_dir.c_str(), workers), "sweep");
  if (train->parsed())
    return finish(guard,
                  etmpc_run_train(guard.session, mode.c_str(), seed, steps, workers, out_dir.c_str()),
                  "train");
  if (eval->parsed()) {
    if (checkpoint.empty()) {
      std::fprintf(stderr, "etmpc eval: --checkpoint is required\n");
      return ETMPC_ERR_CONFIG;
    }
    return finish(guard, etmpc_run_eval(guard.session, checkpoint.c_str(), workers, out_dir.c_str()),
                  "eval");
  }
  if (ablate->parsed()) {
    if (checkpoint.empty()) {
      std::fprintf(stderr, "etmpc ablate: --checkpoint is required\n");
      return ETMPC_ERR_CONFIG;
    }
    return finish(guard,
                  etmpc_run_ablate(guard.session, checkpoint.c_str(), workers, out_dir.c_str()),
                  "ablate");
  }
  if (plots->parsed())
    return finish(guard,
                  etmpc_emit_plots(guard.session,
                                   metrics_dir.empty() ? out_dir.c_str() : metrics_dir.c_str(),
                                   out_dir.c_str()),
                  "plots");
  return 0;
}
