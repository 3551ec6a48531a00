#include "etmpc/etmpc.h"

#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "hash.hpp"
#include "policy.hpp"

struct etmpc_session {
  etmpc::ExperimentConfig config;
  std::string last_error;
};

struct etmpc_controller {
  etmpc::ExperimentConfig config;
  etmpc::MetaPolicy policy;
  etmpc::ControlSession session;
  etmpc::Rng rng;
  etmpc::AugmentedState state;
  double u_prev = 0.0;
  bool pending_first = false;
  std::string last_error;

  etmpc_controller(const etmpc::ExperimentConfig& cfg, std::uint64_t seed, etmpc::Rng* init_rng)
      : config(cfg), policy(cfg.policy, init_rng), session(cfg.controller_config()), rng(seed) {}
};

namespace {

template <typename Fn>
etmpc_status guarded(std::string* error_sink, Fn&& fn) {
  try {
    fn();
    if (error_sink) error_sink->clear();
    return ETMPC_OK;
  } catch (const etmpc::ConfigError& e) {
    if (error_sink) *error_sink = e.what();
    return ETMPC_ERR_CONFIG;
  } catch (const etmpc::SolverError& e) {
    if (error_sink) *error_sink = e.what();
    return ETMPC_ERR_SOLVER;
  } catch (const etmpc::NumericError& e) {
    if (error_sink) *error_sink = e.what();
    return ETMPC_ERR_NUMERIC;
  } catch (const std::exception& e) {
    if (error_sink) *error_sink = e.what();
    return ETMPC_ERR_NUMERIC;
  }
}

}  // namespace

extern "C" {

const char* etmpc_version(void) { return etmpc::kVersion; }

etmpc_status etmpc_session_create(const char* config_path, etmpc_session** out_session) {
  if (!out_session) return ETMPC_ERR_INVALID;
  *out_session = nullptr;
  auto session = new etmpc_session();
  const auto status = guarded(&session->last_error, [&] {
    session->config = config_path ? etmpc::ExperimentConfig::from_file(config_path)
                                  : etmpc::ExperimentConfig::defaults();
  });
  if (status != ETMPC_OK) {
    delete session;
    return status;
  }
  *out_session = session;
  return ETMPC_OK;
}

void etmpc_session_destroy(etmpc_session* session) { delete session; }

const char* etmpc_session_last_error(const etmpc_session* session) {
  return session ? session->last_error.c_str() : "null session";
}

etmpc_status etmpc_session_write_config(etmpc_session* session, const char* path) {
  if (!session || !path) return ETMPC_ERR_INVALID;
  return guarded(&session->last_error, [&] { session->config.save(path); });
}

etmpc_status etmpc_run_sweep(etmpc_session* session, const char* out_dir, int workers) {
  if (!session || !out_dir) return ETMPC_ERR_INVALID;
  return guarded(&session->last_error, [&] {
    const auto testset = etmpc::TestSet::build(session->config);
    etmpc::run_sweep(session->config, testset, workers, out_dir);
  });
}

etmpc_status etmpc_run_train(etmpc_session* session, const char* mode, uint64_t seed,
                             int64_t steps, int workers, const char* out_dir) {
  if (!session || !mode || !out_dir) return ETMPC_ERR_INVALID;
  return guarded(&session->last_error, [&] {
    etmpc::run_training(session->config, etmpc::parse_train_mode(mode), seed, steps, workers,
                        out_dir);
  });
}

etmpc_status etmpc_run_eval(etmpc_session* session, const char* checkpoint_path, int workers,
                            const char* out_dir) {
  if (!session || !checkpoint_path || !out_dir) return ETMPC_ERR_INVALID;
  return guarded(&session->last_error, [&] {
    const auto testset = etmpc::TestSet::build(session->config);
    const auto ck = etmpc::Checkpoint::load(checkpoint_path);
    etmpc::Rng dummy(0);
    etmpc::MetaPolicy policy(session->config.policy, &dummy);
    etmpc::restore_policy(ck, &policy, nullptr);
    const auto summary = etmpc::evaluate_policy(session->config, policy, testset, workers);
    etmpc::write_eval_outputs(session->config, testset, summary, out_dir);
    etmpc::write_eval_trace(session->config, policy, testset, out_dir);
  });
}

etmpc_status etmpc_run_ablate(etmpc_session* session, const char* checkpoint_path, int workers,
                              const char* out_dir) {
  if (!session || !checkpoint_path || !out_dir) return ETMPC_ERR_INVALID;
  return guarded(&session->last_error, [&] {
    etmpc::run_ablation(session->config, checkpoint_path, workers, out_dir);
  });
}

etmpc_status etmpc_emit_plots(etmpc_session* session, const char* metrics_dir,
                              const char* out_dir) {
  if (!session || !metrics_dir || !out_dir) return ETMPC_ERR_INVALID;
  return guarded(&session->last_error, [&] { etmpc::emit_plots(metrics_dir, out_dir); });
}

etmpc_status etmpc_controller_create(etmpc_session* session, const char* checkpoint_path,
                                     uint64_t seed, etmpc_controller** out_controller) {
  if (!session || !out_controller) return ETMPC_ERR_INVALID;
  *out_controller = nullptr;
  etmpc_controller* controller = nullptr;
  const auto status = guarded(&session->last_error, [&] {
    etmpc::Rng init_rng(seed);
    controller = new etmpc_controller(session->config, seed ^ 0x5bf0f3e4c1d2a987ULL, &init_rng);
    if (checkpoint_path) {
      const auto ck = etmpc::Checkpoint::load(checkpoint_path);
      etmpc::restore_policy(ck, &controller->policy, nullptr);
    }
  });
  if (status != ETMPC_OK) {
    delete controller;
    return status;
  }
  *out_controller = controller;
  return ETMPC_OK;
}

void etmpc_controller_destroy(etmpc_controller* controller) { delete controller; }

etmpc_status etmpc_controller_reset(etmpc_controller* controller, const double state[4],
                                    double psi_ref) {
  if (!controller || !state) return ETMPC_ERR_INVALID;
  return guarded(&controller->last_error, [&] {
    const etmpc::State x(state[0], state[1], state[2], state[3]);
    controller->session.reset();
    controller->session.recompute(x, psi_ref, controller->config.n_max,
                                  controller->policy.params().weights, 0.0, 0);
    controller->state = etmpc::AugmentedState{};
    controller->state.x_at_compute = x;
    controller->state.ref_at_compute = psi_ref;
    controller->state.horizon_at_compute = controller->config.n_max;
    controller->state.x_now = x;
    controller->state.ref_now = psi_ref;
    controller->state.steps_since = 0;
    controller->u_prev = 0.0;
    controller->pending_first = true;
  });
}

etmpc_status etmpc_controller_step(etmpc_controller* controller, const double state[4],
                                   double psi_ref, double* u, int* computed, int* horizon) {
  if (!controller || !state || !u) return ETMPC_ERR_INVALID;
  if (!controller->session.has_plan()) {
    controller->last_error = "controller not reset";
    return ETMPC_ERR_INVALID;
  }
  return guarded(&controller->last_error, [&] {
    controller->state.x_now = etmpc::State(state[0], state[1], state[2], state[3]);
    controller->state.ref_now = psi_ref;
    double input = 0.0;
    int did_compute = 0;
    if (controller->pending_first) {
      input = etmpc::clamp_input(controller->session.mpc_input(0));
      did_compute = 1;  // the reset solve backs this input
      controller->pending_first = false;
    } else {
      const auto action = controller->policy.act(controller->state, &controller->session,
                                                 controller->u_prev, &controller->rng,
                                                 /*exploit=*/true);
      controller->state = etmpc::MetaPolicy::transition_bookkeeping(controller->state, action);
      input = action.u_executed;
      did_compute = action.recompute;
    }
    ++controller->state.steps_since;
    controller->u_prev = input;
    *u = input;
    if (computed) *computed = did_compute;
    if (horizon) *horizon = controller->state.horizon_at_compute;
  });
}

}  // extern "C"
