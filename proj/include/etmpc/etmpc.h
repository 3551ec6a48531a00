/*
 * etmpc - event-triggered MPC with learned meta-parameters.
 *
 * C interface to the experiment harness and the closed-loop controller.
 * All functions return ETMPC_OK (0) on success; on failure they return a
 * status code and leave a human-readable message readable through
 * etmpc_session_last_error().
 */
#ifndef ETMPC_ETMPC_H_
#define ETMPC_ETMPC_H_

#include <stdint.h>

#if defined(_WIN32)
#define ETMPC_API __declspec(dllexport)
#else
#define ETMPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum etmpc_status {
  ETMPC_OK = 0,
  ETMPC_ERR_CONFIG = 2,  /* bad configuration, unreadable files */
  ETMPC_ERR_SOLVER = 3,  /* OCP / Riccati solver failure */
  ETMPC_ERR_NUMERIC = 4, /* non-finite values, dimension mismatches */
  ETMPC_ERR_INVALID = 5  /* null handles, bad arguments */
} etmpc_status;

/* Opaque experiment session: one parsed configuration plus error state. */
typedef struct etmpc_session etmpc_session;
/* Opaque closed-loop controller instance. */
typedef struct etmpc_controller etmpc_controller;

ETMPC_API const char* etmpc_version(void);

/* config_path may be NULL to use built-in defaults. */
ETMPC_API etmpc_status etmpc_session_create(const char* config_path, etmpc_session** out_session);
ETMPC_API void etmpc_session_destroy(etmpc_session* session);
ETMPC_API const char* etmpc_session_last_error(const etmpc_session* session);
/* Serialize the session's configuration to a file. */
ETMPC_API etmpc_status etmpc_session_write_config(etmpc_session* session, const char* path);

/* Baseline grid over fixed horizons x fixed recomputation schedules. */
ETMPC_API etmpc_status etmpc_run_sweep(etmpc_session* session, const char* out_dir, int workers);
/* mode: "joint", "recompute", "horizon" or "lqr". steps <= 0 uses the
 * configured budget. */
ETMPC_API etmpc_status etmpc_run_train(etmpc_session* session, const char* mode, uint64_t seed,
                                       int64_t steps, int workers, const char* out_dir);
ETMPC_API etmpc_status etmpc_run_eval(etmpc_session* session, const char* checkpoint_path,
                                      int workers, const char* out_dir);
ETMPC_API etmpc_status etmpc_run_ablate(etmpc_session* session, const char* checkpoint_path,
                                        int workers, const char* out_dir);
ETMPC_API etmpc_status etmpc_emit_plots(etmpc_session* session, const char* metrics_dir,
                                        const char* out_dir);

/*
 * Closed-loop controller stepping. checkpoint_path may be NULL for the
 * untrained initialization. After reset, call step once per control period
 * with the measured state; the returned input is already clamped to the
 * actuator bounds. computed reports whether this step triggered an OCP
 * solve, horizon the prediction horizon in use.
 */
ETMPC_API etmpc_status etmpc_controller_create(etmpc_session* session,
                                               const char* checkpoint_path, uint64_t seed,
                                               etmpc_controller** out_controller);
ETMPC_API void etmpc_controller_destroy(etmpc_controller* controller);
ETMPC_API etmpc_status etmpc_controller_reset(etmpc_controller* controller, const double state[4],
                                              double psi_ref);
ETMPC_API etmpc_status etmpc_controller_step(etmpc_controller* controller, const double state[4],
                                             double psi_ref, double* u, int* computed,
                                             int* horizon);

#ifdef __cplusplus
}
#endif

#endif /* ETMPC_ETMPC_H_ */
