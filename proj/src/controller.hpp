#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ocp_solver.hpp"
#include "pendulum.hpp"
#include "riccati.hpp"

namespace etmpc {

struct ControllerConfig {
  PendulumParams model_params = PendulumParams::mpc_model();
  ocp::Settings ocp_settings;
  double rho = 1.0;
  int n_min = 1;
  int n_max = 40;
  double u_min = -kInputLimit, u_max = kInputLimit;
  double psi_min = -kPositionLimit, psi_max = kPositionLimit;
  double input_change_weight = kInputChangeWeight;
};

// Immutable record of one MPC computation; rollout buffers keep shared
// references so gains can be re-derived under updated LQR weights.
struct PlanSegment {
  Eigen::MatrixXd u_plan;   // 1 x N
  Eigen::MatrixXd x_pred;   // 4 x (N+1)
  std::vector<Eigen::MatrixXd> a_seq, b_seq;
  double ref = 0.0;
  int horizon = 0;
};

// Gains (and optionally their LQR-weight sensitivities) for one segment.
struct SegmentGains {
  std::vector<Eigen::MatrixXd> k_seq;
  Eigen::MatrixXd k_inf;
  Eigen::MatrixXd s_inf;
  // per weight parameter: dK_k for every k, and dK_inf
  std::vector<std::vector<Eigen::MatrixXd>> dk_seq;
  std::vector<Eigen::MatrixXd> dk_inf;
};

// Backward pass over the segment's linearizations, terminal condition from
// the steady-state DARE; sensitivities chain the IFT terminal gradient
// through the time-varying recursion.
SegmentGains compute_segment_gains(const PlanSegment& segment, const lqr::Weights& weights,
                                   const Eigen::MatrixXd& a_steady, const Eigen::MatrixXd& b_steady,
                                   bool with_sensitivities);

// Dual-mode control mean at a given offset since the last computation:
// stored plan input plus LQR correction toward the predicted trajectory while
// the plan lasts, pure steady-state LQR toward [ref, 0, 0, 0] afterwards.
// Optionally returns d(mean)/d(lqr parameter) using gains sensitivities.
double dual_mode_mean(const PlanSegment& segment, const SegmentGains& gains, int offset,
                      const State& x, double ref_now, Eigen::VectorXd* dmean_dlqr = nullptr);

// Stored MPC input at an offset (0 beyond the plan).
double mpc_plan_input(const PlanSegment& segment, int offset);

// Owns the solver, warm-start cache, the current plan and its gains; one
// instance per environment.
class ControlSession {
 public:
  explicit ControlSession(const ControllerConfig& config);

  void reset();

  // Solve the OCP from (x, ref) at the given horizon and refresh the LQR
  // gains from the weights. steps_since_last shifts the warm start.
  const ocp::Diagnostics& recompute(const State& x, double ref, int horizon,
                                    const lqr::Weights& weights, double u_prev,
                                    int steps_since_last);

  bool has_plan() const { return static_cast<bool>(segment_); }
  const std::shared_ptr<const PlanSegment>& segment() const { return segment_; }
  const SegmentGains& gains() const { return gains_; }
  const ocp::Diagnostics& last_diagnostics() const { return last_diag_; }

  // Re-derive the gains for the stored plan after a weight update, so the
  // executed control law and the trainer's log-prob recomputation agree.
  void refresh_gains(const lqr::Weights& weights);
  // Adopt an externally restored plan (checkpoint resume).
  void restore_plan(const PlanSegment& segment, const lqr::Weights& weights);

  double mpc_input(int offset) const { return mpc_plan_input(*segment_, offset); }
  double dual_mode_input(int offset, const State& x, double ref_now) const {
    return dual_mode_mean(*segment_, gains_, offset, x, ref_now);
  }

  const Eigen::MatrixXd& a_steady() const { return a_steady_; }
  const Eigen::MatrixXd& b_steady() const { return b_steady_; }
  const ControllerConfig& config() const { return config_; }

  // cumulative accounting for computation-time reporting
  double total_solve_time() const { return total_solve_time_; }
  std::int64_t total_solves() const { return total_solves_; }
  std::int64_t total_iterations() const { return total_iterations_; }

 private:
  ControllerConfig config_;
  ocp::Solver solver_;
  std::shared_ptr<const DiscreteModel> model_;
  std::shared_ptr<const StageCost> cost_;
  Eigen::MatrixXd a_steady_, b_steady_;
  std::shared_ptr<const PlanSegment> segment_;
  SegmentGains gains_;
  ocp::Solution last_solution_;
  ocp::Diagnostics last_diag_;
  double total_solve_time_ = 0.0;
  std::int64_t total_solves_ = 0;
  std::int64_t total_iterations_ = 0;
};

}  // namespace etmpc
