#include "controller.hpp"

#include "cost.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace etmpc {

SegmentGains compute_segment_gains(const PlanSegment& segment, const lqr::Weights& weights,
                                   const Eigen::MatrixXd& a_steady, const Eigen::MatrixXd& b_steady,
                                   bool with_sensitivities) {
  SegmentGains out;
  const Eigen::MatrixXd q = weights.q();
  const Eigen::MatrixXd r = weights.r();
  const auto dare = lqr::solve_dare(a_steady, b_steady, q, r);
  out.s_inf = dare.s;
  out.k_inf = dare.k;
  const auto pass = lqr::backward_pass(segment.a_seq, segment.b_seq, q, r, dare.s);
  out.k_seq = pass.k;
  if (with_sensitivities) {
    std::vector<lqr::WeightDirection> dirs(weights.num_params());
    for (int p = 0; p < weights.num_params(); ++p)
      weights.param_direction(p, &dirs[p].dq, &dirs[p].dr);
    const auto stationary = lqr::dare_sensitivities(a_steady, b_steady, q, r, dare.s, dare.k, dirs);
    std::vector<Eigen::MatrixXd> ds_terminal;
    ds_terminal.reserve(stationary.size());
    out.dk_inf.reserve(stationary.size());
    for (const auto& s : stationary) {
      ds_terminal.push_back(s.ds);
      out.dk_inf.push_back(s.dk);
    }
    out.dk_seq = lqr::backward_pass_sensitivities(segment.a_seq, segment.b_seq, r, pass, dirs, ds_terminal);
  }
  return out;
}

double dual_mode_mean(const PlanSegment& segment, const SegmentGains& gains, int offset,
                      const State& x, double ref_now, Eigen::VectorXd* dmean_dlqr) {
  if (offset < segment.horizon) {
    const Eigen::VectorXd e = x - segment.x_pred.col(offset);
    const double correction = lqr::lqr_input(gains.k_seq[offset], e)(0);
    if (dmean_dlqr) {
      dmean_dlqr->resize(static_cast<int>(gains.dk_seq.size()));
      for (std::size_t p = 0; p < gains.dk_seq.size(); ++p)
        (*dmean_dlqr)(p) = (-gains.dk_seq[p][offset] * e)(0);
    }
    return segment.u_plan(0, offset) + correction;
  }
  const Eigen::VectorXd e = x - State(ref_now, 0.0, 0.0, 0.0);
  if (dmean_dlqr) {
    dmean_dlqr->resize(static_cast<int>(gains.dk_inf.size()));
    for (std::size_t p = 0; p < gains.dk_inf.size(); ++p)
      (*dmean_dlqr)(p) = (-gains.dk_inf[p] * e)(0);
  }
  return lqr::lqr_input(gains.k_inf, e)(0);
}

double mpc_plan_input(const PlanSegment& segment, int offset) {
  return offset < segment.horizon ? segment.u_plan(0, offset) : 0.0;
}

ControlSession::ControlSession(const ControllerConfig& config)
    : config_(config),
      solver_(config.ocp_settings),
      model_(std::make_shared<PendulumRk4Model>(config.model_params)),
      cost_(std::make_shared<PendulumTaskCost>(config.model_params)) {
  std::tie(a_steady_, b_steady_) =
      ocp::Solver::linearize_steady(*model_, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1));
}

void ControlSession::reset() {
  segment_.reset();
  last_solution_ = ocp::Solution{};
  last_diag_ = ocp::Diagnostics{};
}

void ControlSession::refresh_gains(const lqr::Weights& weights) {
  if (segment_) gains_ = compute_segment_gains(*segment_, weights, a_steady_, b_steady_, false);
}

void ControlSession::restore_plan(const PlanSegment& segment, const lqr::Weights& weights) {
  segment_ = std::make_shared<PlanSegment>(segment);
  gains_ = compute_segment_gains(*segment_, weights, a_steady_, b_steady_, false);
  last_solution_ = ocp::Solution{};
  last_solution_.u_seq = segment.u_plan;
  last_solution_.x_pred = segment.x_pred;
  last_solution_.a_seq = segment.a_seq;
  last_solution_.b_seq = segment.b_seq;
  last_diag_ = ocp::Diagnostics{};
}

const ocp::Diagnostics& ControlSession::recompute(const State& x, double ref, int horizon,
                                                  const lqr::Weights& weights, double u_prev,
                                                  int steps_since_last) {
  if (horizon < config_.n_min || horizon > config_.n_max)
    throw SolverError("ControlSession: horizon outside [n_min, n_max]");
  ocp::Problem pb;
  pb.x_init = x;
  pb.psi_ref = {ref};
  pb.horizon = horizon;
  pb.rho = config_.rho;
  pb.u_prev = u_prev;
  pb.input_change_weight = config_.input_change_weight;
  pb.u_min = config_.u_min;
  pb.u_max = config_.u_max;
  pb.psi_min = config_.psi_min;
  pb.psi_max = config_.psi_max;
  pb.model = model_;
  pb.cost = cost_;

  ocp::Solution warm;
  const bool have_warm = last_solution_.horizon() > 0 && steps_since_last >= 1;
  if (have_warm) warm = ocp::Solver::shift_warm_start(last_solution_, steps_since_last, horizon, x);
  last_solution_ = solver_.solve(pb, have_warm ? &warm : nullptr);
  last_diag_ = last_solution_.diagnostics;
  total_solve_time_ += last_diag_.solve_time;
  total_iterations_ += last_diag_.iterations;
  ++total_solves_;

  auto seg = std::make_shared<PlanSegment>();
  seg->u_plan = last_solution_.u_seq;
  seg->x_pred = last_solution_.x_pred;
  seg->a_seq = last_solution_.a_seq;
  seg->b_seq = last_solution_.b_seq;
  seg->ref = ref;
  seg->horizon = horizon;
  segment_ = std::move(seg);
  gains_ = compute_segment_gains(*segment_, weights, a_steady_, b_steady_, false);
  return last_diag_;
}

}  // namespace etmpc
