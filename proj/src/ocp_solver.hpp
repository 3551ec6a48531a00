#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "cost.hpp"
#include "model.hpp"

namespace etmpc::ocp {

struct Settings {
  double kkt_tol = 1e-6;
  int max_iterations = 200;
  double mu_init = 1e-1;       // initial barrier parameter, cold start
  double mu_init_warm = 1e-3;  // initial barrier parameter with a warm start
  bool verbose = false;        // per-iteration diagnostics on stdout
};

struct Problem {
  Eigen::VectorXd x_init;
  std::vector<double> psi_ref;  // per-stage reference; a single entry broadcasts
  int horizon = 40;
  double rho = 1.0;   // discount over stages, (0, 1]
  double u_prev = 0.0;
  double input_change_weight = 0.1;  // D in du' D du
  double u_min = -5.0, u_max = 5.0;
  double psi_min = -2.0, psi_max = 2.0;
  int psi_index = 0;  // state entry with the position bound, -1 disables
  std::shared_ptr<const DiscreteModel> model;
  std::shared_ptr<const StageCost> cost;

  double ref_at(int k) const {
    if (psi_ref.empty()) return 0.0;
    return psi_ref.size() == 1 ? psi_ref[0] : psi_ref[static_cast<std::size_t>(k) < psi_ref.size() ? k : psi_ref.size() - 1];
  }
};

struct Diagnostics {
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double solve_time = 0.0;  // seconds
  bool converged = false;
  bool suboptimal = false;  // iteration cap hit, best iterate returned
};

struct Solution {
  Eigen::MatrixXd u_seq;   // m x N
  Eigen::MatrixXd x_pred;  // n x (N+1), x_pred.col(0) == x_init
  std::vector<Eigen::MatrixXd> a_seq;  // d(step)/dx along the trajectory
  std::vector<Eigen::MatrixXd> b_seq;  // d(step)/du along the trajectory
  double objective = 0.0;
  Diagnostics diagnostics;

  int horizon() const { return static_cast<int>(u_seq.cols()); }
};

class Solver {
 public:
  explicit Solver(Settings settings = {}) : settings_(settings) {}

  // Solves the transcribed NLP (multiple shooting, one model step per control
  // interval). Throws SolverError when the initial state violates the
  // position bound, NumericError on non-finite iterates. Hitting the
  // iteration cap returns the best iterate flagged suboptimal.
  Solution solve(const Problem& problem, const Solution* warm_start = nullptr) const;

  const Settings& settings() const { return settings_; }

  // Reuses the previous solution after steps_elapsed plant steps: drops the
  // consumed inputs, repeats the last input / holds the last state to fill,
  // and resizes to new_horizon.
  static Solution shift_warm_start(const Solution& previous, int steps_elapsed, int new_horizon,
                                   const Eigen::VectorXd& x_now);

  // Objective of the transcribed NLP at the given trajectory (no feasibility
  // requirement).
  static double nlp_objective(const Problem& problem, const Eigen::MatrixXd& x_traj,
                              const Eigen::MatrixXd& u_seq);

  // Model linearizations along a trajectory.
  static void linearize(const Problem& problem, Solution* solution);
  static std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearize_steady(const DiscreteModel& model,
                                                                      const Eigen::VectorXd& x_s,
                                                                      const Eigen::VectorXd& u_s);

 private:
  Settings settings_;
};

}  // namespace etmpc::ocp
