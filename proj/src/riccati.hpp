#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "cost.hpp"

namespace etmpc::lqr {

// Cost weights parameterized by Cholesky-style factors with positive
// diagonals: Q = Lq^T Lq, R = Lr^T Lr (Lq, Lr lower-triangular). Keeps Q, R
// positive definite under unconstrained parameter updates.
struct Weights {
  Eigen::MatrixXd q_chol;  // n x n lower-triangular
  Eigen::MatrixXd r_chol;  // m x m lower-triangular

  Eigen::MatrixXd q() const { return q_chol.transpose() * q_chol; }
  Eigen::MatrixXd r() const { return r_chol.transpose() * r_chol; }

  // Factor existing SPD matrices; round-trips with positive diagonals.
  static Weights from_matrices(const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

  int num_params() const;
  // Lower-triangle entries scanned rows-first, q_chol then r_chol.
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);
  // dQ and dR for a unit perturbation of parameter k.
  void param_direction(int k, Eigen::MatrixXd* dq, Eigen::MatrixXd* dr) const;
};

struct DareResult {
  Eigen::MatrixXd s;  // stationary Riccati solution
  Eigen::MatrixXd k;  // gain, control law u = -K x
  double residual = 0.0;
  int iterations = 0;
};

// Stationary DARE via the structure-preserving doubling algorithm.
// Throws SolverError when the iteration fails to converge (not stabilizable
// or ill-posed weights).
DareResult solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                      const Eigen::MatrixXd& r);

double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                     const Eigen::MatrixXd& r, const Eigen::MatrixXd& s);

struct BackwardPass {
  std::vector<Eigen::MatrixXd> s;  // horizon + 1 entries, s[horizon] = terminal
  std::vector<Eigen::MatrixXd> k;  // horizon entries
};

BackwardPass backward_pass(const std::vector<Eigen::MatrixXd>& a_seq,
                           const std::vector<Eigen::MatrixXd>& b_seq, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& r, const Eigen::MatrixXd& s_terminal);

struct WeightDirection {
  Eigen::MatrixXd dq;
  Eigen::MatrixXd dr;
};

struct StationarySensitivity {
  Eigen::MatrixXd ds;
  Eigen::MatrixXd dk;
};

// Implicit-function-theorem sensitivities of the stationary (S, K) pair for a
// set of (dQ, dR) directions. The DARE and gain equations are flattened to
// F(y, z) = 0 with y = (S, K), z = (Q, R); dy = -(dF/dy)^-1 dF/dz dz.
// Throws NumericError if dF/dy is singular.
std::vector<StationarySensitivity> dare_sensitivities(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
    const Eigen::MatrixXd& r, const Eigen::MatrixXd& s, const Eigen::MatrixXd& k,
    const std::vector<WeightDirection>& dirs);

// Backward-in-time propagation of gain sensitivities along a finite-horizon
// pass. dirs[i] supplies (dQ, dR) and the matching terminal dS. Returns, per
// direction, dK_k for k = 0 .. horizon-1.
std::vector<std::vector<Eigen::MatrixXd>> backward_pass_sensitivities(
    const std::vector<Eigen::MatrixXd>& a_seq, const std::vector<Eigen::MatrixXd>& b_seq,
    const Eigen::MatrixXd& r, const BackwardPass& pass, const std::vector<WeightDirection>& dirs,
    const std::vector<Eigen::MatrixXd>& ds_terminal);

// Weights from the second derivatives of the stage cost at a steady state.
// Indefinite Hessians are eigenvalue-clamped at eps before factorization.
Weights init_weights(const StageCost& cost, const Eigen::VectorXd& x_s, const Eigen::VectorXd& u_s,
                     double psi_ref, double input_change_weight, double eps = 1e-6);

// Feedback correction -K e.
inline Eigen::VectorXd lqr_input(const Eigen::MatrixXd& k, const Eigen::VectorXd& e) {
  return -k * e;
}

}  // namespace etmpc::lqr
