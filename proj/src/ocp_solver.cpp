#include "ocp_solver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>

#include "errors.hpp"

namespace etmpc::ocp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Symmetric indefinite KKT system stored in LAPACK general-band layout and
// factored with dgbtrf. The stage-interleaved ordering
//   [lambda_init | x_0 u_0 lambda_0 | x_1 u_1 lambda_1 | ... | x_N]
// keeps the half-bandwidth at 2n + m.
class BandedKkt {
 public:
  void reset(int dim, int half_bandwidth) {
    dim_ = dim;
    kl_ = ku_ = half_bandwidth;
    ldab_ = 2 * kl_ + ku_ + 1;
    ab_.assign(static_cast<std::size_t>(ldab_) * dim_, 0.0);
    ipiv_.resize(dim_);
  }

  void add(int i, int j, double v) { ab_[static_cast<std::size_t>(j) * ldab_ + (kl_ + ku_ + i - j)] += v; }

  bool factor_and_solve(Eigen::VectorXd* rhs) {
    const lapack_int info_f = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, dim_, dim_, kl_, ku_, ab_.data(), ldab_, ipiv_.data());
    if (info_f != 0) return false;
    const lapack_int info_s = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', dim_, kl_, ku_, 1, ab_.data(), ldab_,
                                             ipiv_.data(), rhs->data(), dim_);
    return info_s == 0;
  }

 private:
  int dim_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  std::vector<double> ab_;
  std::vector<lapack_int> ipiv_;
};

struct Layout {
  int n, m, horizon;
  int nw() const { return (horizon + 1) * n + horizon * m; }
  int nc() const { return (horizon + 1) * n; }
  // primal vector offsets
  int px(int k) const { return k * (n + m); }
  int pu(int k) const { return k * (n + m) + n; }
  // dual vector offsets: init constraint first, then defects
  int pl(int k) const { return (k + 1) * n; }
  int pl_init() const { return 0; }
  // interleaved KKT offsets
  int kx(int k) const { return n + k * (2 * n + m); }
  int ku(int k) const { return n + k * (2 * n + m) + n; }
  int kl(int k) const { return n + k * (2 * n + m) + n + m; }
  int kl_init() const { return 0; }
  int kkt_dim() const { return nw() + nc(); }
  int bandwidth() const { return 2 * n + m; }
  int kkt_of_primal(int i) const {
    const int stage = i / (n + m);
    const int off = i % (n + m);
    return kx(stage) + (off < n ? off : n + (off - n));
  }
  int kkt_of_dual(int i) const { return i < n ? i : kl(i / n - 1) + i % n; }
};

struct Evaluation {
  double objective = 0.0;
  Eigen::VectorXd grad;                 // df/dw
  Eigen::VectorXd constraints;          // c(w)
  std::vector<Eigen::MatrixXd> a, b;    // defect Jacobians per stage
  std::vector<Eigen::MatrixXd> hess;    // 5x5-ish Lagrangian stage Hessians (x_k, u_k)
};

double objective_only(const Problem& pb, const Layout& lay, const Eigen::VectorXd& w) {
  double f = 0.0;
  const double d = pb.input_change_weight;
  Eigen::VectorXd u_last = Eigen::VectorXd::Constant(lay.m, pb.u_prev);
  double rho_k = 1.0;
  for (int k = 0; k < lay.horizon; ++k) {
    const Eigen::VectorXd x = w.segment(lay.px(k), lay.n);
    const Eigen::VectorXd u = w.segment(lay.pu(k), lay.m);
    const Eigen::VectorXd du = u - u_last;
    f += rho_k * (pb.cost->value(x, u, pb.ref_at(k)) + d * du.squaredNorm());
    u_last = u;
    rho_k *= pb.rho;
  }
  return f;
}

void constraints_only(const Problem& pb, const Layout& lay, const Eigen::VectorXd& w, Eigen::VectorXd* c) {
  c->resize(lay.nc());
  c->segment(lay.pl_init(), lay.n) = w.segment(lay.px(0), lay.n) - pb.x_init;
  for (int k = 0; k < lay.horizon; ++k) {
    const Eigen::VectorXd xn = pb.model->step(w.segment(lay.px(k), lay.n), w.segment(lay.pu(k), lay.m));
    c->segment(lay.pl(k), lay.n) = xn - w.segment(lay.px(k + 1), lay.n);
  }
}

void evaluate(const Problem& pb, const Layout& lay, const Eigen::VectorXd& w, const Eigen::VectorXd& lambda,
              Evaluation* ev) {
  const int n = lay.n, m = lay.m, horizon = lay.horizon;
  ev->grad.setZero(lay.nw());
  ev->constraints.resize(lay.nc());
  ev->a.resize(horizon);
  ev->b.resize(horizon);
  ev->hess.assign(horizon, Eigen::MatrixXd::Zero(n + m, n + m));
  ev->objective = 0.0;

  ev->constraints.segment(lay.pl_init(), n) = w.segment(lay.px(0), n) - pb.x_init;

  const double d = pb.input_change_weight;
  Eigen::VectorXd gx(n), gu(m);
  Eigen::MatrixXd hxx(n, n), huu(m, m), hxu(n, m), hc(n + m, n + m);
  Eigen::VectorXd xn(n);
  double rho_k = 1.0;
  for (int k = 0; k < horizon; ++k) {
    const Eigen::VectorXd x = w.segment(lay.px(k), n);
    const Eigen::VectorXd u = w.segment(lay.pu(k), m);
    pb.model->full_derivatives(x, u, lambda.segment(lay.pl(k), n), &xn, &ev->a[k], &ev->b[k], &hc);
    ev->constraints.segment(lay.pl(k), n) = xn - w.segment(lay.px(k + 1), n);
    ev->hess[k] = hc;

    pb.cost->quadratics(x, u, pb.ref_at(k), &gx, &gu, &hxx, &huu, &hxu);
    ev->objective += rho_k * pb.cost->value(x, u, pb.ref_at(k));
    ev->grad.segment(lay.px(k), n) += rho_k * gx;
    ev->grad.segment(lay.pu(k), m) += rho_k * gu;
    ev->hess[k].topLeftCorner(n, n) += rho_k * hxx;
    ev->hess[k].bottomRightCorner(m, m) += rho_k * huu;
    ev->hess[k].topRightCorner(n, m) += rho_k * hxu;
    ev->hess[k].bottomLeftCorner(m, n) += rho_k * hxu.transpose();

    // input-change term rho^k * du' D du, du_0 measured against u_prev
    const Eigen::VectorXd u_last =
        k == 0 ? Eigen::VectorXd::Constant(m, pb.u_prev) : Eigen::VectorXd(w.segment(lay.pu(k - 1), m));
    const Eigen::VectorXd du = u - u_last;
    ev->objective += rho_k * d * du.squaredNorm();
    ev->grad.segment(lay.pu(k), m) += 2.0 * rho_k * d * du;
    if (k > 0) ev->grad.segment(lay.pu(k - 1), m) -= 2.0 * rho_k * d * du;
    rho_k *= pb.rho;
  }
}

}  // namespace

Solution Solver::shift_warm_start(const Solution& previous, int steps_elapsed, int new_horizon,
                                  const Eigen::VectorXd& x_now) {
  const int n = static_cast<int>(previous.x_pred.rows());
  const int m = static_cast<int>(previous.u_seq.rows());
  const int old_horizon = previous.horizon();
  Solution guess;
  guess.u_seq.setZero(m, new_horizon);
  guess.x_pred.setZero(n, new_horizon + 1);
  const bool consumed = steps_elapsed >= old_horizon;
  for (int k = 0; k < new_horizon; ++k) {
    const int idx = steps_elapsed + k;
    if (!consumed) guess.u_seq.col(k) = previous.u_seq.col(std::min(idx, old_horizon - 1));
  }
  guess.x_pred.col(0) = x_now;
  for (int k = 1; k <= new_horizon; ++k) {
    const int idx = steps_elapsed + k;
    guess.x_pred.col(k) = consumed ? x_now : previous.x_pred.col(std::min(idx, old_horizon));
  }
  return guess;
}

double Solver::nlp_objective(const Problem& problem, const Eigen::MatrixXd& x_traj,
                             const Eigen::MatrixXd& u_seq) {
  Layout lay{problem.model->state_dim(), problem.model->input_dim(), problem.horizon};
  Eigen::VectorXd w(lay.nw());
  for (int k = 0; k < lay.horizon; ++k) {
    w.segment(lay.px(k), lay.n) = x_traj.col(k);
    w.segment(lay.pu(k), lay.m) = u_seq.col(k);
  }
  w.segment(lay.px(lay.horizon), lay.n) = x_traj.col(lay.horizon);
  return objective_only(problem, lay, w);
}

void Solver::linearize(const Problem& problem, Solution* solution) {
  const int horizon = solution->horizon();
  solution->a_seq.resize(horizon);
  solution->b_seq.resize(horizon);
  for (int k = 0; k < horizon; ++k)
    problem.model->jacobians(solution->x_pred.col(k), solution->u_seq.col(k), nullptr,
                             &solution->a_seq[k], &solution->b_seq[k]);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> Solver::linearize_steady(const DiscreteModel& model,
                                                                     const Eigen::VectorXd& x_s,
                                                                     const Eigen::VectorXd& u_s) {
  Eigen::MatrixXd a, b;
  model.jacobians(x_s, u_s, nullptr, &a, &b);
  return {a, b};
}

Solution Solver::solve(const Problem& pb, const Solution* warm_start) const {
  const auto t_start = std::chrono::steady_clock::now();
  if (!pb.model || !pb.cost) throw ConfigError("ocp::Solver: problem needs model and cost");
  if (pb.horizon < 1) throw ConfigError("ocp::Solver: horizon must be >= 1");
  if (!(pb.rho > 0.0 && pb.rho <= 1.0)) throw ConfigError("ocp::Solver: rho must lie in (0, 1]");
  if (!pb.x_init.allFinite()) throw NumericError("ocp::Solver: initial state not finite");

  Layout lay{pb.model->state_dim(), pb.model->input_dim(), pb.horizon};
  const int n = lay.n, m = lay.m, horizon = lay.horizon;
  const int nw = lay.nw(), nc = lay.nc();

  if (pb.psi_index >= 0 &&
      (pb.x_init(pb.psi_index) < pb.psi_min || pb.x_init(pb.psi_index) > pb.psi_max))
    throw SolverError("ocp::Solver: infeasible, initial state violates the position bound");

  // variable bounds
  Eigen::VectorXd lb = Eigen::VectorXd::Constant(nw, -kInf);
  Eigen::VectorXd ub = Eigen::VectorXd::Constant(nw, kInf);
  for (int k = 0; k < horizon; ++k) {
    lb.segment(lay.pu(k), m).setConstant(pb.u_min);
    ub.segment(lay.pu(k), m).setConstant(pb.u_max);
  }
  if (pb.psi_index >= 0) {
    for (int k = 1; k <= horizon; ++k) {
      lb(lay.px(k) + pb.psi_index) = pb.psi_min;
      ub(lay.px(k) + pb.psi_index) = pb.psi_max;
    }
  }

  // initial iterate
  Eigen::VectorXd w(nw);
  Solution resized;
  const Solution* guess = warm_start;
  if (guess && guess->horizon() != horizon) {
    resized = shift_warm_start(*guess, 0, horizon, pb.x_init);
    guess = &resized;
  }
  if (guess) {
    for (int k = 0; k <= horizon; ++k) w.segment(lay.px(k), n) = guess->x_pred.col(k);
    for (int k = 0; k < horizon; ++k) w.segment(lay.pu(k), m) = guess->u_seq.col(k);
  } else {
    // cold start: zero-input rollout of the model, a feasible trajectory up
    // to bound clipping
    Eigen::VectorXd x = pb.x_init;
    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < horizon; ++k) {
      w.segment(lay.px(k), n) = x;
      w.segment(lay.pu(k), m) = u0;
      x = pb.model->step(x, u0);
    }
    w.segment(lay.px(horizon), n) = x;
  }
  // push bounded entries strictly inside
  for (int i = 0; i < nw; ++i) {
    if (lb(i) == -kInf) continue;
    const double margin = 1e-3 * (ub(i) - lb(i));
    w(i) = std::clamp(w(i), lb(i) + margin, ub(i) - margin);
  }
  w.segment(lay.px(0), n) = pb.x_init;

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(nc);
  double mu = warm_start ? settings_.mu_init_warm : settings_.mu_init;
  const double mu_floor = settings_.kkt_tol / 10.0;

  auto slack_l = [&](const Eigen::VectorXd& wv, int i) { return wv(i) - lb(i); };
  auto slack_u = [&](const Eigen::VectorXd& wv, int i) { return ub(i) - wv(i); };

  Eigen::VectorXd z_l = Eigen::VectorXd::Zero(nw), z_u = Eigen::VectorXd::Zero(nw);
  for (int i = 0; i < nw; ++i) {
    if (lb(i) != -kInf) z_l(i) = mu / slack_l(w, i);
    if (ub(i) != kInf) z_u(i) = mu / slack_u(w, i);
  }

  Evaluation ev;
  BandedKkt kkt;
  Eigen::VectorXd best_w = w, best_lambda = lambda;
  double best_error = kInf;
  double final_error = kInf;
  double nu = 1.0;  // l1 merit penalty
  int iter = 0;
  bool converged = false;

  auto barrier_terms = [&](const Eigen::VectorXd& wv) {
    double s = 0.0;
    for (int i = 0; i < nw; ++i) {
      if (lb(i) != -kInf) {
        const double sl = slack_l(wv, i);
        if (sl <= 0.0) return kInf;
        s -= mu * std::log(sl);
      }
      if (ub(i) != kInf) {
        const double su = slack_u(wv, i);
        if (su <= 0.0) return kInf;
        s -= mu * std::log(su);
      }
    }
    return s;
  };

  for (; iter < settings_.max_iterations; ++iter) {
    evaluate(pb, lay, w, lambda, &ev);
    if (!ev.grad.allFinite() || !ev.constraints.allFinite())
      throw NumericError("ocp::Solver: non-finite problem data at iterate");

    // dual residual: grad f + J' lambda - z_l + z_u
    Eigen::VectorXd jtl = Eigen::VectorXd::Zero(nw);
    jtl.segment(lay.px(0), n) += lambda.segment(lay.pl_init(), n);
    for (int k = 0; k < horizon; ++k) {
      const auto lam_k = lambda.segment(lay.pl(k), n);
      jtl.segment(lay.px(k), n) += ev.a[k].transpose() * lam_k;
      jtl.segment(lay.pu(k), m) += ev.b[k].transpose() * lam_k;
      jtl.segment(lay.px(k + 1), n) -= lam_k;
    }
    const Eigen::VectorXd r_dual = ev.grad + jtl - z_l + z_u;

    double compl_0 = 0.0, compl_mu = 0.0;
    for (int i = 0; i < nw; ++i) {
      if (lb(i) != -kInf) {
        const double sz = slack_l(w, i) * z_l(i);
        compl_0 = std::max(compl_0, std::abs(sz));
        compl_mu = std::max(compl_mu, std::abs(sz - mu));
      }
      if (ub(i) != kInf) {
        const double sz = slack_u(w, i) * z_u(i);
        compl_0 = std::max(compl_0, std::abs(sz));
        compl_mu = std::max(compl_mu, std::abs(sz - mu));
      }
    }
    const double r_pri = ev.constraints.lpNorm<Eigen::Infinity>();
    const double error_0 = std::max({r_dual.lpNorm<Eigen::Infinity>(), r_pri, compl_0});
    if (error_0 < best_error) {
      best_error = error_0;
      best_w = w;
      best_lambda = lambda;
    }
    if (error_0 <= settings_.kkt_tol) {
      converged = true;
      final_error = error_0;
      break;
    }
    if (settings_.verbose)
      std::printf("ipm it %3d mu %.2e err0 %.3e rd %.3e rp %.3e obj %.6f\n", iter, mu, error_0,
                  r_dual.lpNorm<Eigen::Infinity>(), r_pri, ev.objective);
    const double error_mu = std::max({r_dual.lpNorm<Eigen::Infinity>(), r_pri, compl_mu});
    if (error_mu <= 10.0 * mu && mu > mu_floor)
      mu = std::max(mu_floor, std::min(0.2 * mu, std::pow(mu, 1.5)));

    // barrier-gradient rhs
    Eigen::VectorXd grad_barrier = ev.grad;
    for (int i = 0; i < nw; ++i) {
      if (lb(i) != -kInf) grad_barrier(i) -= mu / slack_l(w, i);
      if (ub(i) != kInf) grad_barrier(i) += mu / slack_u(w, i);
    }
    const Eigen::VectorXd rhs_w = -(grad_barrier + jtl);
    const Eigen::VectorXd rhs_c = -ev.constraints;

    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(nw);
    for (int i = 0; i < nw; ++i) {
      if (lb(i) != -kInf) sigma(i) += z_l(i) / slack_l(w, i);
      if (ub(i) != kInf) sigma(i) += z_u(i) / slack_u(w, i);
    }

    Eigen::VectorXd dw(nw), dlambda(nc);
    double delta_w = 0.0;
    bool accepted = false;
    double alpha = 0.0, alpha_z = 1.0, dphi = 0.0;
    const double tau = std::max(0.99, 1.0 - mu);
    for (int attempt = 0; attempt < 24 && !accepted; ++attempt) {
      kkt.reset(lay.kkt_dim(), lay.bandwidth());
      for (int k = 0; k < horizon; ++k) {
        // stage Hessian block over (x_k, u_k); x_k and u_k are contiguous
        for (int i = 0; i < n + m; ++i)
          for (int j = 0; j < n + m; ++j) {
            const double v = ev.hess[k](i, j);
            if (v != 0.0) kkt.add(lay.kx(k) + i, lay.kx(k) + j, v);
          }
        // Jacobian blocks of defect k
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double v = ev.a[k](i, j);
            if (v != 0.0) {
              kkt.add(lay.kl(k) + i, lay.kx(k) + j, v);
              kkt.add(lay.kx(k) + j, lay.kl(k) + i, v);
            }
          }
          for (int j = 0; j < m; ++j) {
            const double v = ev.b[k](i, j);
            if (v != 0.0) {
              kkt.add(lay.kl(k) + i, lay.ku(k) + j, v);
              kkt.add(lay.ku(k) + j, lay.kl(k) + i, v);
            }
          }
          kkt.add(lay.kl(k) + i, lay.kx(k + 1) + i, -1.0);
          kkt.add(lay.kx(k + 1) + i, lay.kl(k) + i, -1.0);
          kkt.add(lay.kl(k) + i, lay.kl(k) + i, -1e-8);
        }
      }
      // input-change coupling between consecutive stages
      double rho_k = 1.0;
      for (int k = 0; k < horizon; ++k) {
        const double coeff = 2.0 * rho_k * pb.input_change_weight;
        for (int j = 0; j < m; ++j) {
          kkt.add(lay.ku(k) + j, lay.ku(k) + j, coeff);
          if (k > 0) {
            kkt.add(lay.ku(k - 1) + j, lay.ku(k - 1) + j, coeff);
            kkt.add(lay.ku(k) + j, lay.ku(k - 1) + j, -coeff);
            kkt.add(lay.ku(k - 1) + j, lay.ku(k) + j, -coeff);
          }
        }
        rho_k *= pb.rho;
      }
      // initial-state constraint rows
      for (int i = 0; i < n; ++i) {
        kkt.add(lay.kl_init() + i, lay.kx(0) + i, 1.0);
        kkt.add(lay.kx(0) + i, lay.kl_init() + i, 1.0);
        kkt.add(lay.kl_init() + i, lay.kl_init() + i, -1e-8);
      }
      // barrier and primal regularization on the diagonal
      for (int i = 0; i < nw; ++i) kkt.add(lay.kkt_of_primal(i), lay.kkt_of_primal(i), sigma(i) + delta_w);

      Eigen::VectorXd rhs(lay.kkt_dim());
      for (int i = 0; i < nw; ++i) rhs(lay.kkt_of_primal(i)) = rhs_w(i);
      for (int i = 0; i < nc; ++i) rhs(lay.kkt_of_dual(i)) = rhs_c(i);

      const bool solved = kkt.factor_and_solve(&rhs);
      if (!solved || !rhs.allFinite()) {
        delta_w = delta_w == 0.0 ? 1e-6 : delta_w * 10.0;
        if (delta_w > 1e12) break;
        continue;
      }
      for (int i = 0; i < nw; ++i) dw(i) = rhs(lay.kkt_of_primal(i));
      for (int i = 0; i < nc; ++i) dlambda(i) = rhs(lay.kkt_of_dual(i));
      // exact-penalty weight from the current multiplier estimate
      nu = 1.1 * (lambda + dlambda).lpNorm<Eigen::Infinity>() + 0.1;
      dphi = grad_barrier.dot(dw) - nu * ev.constraints.lpNorm<1>();
      if (!(dphi < 0.0)) {
        delta_w = delta_w == 0.0 ? 1e-6 : delta_w * 10.0;
        if (delta_w > 1e12) break;
        continue;
      }

      double alpha_max = 1.0;
      for (int i = 0; i < nw; ++i) {
        if (lb(i) != -kInf && dw(i) < 0.0) alpha_max = std::min(alpha_max, -tau * slack_l(w, i) / dw(i));
        if (ub(i) != kInf && dw(i) > 0.0) alpha_max = std::min(alpha_max, tau * slack_u(w, i) / dw(i));
      }
      const double phi_0 = ev.objective + barrier_terms(w) + nu * ev.constraints.lpNorm<1>();
      alpha = alpha_max;
      Eigen::VectorXd w_trial, c_trial;
      for (int ls = 0; ls < 30 && !accepted; ++ls) {
        w_trial = w + alpha * dw;
        constraints_only(pb, lay, w_trial, &c_trial);
        const double f_trial = objective_only(pb, lay, w_trial);
        const double phi_trial = (std::isfinite(f_trial) && c_trial.allFinite())
                                     ? f_trial + barrier_terms(w_trial) + nu * c_trial.lpNorm<1>()
                                     : kInf;
        if (phi_trial <= phi_0 + 1e-4 * alpha * dphi)
          accepted = true;
        else
          alpha *= 0.5;
      }
      // a failed search feeds back into the regularization, convexifying the
      // model until the step is acceptable
      if (!accepted) {
        delta_w = delta_w == 0.0 ? 1e-6 : delta_w * 10.0;
        if (delta_w > 1e12) break;
      }
    }
    if (!accepted) break;  // give up, return best iterate flagged suboptimal

    // dual step for z with its own fraction-to-boundary
    Eigen::VectorXd dz_l = Eigen::VectorXd::Zero(nw), dz_u = Eigen::VectorXd::Zero(nw);
    for (int i = 0; i < nw; ++i) {
      if (lb(i) != -kInf) {
        const double sl = slack_l(w, i);
        dz_l(i) = (mu - z_l(i) * sl - z_l(i) * dw(i)) / sl;
        if (dz_l(i) < 0.0) alpha_z = std::min(alpha_z, -tau * z_l(i) / dz_l(i));
      }
      if (ub(i) != kInf) {
        const double su = slack_u(w, i);
        dz_u(i) = (mu - z_u(i) * su + z_u(i) * dw(i)) / su;
        if (dz_u(i) < 0.0) alpha_z = std::min(alpha_z, -tau * z_u(i) / dz_u(i));
      }
    }

    w += alpha * dw;
    lambda += alpha * dlambda;
    z_l += alpha_z * dz_l;
    z_u += alpha_z * dz_u;
    // keep multipliers in a primal-dual sane corridor
    constexpr double kSigmaCap = 1e10;
    for (int i = 0; i < nw; ++i) {
      if (lb(i) != -kInf)
        z_l(i) = std::clamp(z_l(i), mu / (kSigmaCap * slack_l(w, i)), kSigmaCap * mu / slack_l(w, i));
      if (ub(i) != kInf)
        z_u(i) = std::clamp(z_u(i), mu / (kSigmaCap * slack_u(w, i)), kSigmaCap * mu / slack_u(w, i));
    }
    if (!w.allFinite() || !lambda.allFinite())
      throw NumericError("ocp::Solver: iterate became non-finite");
  }

  const Eigen::VectorXd& w_out = converged ? w : best_w;
  Solution out;
  out.u_seq.resize(m, horizon);
  out.x_pred.resize(n, horizon + 1);
  for (int k = 0; k < horizon; ++k) {
    out.x_pred.col(k) = w_out.segment(lay.px(k), n);
    out.u_seq.col(k) = w_out.segment(lay.pu(k), m);
  }
  out.x_pred.col(horizon) = w_out.segment(lay.px(horizon), n);
  out.x_pred.col(0) = pb.x_init;  // exact by construction of the init constraint
  out.objective = objective_only(pb, lay, w_out);
  linearize(pb, &out);
  out.diagnostics.iterations = iter;
  out.diagnostics.kkt_residual = converged ? final_error : best_error;
  out.diagnostics.converged = converged;
  out.diagnostics.suboptimal = !converged;
  out.diagnostics.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace etmpc::ocp
