#pragma once

#include <Eigen/Dense>
#include <memory>

#include "dual.hpp"
#include "pendulum.hpp"

namespace etmpc {

// Discrete-time prediction model with the derivative information the
// transcription needs: x' = F(x, u), its Jacobians, and the Hessian of
// lambda^T F over (x; u).
class DiscreteModel {
 public:
  virtual ~DiscreteModel() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
  virtual void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd* xn,
                         Eigen::MatrixXd* a, Eigen::MatrixXd* b) const = 0;
  virtual void lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& lambda, Eigen::MatrixXd* h) const = 0;
  // Value, Jacobians and lambda^T F Hessian in one evaluation.
  virtual void full_derivatives(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& lambda, Eigen::VectorXd* xn,
                                Eigen::MatrixXd* a, Eigen::MatrixXd* b, Eigen::MatrixXd* h) const {
    jacobians(x, u, xn, a, b);
    lagrangian_hessian(x, u, lambda, h);
  }
};

// RK4-discretized pendulum, derivatives by forward-mode duals.
class PendulumRk4Model final : public DiscreteModel {
 public:
  explicit PendulumRk4Model(const PendulumParams& params) : params_(params) {}

  int state_dim() const override { return 4; }
  int input_dim() const override { return 1; }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    std::array<double, 4> xa{x(0), x(1), x(2), x(3)};
    const auto xn = pendulum_rk4(xa, u(0), params_);
    return Eigen::Vector4d(xn[0], xn[1], xn[2], xn[3]);
  }

  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd* xn,
                 Eigen::MatrixXd* a, Eigen::MatrixXd* b) const override {
    const auto r = dual_step(x, u);
    if (xn) {
      xn->resize(4);
      for (int i = 0; i < 4; ++i) (*xn)(i) = r[i].v;
    }
    if (a) {
      a->resize(4, 4);
      for (int i = 0; i < 4; ++i) a->row(i) = r[i].g.head(4).transpose();
    }
    if (b) {
      b->resize(4, 1);
      for (int i = 0; i < 4; ++i) (*b)(i, 0) = r[i].g(4);
    }
  }

  void lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& lambda, Eigen::MatrixXd* h) const override {
    const auto r = dual_step(x, u);
    h->setZero(5, 5);
    for (int i = 0; i < 4; ++i) *h += lambda(i) * r[i].h;
  }

  void full_derivatives(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& lambda, Eigen::VectorXd* xn, Eigen::MatrixXd* a,
                        Eigen::MatrixXd* b, Eigen::MatrixXd* h) const override {
    const auto r = dual_step(x, u);
    xn->resize(4);
    a->resize(4, 4);
    b->resize(4, 1);
    h->setZero(5, 5);
    for (int i = 0; i < 4; ++i) {
      (*xn)(i) = r[i].v;
      a->row(i) = r[i].g.head(4).transpose();
      (*b)(i, 0) = r[i].g(4);
      *h += lambda(i) * r[i].h;
    }
  }

  const PendulumParams& params() const { return params_; }

 private:
  std::array<Dual2<5>, 4> dual_step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    std::array<Dual2<5>, 4> xd;
    for (int i = 0; i < 4; ++i) xd[i] = Dual2<5>::seed(x(i), i);
    const Dual2<5> ud = Dual2<5>::seed(u(0), 4);
    return pendulum_rk4(xd, ud, params_);
  }

  PendulumParams params_;
};

// Exact linear model x' = A x + B u, mainly for solver verification against
// quadratic-program oracles.
class LinearModel final : public DiscreteModel {
 public:
  LinearModel(Eigen::MatrixXd a, Eigen::MatrixXd b) : a_(std::move(a)), b_(std::move(b)) {}

  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int input_dim() const override { return static_cast<int>(b_.cols()); }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    return a_ * x + b_ * u;
  }

  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd* xn,
                 Eigen::MatrixXd* a, Eigen::MatrixXd* b) const override {
    if (xn) *xn = a_ * x + b_ * u;
    if (a) *a = a_;
    if (b) *b = b_;
  }

  void lagrangian_hessian(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&,
                          Eigen::MatrixXd* h) const override {
    h->setZero(state_dim() + input_dim(), state_dim() + input_dim());
  }

 private:
  Eigen::MatrixXd a_, b_;
};

}  // namespace etmpc
