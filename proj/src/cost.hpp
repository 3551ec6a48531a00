#pragma once

#include <Eigen/Dense>

#include "dual.hpp"
#include "pendulum.hpp"

namespace etmpc {

// Per-stage task cost (everything except the input-change penalty, which the
// transcription owns because it couples consecutive inputs).
class StageCost {
 public:
  virtual ~StageCost() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual double value(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double psi_ref) const = 0;
  virtual void quadratics(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double psi_ref,
                          Eigen::VectorXd* gx, Eigen::VectorXd* gu, Eigen::MatrixXd* hxx,
                          Eigen::MatrixXd* huu, Eigen::MatrixXd* hxu) const = 0;
};

class PendulumTaskCost final : public StageCost {
 public:
  explicit PendulumTaskCost(const PendulumParams& params) : params_(params) {}

  int state_dim() const override { return 4; }
  int input_dim() const override { return 1; }

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double psi_ref) const override {
    std::array<double, 4> xa{x(0), x(1), x(2), x(3)};
    return pendulum_task_cost(xa, u(0), psi_ref, params_);
  }

  void quadratics(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double psi_ref,
                  Eigen::VectorXd* gx, Eigen::VectorXd* gu, Eigen::MatrixXd* hxx,
                  Eigen::MatrixXd* huu, Eigen::MatrixXd* hxu) const override {
    std::array<Dual2<5>, 4> xd;
    for (int i = 0; i < 4; ++i) xd[i] = Dual2<5>::seed(x(i), i);
    const Dual2<5> ud = Dual2<5>::seed(u(0), 4);
    const Dual2<5> c = pendulum_task_cost(xd, ud, psi_ref, params_);
    if (gx) *gx = c.g.head(4);
    if (gu) *gu = c.g.tail(1);
    if (hxx) *hxx = c.h.topLeftCorner(4, 4);
    if (huu) *huu = c.h.bottomRightCorner(1, 1);
    if (hxu) *hxu = c.h.topRightCorner(4, 1);
  }

 private:
  PendulumParams params_;
};

// General quadratic stage cost 0.5 x'Hxx x + 0.5 u'Huu u + gx'x + gu'u,
// used to build solver test problems with known closed forms.
class QuadraticStageCost final : public StageCost {
 public:
  QuadraticStageCost(Eigen::MatrixXd hxx, Eigen::MatrixXd huu, Eigen::VectorXd gx, Eigen::VectorXd gu)
      : hxx_(std::move(hxx)), huu_(std::move(huu)), gx_(std::move(gx)), gu_(std::move(gu)) {}

  int state_dim() const override { return static_cast<int>(hxx_.rows()); }
  int input_dim() const override { return static_cast<int>(huu_.rows()); }

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) const override {
    return 0.5 * x.dot(hxx_ * x) + 0.5 * u.dot(huu_ * u) + gx_.dot(x) + gu_.dot(u);
  }

  void quadratics(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double, Eigen::VectorXd* gx,
                  Eigen::VectorXd* gu, Eigen::MatrixXd* hxx, Eigen::MatrixXd* huu,
                  Eigen::MatrixXd* hxu) const override {
    if (gx) *gx = hxx_ * x + gx_;
    if (gu) *gu = huu_ * u + gu_;
    if (hxx) *hxx = hxx_;
    if (huu) *huu = huu_;
    if (hxu) hxu->setZero(state_dim(), input_dim());
  }

 private:
  Eigen::MatrixXd hxx_, huu_;
  Eigen::VectorXd gx_, gu_;
};

}  // namespace etmpc
