#pragma once

#include <Eigen/Dense>
#include <array>

#include "dual.hpp"
#include "rng.hpp"

namespace etmpc {

using State = Eigen::Vector4d;  // [psi, v, phi, omega]

inline constexpr double kInputLimit = 5.0;     // -5 <= u <= 5
inline constexpr double kPositionLimit = 2.0;  // -2 <= psi <= 2

struct PendulumParams {
  double m = 0.1;      // pendulum mass
  double M = 1.1;      // total mass of cart and pendulum
  double g = 9.81;     // gravity
  double l = 0.25;     // half pendulum length
  double mu_c = 0.01;  // cart friction
  double mu_p = 0.001; // pendulum friction
  double dt = 0.04;    // control period

  static PendulumParams plant_truth() { return PendulumParams{}; }
  static PendulumParams mpc_model() {
    PendulumParams p;
    p.m = 0.2;
    p.M = 1.5;
    return p;
  }
  void validate() const;
};

struct EpisodeConfig {
  int max_steps = 150;       // T
  int reference_period = 50; // reference redraw interval
};

// Continuous-time dynamics, templated so dual numbers propagate derivatives
// through the same expressions the plant integrates.
template <typename Scalar>
std::array<Scalar, 4> pendulum_derivatives(const std::array<Scalar, 4>& x, const Scalar& u,
                                           const PendulumParams& p) {
  const Scalar& v = x[1];
  const Scalar& phi = x[2];
  const Scalar& omega = x[3];
  using std::cos;
  using std::sin;
  const Scalar s = sin(phi);
  const Scalar c = cos(phi);
  const Scalar v_dot = (p.m * p.g * s * c - (7.0 / 3.0) * (u + p.m * p.l * omega * omega * s - p.mu_c * v) -
                        p.mu_p * omega * c / p.l) /
                       (p.m * c * c - (7.0 / 3.0) * p.M);
  const Scalar omega_dot = 3.0 / (7.0 * p.l) * (p.g * s - v_dot * c - p.mu_p * omega / (p.m * p.l));
  return {v, v_dot, omega, omega_dot};
}

// One classical RK4 step of length p.dt with the input held constant.
template <typename Scalar>
std::array<Scalar, 4> pendulum_rk4(const std::array<Scalar, 4>& x, const Scalar& u,
                                   const PendulumParams& p) {
  const double dt = p.dt;
  auto axpy = [](const std::array<Scalar, 4>& a, double h, const std::array<Scalar, 4>& k) {
    std::array<Scalar, 4> r;
    for (int i = 0; i < 4; ++i) r[i] = a[i] + h * k[i];
    return r;
  };
  const auto k1 = pendulum_derivatives(x, u, p);
  const auto k2 = pendulum_derivatives(axpy(x, 0.5 * dt, k1), u, p);
  const auto k3 = pendulum_derivatives(axpy(x, 0.5 * dt, k2), u, p);
  const auto k4 = pendulum_derivatives(axpy(x, dt, k3), u, p);
  std::array<Scalar, 4> r;
  for (int i = 0; i < 4; ++i) r[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return r;
}

State derivatives(const State& x, double u, const PendulumParams& p);
State rk4_step(const State& x, double u, const PendulumParams& p);

// Kinetic energy of the cart-pole. Includes the cart/pendulum coupling term;
// together with potential_energy this is an exact first integral of the
// frictionless, unforced dynamics.
double kinetic_energy(const State& x, const PendulumParams& p);
// Potential energy, normalized to zero at the upright position (its maximum).
double potential_energy(const State& x, const PendulumParams& p);

// Stage cost l(x, u) = E_k - 10 E_p + 10 (psi - psi_ref)^2 + du * D * du,
// du = u - u_prev, D = 0.1.
inline constexpr double kInputChangeWeight = 0.1;
double stage_cost(const State& x, double u, double u_prev, double psi_ref, const PendulumParams& p);

// Templated task cost (everything except the input-change term), used by the
// OCP transcription which assembles the du coupling itself.
template <typename Scalar>
Scalar pendulum_task_cost(const std::array<Scalar, 4>& x, const Scalar& /*u*/, double psi_ref,
                          const PendulumParams& p) {
  using std::cos;
  const Scalar& psi = x[0];
  const Scalar& v = x[1];
  const Scalar& phi = x[2];
  const Scalar& omega = x[3];
  const Scalar c = cos(phi);
  const Scalar e_k = 0.5 * p.M * v * v + p.m * p.l * v * omega * c + 7.0 / 6.0 * p.m * p.l * p.l * omega * omega;
  const Scalar e_p = p.m * p.g * p.l * (c - 1.0);
  const Scalar pe = psi - psi_ref;
  return e_k - 10.0 * e_p + 10.0 * pe * pe;
}

bool position_violated(const State& x);
double clamp_input(double u);

// x0 = [0, U(-1,1), U(-pi,pi), U(-1,1)]
State sample_initial(Rng& rng);
// psi_r ~ U(-1,1)
double sample_reference(Rng& rng);

}  // namespace etmpc
