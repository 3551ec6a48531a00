#include "pendulum.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace etmpc {

void PendulumParams::validate() const {
  if (!(m > 0.0)) throw ConfigError("pendulum mass m must be positive");
  if (!(M > m)) throw ConfigError("total mass M must exceed pendulum mass m");
  if (!(l > 0.0)) throw ConfigError("half length l must be positive");
  if (!(dt > 0.0)) throw ConfigError("step size dt must be positive");
}

namespace {
std::array<double, 4> to_array(const State& x) { return {x(0), x(1), x(2), x(3)}; }
State to_state(const std::array<double, 4>& a) { return State(a[0], a[1], a[2], a[3]); }
}  // namespace

State derivatives(const State& x, double u, const PendulumParams& p) {
  return to_state(pendulum_derivatives(to_array(x), u, p));
}

State rk4_step(const State& x, double u, const PendulumParams& p) {
  return to_state(pendulum_rk4(to_array(x), u, p));
}

double kinetic_energy(const State& x, const PendulumParams& p) {
  const double v = x(1), phi = x(2), omega = x(3);
  return 0.5 * p.M * v * v + p.m * p.l * v * omega * std::cos(phi) +
         7.0 / 6.0 * p.m * p.l * p.l * omega * omega;
}

double potential_energy(const State& x, const PendulumParams& p) {
  return p.m * p.g * p.l * (std::cos(x(2)) - 1.0);
}

double stage_cost(const State& x, double u, double u_prev, double psi_ref, const PendulumParams& p) {
  const double du = u - u_prev;
  const double pe = x(0) - psi_ref;
  return kinetic_energy(x, p) - 10.0 * potential_energy(x, p) + 10.0 * pe * pe +
         du * kInputChangeWeight * du;
}

bool position_violated(const State& x) { return std::abs(x(0)) > kPositionLimit; }

double clamp_input(double u) { return std::clamp(u, -kInputLimit, kInputLimit); }

State sample_initial(Rng& rng) {
  State x;
  x(0) = 0.0;
  x(1) = rng.uniform(-1.0, 1.0);
  x(2) = rng.uniform(-M_PI, M_PI);
  x(3) = rng.uniform(-1.0, 1.0);
  return x;
}

double sample_reference(Rng& rng) { return rng.uniform(-1.0, 1.0); }

}  // namespace etmpc
