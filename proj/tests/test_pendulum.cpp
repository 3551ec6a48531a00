#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pendulum.hpp"

using namespace etmpc;

TEST_CASE("derivatives vanish at both equilibria") {
  const auto p = PendulumParams::plant_truth();
  CHECK(derivatives(State(0, 0, 0, 0), 0.0, p).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(derivatives(State(0, 0, M_PI, 0), 0.0, p).norm() < 1e-13);
}

TEST_CASE("derivatives value table") {
  // hand-evaluated continuous dynamics at x = [0.1, 0.2, 0.3, -0.1], u = 1
  const auto p = PendulumParams::plant_truth();
  const State d = derivatives(State(0.1, 0.2, 0.3, -0.1), 1.0, p);
  CHECK(d(0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(d(1) == doctest::Approx(0.8287549002994866).epsilon(1e-12));
  CHECK(d(2) == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(d(3) == doctest::Approx(3.6193944523714072).epsilon(1e-12));
}

TEST_CASE("rk4 step at equilibrium is a fixed point") {
  const auto p = PendulumParams::plant_truth();
  const State x = rk4_step(State(0, 0, 0, 0), 0.0, p);
  CHECK(x.norm() < 1e-15);
}

TEST_CASE("rk4 step against high-accuracy integration") {
  // reference from adaptive RK (DOP853, rtol 1e-12) over one 0.04 s interval
  const auto p = PendulumParams::plant_truth();
  const State x = rk4_step(State(0, 0, M_PI, 0), 5.0, p);
  const State ref(0.00378282200078484, 0.18910841168354453, 3.1480570432560313, 0.32228997683338023);
  CHECK((x - ref).lpNorm<Eigen::Infinity>() < 5e-6);  // bounded by RK4 truncation at dt = 0.04
}

TEST_CASE("rk4 observed convergence order") {
  auto p = PendulumParams::plant_truth();
  const State x0(0.3, -0.5, 2.0, 1.0);
  const double u = 3.0;
  // Richardson: single step vs two/four half steps against the finest solution
  auto integrate = [&](int substeps) {
    auto sub = p;
    sub.dt = p.dt / substeps;
    State x = x0;
    for (int i = 0; i < substeps; ++i) x = rk4_step(x, u, sub);
    return x;
  };
  const State fine = [&] {
    auto sub = p;
    sub.dt = p.dt / 256;
    State x = x0;
    for (int i = 0; i < 256; ++i) x = rk4_step(x, u, sub);
    return x;
  }();
  const double e1 = (integrate(1) - fine).lpNorm<Eigen::Infinity>();
  const double e2 = (integrate(2) - fine).lpNorm<Eigen::Infinity>();
  const double e4 = (integrate(4) - fine).lpNorm<Eigen::Infinity>();
  const double order12 = std::log2(e1 / e2);
  const double order24 = std::log2(e2 / e4);
  CHECK(order12 > 3.8);
  CHECK(order12 < 4.2);
  CHECK(order24 > 3.8);
  CHECK(order24 < 4.2);
}

TEST_CASE("frictionless energy drift stays below 1e-6 per step") {
  auto p = PendulumParams::plant_truth();
  p.mu_c = 0.0;
  p.mu_p = 0.0;
  State x(0.0, 0.5, 2.5, -1.0);
  double e_prev = kinetic_energy(x, p) + potential_energy(x, p);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    x = rk4_step(x, 0.0, p);
    const double e = kinetic_energy(x, p) + potential_energy(x, p);
    worst = std::max(worst, std::abs(e - e_prev));
    e_prev = e;
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("stage cost") {
  const auto p = PendulumParams::plant_truth();
  SUBCASE("zero at the target equilibrium") {
    CHECK(stage_cost(State(0.7, 0, 0, 0), 0.0, 0.0, 0.7, p) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("hanging at the target costs 20 m g l") {
    CHECK(stage_cost(State(0.7, 0, M_PI, 0), 0.0, 0.0, 0.7, p) ==
          doctest::Approx(20.0 * p.m * p.g * p.l).epsilon(1e-12));
  }
  SUBCASE("position term is quadratic") {
    const double base = stage_cost(State(0.5, 0, 0, 0), 0.0, 0.0, 0.0, p);
    const double twice = stage_cost(State(1.0, 0, 0, 0), 0.0, 0.0, 0.0, p);
    CHECK(twice == doctest::Approx(4.0 * base).epsilon(1e-12));
  }
  SUBCASE("input change with D = 0.1") {
    const double with = stage_cost(State(0, 0, 0, 0), 1.0, 0.0, 0.0, p);
    const double without = stage_cost(State(0, 0, 0, 0), 1.0, 1.0, 0.0, p);
    CHECK(with - without == doctest::Approx(0.1).epsilon(1e-12));
  }
}

TEST_CASE("constraints and input clamping") {
  CHECK(position_violated(State(2.001, 0, 0, 0)));
  CHECK(position_violated(State(-2.001, 0, 0, 0)));
  CHECK_FALSE(position_violated(State(2.0, 0, 0, 0)));  // boundary inclusive
  CHECK(clamp_input(7.0) == 5.0);
  CHECK(clamp_input(-7.0) == -5.0);
  CHECK(clamp_input(3.25) == 3.25);
}

TEST_CASE("initial state and reference sampling") {
  Rng a(42), b(42);
  SUBCASE("deterministic under the same seed") {
    for (int i = 0; i < 32; ++i) {
      CHECK(sample_initial(a) == sample_initial(b));
      CHECK(sample_reference(a) == sample_reference(b));
    }
  }
  SUBCASE("cart position starts at zero, ranges respected") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
      const State x = sample_initial(rng);
      CHECK(x(0) == 0.0);
      CHECK(std::abs(x(1)) <= 1.0);
      CHECK(std::abs(x(2)) <= M_PI);
      CHECK(std::abs(x(3)) <= 1.0);
    }
  }
  SUBCASE("reference mean over 10k draws") {
    Rng rng(123);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double r = sample_reference(rng);
      CHECK(std::abs(r) < 1.0);
      sum += r;
    }
    CHECK(std::abs(sum / 10000.0) < 0.03);
  }
}

TEST_CASE("parameter validation") {
  auto p = PendulumParams::plant_truth();
  p.m = -1.0;
  CHECK_THROWS(p.validate());
  p = PendulumParams::plant_truth();
  p.M = 0.05;  // below pendulum mass
  CHECK_THROWS(p.validate());
  CHECK_NOTHROW(PendulumParams::mpc_model().validate());
}
