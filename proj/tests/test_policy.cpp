#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "controller.hpp"
#include "distributions.hpp"
#include "policy.hpp"
#include "rng.hpp"

using namespace etmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

AugmentedState random_state(Rng* rng, int n_max) {
  AugmentedState s;
  for (int i = 0; i < 4; ++i) s.x_at_compute(i) = rng->normal();
  s.ref_at_compute = rng->uniform(-1, 1);
  s.horizon_at_compute = 1 + static_cast<int>(rng->raw() % n_max);
  for (int i = 0; i < 4; ++i) s.x_now(i) = rng->normal();
  s.ref_now = rng->uniform(-1, 1);
  s.steps_since = 1 + static_cast<int>(rng->raw() % 10);
  return s;
}

// synthetic segment with mildly stable random linearizations
PlanSegment random_segment(Rng* rng, int horizon) {
  PlanSegment seg;
  seg.horizon = horizon;
  seg.u_plan.resize(1, horizon);
  seg.x_pred.resize(4, horizon + 1);
  for (int k = 0; k < horizon; ++k) seg.u_plan(0, k) = rng->uniform(-3, 3);
  for (int k = 0; k <= horizon; ++k)
    for (int i = 0; i < 4; ++i) seg.x_pred(i, k) = rng->normal();
  for (int k = 0; k < horizon; ++k) {
    MatrixXd a(4, 4), b(4, 1);
    for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = 0.3 * rng->normal();
    a += MatrixXd::Identity(4, 4) * 0.8;
    for (int i = 0; i < 4; ++i) b(i, 0) = rng->normal();
    seg.a_seq.push_back(a);
    seg.b_seq.push_back(b);
  }
  seg.ref = rng->uniform(-1, 1);
  return seg;
}

}  // namespace

TEST_CASE("bernoulli head pieces") {
  CHECK(dist::bernoulli_logprob(1, 0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(MetaPolicy::recompute_bias(0.9) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
  CHECK(dist::sigmoid(MetaPolicy::recompute_bias(0.9)) == doctest::Approx(0.9).epsilon(1e-12));
  // score function (c - w) against finite differences of the log-pmf
  for (const int c : {0, 1}) {
    for (const double logit : {-2.0, -0.3, 0.0, 1.7}) {
      const double h = 1e-7;
      const double fd =
          (dist::bernoulli_logprob(c, logit + h) - dist::bernoulli_logprob(c, logit - h)) / (2 * h);
      CHECK(dist::bernoulli_dlogp_dlogit(c, logit) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("generalized Poisson") {
  SUBCASE("alpha = 0 reduces to the Poisson pmf") {
    CHECK(std::exp(dist::gpd::logpmf(1, 1.0, 0.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    for (int n = 0; n < 30; ++n) {
      const double poisson = n * std::log(7.0) - 7.0 - std::lgamma(n + 1.0);
      CHECK(dist::gpd::logpmf(n, 7.0, 0.0) == doctest::Approx(poisson).epsilon(1e-12));
    }
  }
  SUBCASE("out-of-domain values give -inf, not a crash") {
    CHECK(std::isinf(dist::gpd::logpmf(60, 20.0, -0.02)));  // 1 + alpha N < 0
    CHECK(dist::gpd::logpmf(60, 20.0, -0.02) < 0);
  }
  SUBCASE("moment formulas") {
    CHECK(dist::gpd::variance(20.0, 0.02) == doctest::Approx(39.2).epsilon(1e-12));
  }
  SUBCASE("normal-approximation sampler hits the GP-2 moments") {
    Rng rng(4242);
    const double mu = 20.0;
    for (const double alpha : {-0.01, 0.0, 0.02}) {
      double sum = 0.0, sq = 0.0;
      const int n = 100000;
      for (int i = 0; i < n; ++i) {
        const int v = dist::gpd::sample_raw(mu, alpha, &rng);
        sum += v;
        sq += static_cast<double>(v) * v;
      }
      const double mean = sum / n;
      const double var = sq / n - mean * mean;
      CHECK(std::abs(mean - mu) / mu < 0.01);
      CHECK(std::abs(var - dist::gpd::variance(mu, alpha)) / dist::gpd::variance(mu, alpha) < 0.05);
    }
  }
  SUBCASE("clipped samples stay in range") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
      const int v = dist::gpd::sample(35.0, 0.05, 1, 40, &rng);
      CHECK(v >= 1);
      CHECK(v <= 40);
    }
  }
  SUBCASE("pmf parameter derivatives match finite differences") {
    const double h = 1e-7;
    for (const double alpha : {-0.01, 0.0, 0.03}) {
      for (const double mu : {3.0, 17.5, 33.0}) {
        for (const int n : {1, 5, 20, 39}) {
          const double fd_mu =
              (dist::gpd::logpmf(n, mu + h, alpha) - dist::gpd::logpmf(n, mu - h, alpha)) / (2 * h);
          CHECK(dist::gpd::dlogpmf_dmu(n, mu, alpha) == doctest::Approx(fd_mu).epsilon(1e-6));
          const double fd_a =
              (dist::gpd::logpmf(n, mu, alpha + h) - dist::gpd::logpmf(n, mu, alpha - h)) / (2 * h);
          CHECK(dist::gpd::dlogpmf_dalpha(n, mu, alpha) == doctest::Approx(fd_a).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("gaussian pieces") {
  CHECK(dist::gaussian_logprob(0.3, 0.3, 0.7) ==
        doctest::Approx(-0.5 * std::log(2 * M_PI) - std::log(0.7)).epsilon(1e-12));
  CHECK(dist::gaussian_logprob(0.3, 0.3, 0.7) - dist::gaussian_logprob(1.0, 0.3, 0.7) ==
        doctest::Approx(0.5).epsilon(1e-12));
  const double h = 1e-7;
  const double fd = (dist::gaussian_logprob(0.9, 0.2 + h, 0.5) -
                     dist::gaussian_logprob(0.9, 0.2 - h, 0.5)) / (2 * h);
  CHECK(dist::gaussian_dlogp_dmean(0.9, 0.2, 0.5) == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("horizon scale map and its inverse") {
  CHECK(dist::scale_to_range(0.0, 1, 40) == doctest::Approx(20.5).epsilon(1e-12));
  CHECK(MetaPolicy::horizon_bias(20.5, 1, 40) == doctest::Approx(0.0).epsilon(1e-12));
  const double bias = MetaPolicy::horizon_bias(31.0, 1, 40);
  CHECK(dist::scale_to_range(std::tanh(bias), 1, 40) == doctest::Approx(31.0).epsilon(1e-9));
}

TEST_CASE("policy initialization pins the operating point") {
  Rng rng(100);
  PolicyConfig cfg;
  MetaPolicy policy(cfg, &rng);
  Rng srng(55);
  for (int i = 0; i < 32; ++i) {
    const auto s = random_state(&srng, cfg.n_max);
    const VectorXd f = s.features();
    // small output gains keep heads near their initialization biases
    CHECK(dist::sigmoid(policy.recompute_logit(f)) == doctest::Approx(0.9).epsilon(0.02));
    CHECK(policy.horizon_mu(f) == doctest::Approx(31.0).epsilon(0.02));
  }
  CHECK(policy.params().weights.q()(0, 0) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("mixture log-prob additivity is exact") {
  Rng rng(3);
  PolicyConfig cfg;
  MetaPolicy policy(cfg, &rng);
  Rng srng(17);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_state(&srng, cfg.n_max);
    const VectorXd f = s.features();
    const int c = i % 2;
    const int n_term = 1 + static_cast<int>(srng.raw() % 40);
    const double u = srng.normal();
    const double mean = srng.normal();
    const double expected = dist::bernoulli_logprob(c, policy.recompute_logit(f)) +
                            dist::gpd::logpmf(n_term, policy.horizon_mu(f), policy.params().alpha) +
                            dist::gaussian_logprob(u, mean, c ? policy.sigma_m() : policy.sigma_ml());
    CHECK(policy.logprob(f, c, n_term, u, mean) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("mixture mass integrates to one over the discretized action space") {
  Rng rng(9);
  PolicyConfig cfg;
  MetaPolicy policy(cfg, &rng);
  Rng srng(29);
  const auto s = random_state(&srng, cfg.n_max);
  const VectorXd f = s.features();
  const double mean_m = 0.4, mean_ml = -0.7;  // arbitrary fixed branch means
  double mass = 0.0;
  for (int c = 0; c <= 1; ++c) {
    const double mean = c ? mean_m : mean_ml;
    const double sigma = c ? policy.sigma_m() : policy.sigma_ml();
    for (int n = 0; n <= 500; ++n) {
      const double ln = policy.logprob(f, c, n, mean, mean);  // u at mean, factor out below
      if (std::isinf(ln)) continue;
      // integrate the Gaussian over u with 0.01-wide bins
      double u_mass = 0.0;
      for (double u = mean - 8 * sigma; u <= mean + 8 * sigma; u += 0.01)
        u_mass += std::exp(dist::gaussian_logprob(u, mean, sigma)) * 0.01;
      mass += std::exp(ln - dist::gaussian_logprob(mean, mean, sigma)) * u_mass;
    }
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("log-prob gradients match finite differences across every group") {
  Rng rng(1234);
  PolicyConfig cfg;
  MetaPolicy policy(cfg, &rng);
  // lightly perturb head weights so gradients are not degenerate at init
  auto perturb = [&rng](Mlp* net) {
    VectorXd p = net->flatten();
    for (int i = 0; i < p.size(); ++i) p(i) += 0.05 * rng.normal();
    net->set_flat(p);
  };
  perturb(&policy.params().recompute_net);
  perturb(&policy.params().horizon_net);
  policy.params().alpha = 0.012;

  Rng srng(71);
  const int horizon = 8;
  const PlanSegment seg = random_segment(&srng, horizon);
  // steady-state pair for the after-horizon branch
  MatrixXd a_s(4, 4), b_s(4, 1);
  a_s = seg.a_seq[0];
  b_s = seg.b_seq[0];

  for (int trial = 0; trial < 6; ++trial) {
    auto s = random_state(&srng, cfg.n_max);
    const int c = trial % 2;
    const bool after = trial >= 4;  // exercise the steady-state LQR branch too
    s.steps_since = after ? horizon + 2 : 1 + static_cast<int>(srng.raw() % (horizon - 1));
    const VectorXd f = s.features();
    const int n_term = c ? 1 + static_cast<int>(srng.raw() % 40) : s.horizon_at_compute;
    const double u = srng.normal();

    auto mean_of = [&](const lqr::Weights& w, Eigen::VectorXd* dmean) {
      if (c) return 1.234;  // MPC branch mean is parameter-free
      const auto gains = compute_segment_gains(seg, w, a_s, b_s, dmean != nullptr);
      return dual_mode_mean(seg, gains, s.steps_since, s.x_now, s.ref_now, dmean);
    };

    Eigen::VectorXd dmean;
    const double mean = mean_of(policy.params().weights, c ? nullptr : &dmean);
    auto grads = policy.zero_gradients();
    policy.logprob_gradients(f, c, n_term, u, mean, c ? nullptr : &dmean, 1.0, &grads);

    const double h = 1e-6;
    // recompute-net parameters (probe a handful)
    {
      VectorXd p = policy.params().recompute_net.flatten();
      const VectorXd g = Mlp::flatten_gradients(grads.recompute_net);
      for (int probe = 0; probe < 8; ++probe) {
        const int idx = static_cast<int>(srng.raw() % p.size());
        VectorXd pp = p, pm = p;
        pp(idx) += h;
        pm(idx) -= h;
        policy.params().recompute_net.set_flat(pp);
        const double fp = policy.logprob(f, c, n_term, u, mean);
        policy.params().recompute_net.set_flat(pm);
        const double fm = policy.logprob(f, c, n_term, u, mean);
        policy.params().recompute_net.set_flat(p);
        const double fd = (fp - fm) / (2 * h);
        CHECK(g(idx) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
    // horizon-net parameters
    {
      VectorXd p = policy.params().horizon_net.flatten();
      const VectorXd g = Mlp::flatten_gradients(grads.horizon_net);
      for (int probe = 0; probe < 8; ++probe) {
        const int idx = static_cast<int>(srng.raw() % p.size());
        VectorXd pp = p, pm = p;
        pp(idx) += h;
        pm(idx) -= h;
        policy.params().horizon_net.set_flat(pp);
        const double fp = policy.logprob(f, c, n_term, u, mean);
        policy.params().horizon_net.set_flat(pm);
        const double fm = policy.logprob(f, c, n_term, u, mean);
        policy.params().horizon_net.set_flat(p);
        const double fd = (fp - fm) / (2 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(g(idx))});
        CHECK(std::abs(g(idx) - fd) / scale < 1e-5);
      }
    }
    // alpha
    {
      const double a0 = policy.params().alpha;
      policy.params().alpha = a0 + h;
      const double fp = policy.logprob(f, c, n_term, u, mean);
      policy.params().alpha = a0 - h;
      const double fm = policy.logprob(f, c, n_term, u, mean);
      policy.params().alpha = a0;
      CHECK(grads.alpha == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
    }
    // log-sigmas
    {
      auto& ls = c ? policy.params().log_sigma_m : policy.params().log_sigma_ml;
      const double v0 = ls;
      ls = v0 + h;
      const double fp = policy.logprob(f, c, n_term, u, mean);
      ls = v0 - h;
      const double fm = policy.logprob(f, c, n_term, u, mean);
      ls = v0;
      const double expect = (fp - fm) / (2 * h);
      CHECK((c ? grads.log_sigma_m : grads.log_sigma_ml) == doctest::Approx(expect).epsilon(1e-5));
    }
    // LQR weights through the full Riccati chain (c = 0 only)
    if (!c) {
      const VectorXd p = policy.params().weights.params();
      for (int idx = 0; idx < p.size(); ++idx) {
        lqr::Weights wp = policy.params().weights, wm = policy.params().weights;
        VectorXd pp = p, pm = p;
        pp(idx) += h;
        pm(idx) -= h;
        wp.set_params(pp);
        wm.set_params(pm);
        const double fp = policy.logprob(f, c, n_term, u, mean_of(wp, nullptr));
        const double fm = policy.logprob(f, c, n_term, u, mean_of(wm, nullptr));
        const double fd = (fp - fm) / (2 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grads.lqr(idx))});
        CHECK(std::abs(grads.lqr(idx) - fd) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("bookkeeping transition") {
  AugmentedState s;
  s.x_at_compute = State(1, 2, 3, 4);
  s.ref_at_compute = 0.5;
  s.horizon_at_compute = 12;
  s.x_now = State(5, 6, 7, 8);
  s.ref_now = -0.25;
  s.steps_since = 4;

  SUBCASE("recompute rebases the anchor") {
    Action a;
    a.recompute = 1;
    a.horizon = 23;
    const auto next = MetaPolicy::transition_bookkeeping(s, a);
    CHECK(next.x_at_compute == s.x_now);
    CHECK(next.ref_at_compute == s.ref_now);
    CHECK(next.horizon_at_compute == 23);
    CHECK(next.steps_since == 0);
  }
  SUBCASE("skip keeps the anchor") {
    Action a;
    a.recompute = 0;
    const auto next = MetaPolicy::transition_bookkeeping(s, a);
    CHECK(next.x_at_compute == s.x_at_compute);
    CHECK(next.horizon_at_compute == 12);
    CHECK(next.steps_since == 4);  // the plant step advances it afterwards
  }
  SUBCASE("bookkeeping is deterministic") {
    Action a;
    a.recompute = 1;
    a.horizon = 30;
    const auto n1 = MetaPolicy::transition_bookkeeping(s, a);
    const auto n2 = MetaPolicy::transition_bookkeeping(s, a);
    CHECK(n1.features() == n2.features());
  }
}

TEST_CASE("feature layout") {
  AugmentedState s;
  s.x_at_compute = State(1, 2, 3, 4);
  s.ref_at_compute = 5;
  s.horizon_at_compute = 6;
  s.x_now = State(7, 8, 9, 10);
  s.ref_now = 11;
  s.steps_since = 12;
  const VectorXd f = s.features();
  REQUIRE(f.size() == AugmentedState::kFeatureDim);
  for (int i = 0; i < 12; ++i) CHECK(f(i) == i + 1);
}
