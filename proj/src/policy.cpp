#include "policy.hpp"

#include <algorithm>
#include <cmath>

#include "cost.hpp"
#include "errors.hpp"

namespace etmpc {

Eigen::VectorXd AugmentedState::features() const {
  Eigen::VectorXd f(kFeatureDim);
  f << x_at_compute, ref_at_compute, static_cast<double>(horizon_at_compute), x_now, ref_now,
      static_cast<double>(steps_since);
  return f;
}

void PolicyGradients::setZero() {
  recompute_net.setZero();
  horizon_net.setZero();
  alpha = 0.0;
  lqr.setZero();
  log_sigma_m = 0.0;
  log_sigma_ml = 0.0;
}

double MetaPolicy::recompute_bias(double c_init) { return -std::log(1.0 / c_init - 1.0); }

double MetaPolicy::horizon_bias(double n_init, int n_min, int n_max) {
  return dist::scale_inverse(n_init, n_min, n_max);
}

MetaPolicy::MetaPolicy(const PolicyConfig& config, Rng* init_rng)
    : config_(config),
      params_{Mlp({AugmentedState::kFeatureDim, config.head_hidden, config.head_hidden, 1}),
              Mlp({AugmentedState::kFeatureDim, config.head_hidden, config.head_hidden, 1}),
              config.alpha_init,
              lqr::Weights{},
              std::log(config.sigma_init),
              std::log(config.sigma_init)},
      normalizer_(AugmentedState::kFeatureDim) {
  params_.recompute_net.init(init_rng, 1.0, 0.01);
  params_.horizon_net.init(init_rng, 1.0, 0.01);
  params_.recompute_net.shift_output_bias(Eigen::VectorXd::Constant(1, recompute_bias(config.c_init)));
  params_.horizon_net.shift_output_bias(
      Eigen::VectorXd::Constant(1, horizon_bias(config.n_init, config.n_min, config.n_max)));
  // LQR weights from the MPC-objective curvature at the steady state
  const auto model_params = PendulumParams::mpc_model();
  const PendulumTaskCost cost(model_params);
  params_.weights = lqr::init_weights(cost, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1), 0.0,
                                      kInputChangeWeight);
}

double MetaPolicy::recompute_logit(const Eigen::VectorXd& raw_features) const {
  return params_.recompute_net.forward(normalizer_.normalize(raw_features))(0);
}

double MetaPolicy::horizon_mu(const Eigen::VectorXd& raw_features) const {
  const double raw = params_.horizon_net.forward(normalizer_.normalize(raw_features))(0);
  return dist::scale_to_range(std::tanh(raw), config_.n_min, config_.n_max);
}

Action MetaPolicy::act(const AugmentedState& s, ControlSession* session, double u_prev, Rng* rng,
                       bool exploit, const ActOverrides& overrides) const {
  const Eigen::VectorXd feat = s.features();
  Action a;
  a.logit = recompute_logit(feat);
  a.mu = horizon_mu(feat);
  a.recompute = overrides.force_recompute >= 0 ? overrides.force_recompute
                                               : (rng->bernoulli(dist::sigmoid(a.logit)) ? 1 : 0);

  if (a.recompute) {
    const int n_hi =
        overrides.horizon_cap > 0 ? std::min(config_.n_max, overrides.horizon_cap) : config_.n_max;
    a.horizon = exploit ? std::clamp(static_cast<int>(std::lround(a.mu)), config_.n_min, n_hi)
                        : dist::gpd::sample(a.mu, params_.alpha, config_.n_min, n_hi, rng);
    session->recompute(s.x_now, s.ref_now, a.horizon, params_.weights, u_prev, s.steps_since);
    a.mean = session->mpc_input(0);
    a.u_sampled = exploit ? a.mean : a.mean + sigma_m() * rng->normal();
  } else {
    a.horizon = s.horizon_at_compute;
    a.mean = session->dual_mode_input(s.steps_since, s.x_now, s.ref_now);
    a.u_sampled = exploit ? a.mean : a.mean + sigma_ml() * rng->normal();
  }
  a.u_executed = std::clamp(a.u_sampled, session->config().u_min, session->config().u_max);
  a.log_prob = logprob(feat, a.recompute, a.horizon, a.u_sampled, a.mean);
  return a;
}

double MetaPolicy::logprob(const Eigen::VectorXd& raw_features, int c, int horizon_term,
                           double u_sampled, double mean) const {
  const double logit = recompute_logit(raw_features);
  const double mu = horizon_mu(raw_features);
  const double sigma = c ? sigma_m() : sigma_ml();
  return dist::bernoulli_logprob(c, logit) + dist::gpd::logpmf(horizon_term, mu, params_.alpha) +
         dist::gaussian_logprob(u_sampled, mean, sigma);
}

void MetaPolicy::logprob_gradients(const Eigen::VectorXd& raw_features, int c, int horizon_term,
                                   double u_sampled, double mean,
                                   const Eigen::VectorXd* dmean_dlqr, double coeff,
                                   PolicyGradients* grads) const {
  const Eigen::VectorXd feat = normalizer_.normalize(raw_features);

  // recompute head: d logP / d logit = c - w
  {
    Mlp::Workspace ws;
    const double logit = params_.recompute_net.forward(feat, &ws)(0);
    const double dlogit = dist::bernoulli_dlogp_dlogit(c, logit);
    params_.recompute_net.backward(ws, Eigen::VectorXd::Constant(1, coeff * dlogit),
                                   &grads->recompute_net);
  }

  // horizon head through the tanh scale map, plus the dispersion parameter
  {
    Mlp::Workspace ws;
    const double raw = params_.horizon_net.forward(feat, &ws)(0);
    const double t = std::tanh(raw);
    const double mu = dist::scale_to_range(t, config_.n_min, config_.n_max);
    if (dist::gpd::in_domain(horizon_term, mu, params_.alpha)) {
      const double dmu_draw = 0.5 * (config_.n_max - config_.n_min) * (1.0 - t * t);
      const double dlogp_dmu = dist::gpd::dlogpmf_dmu(horizon_term, mu, params_.alpha);
      params_.horizon_net.backward(ws, Eigen::VectorXd::Constant(1, coeff * dlogp_dmu * dmu_draw),
                                   &grads->horizon_net);
      grads->alpha += coeff * dist::gpd::dlogpmf_dalpha(horizon_term, mu, params_.alpha);
    }
  }

  // executed branch Gaussian
  const double sigma = c ? sigma_m() : sigma_ml();
  const double dlogp_dmean = dist::gaussian_dlogp_dmean(u_sampled, mean, sigma);
  if (c) {
    grads->log_sigma_m += coeff * dist::gaussian_dlogp_dlogsigma(u_sampled, mean, sigma);
    // theta_M frozen: the MPC-branch mean carries no trainable parameters
  } else {
    grads->log_sigma_ml += coeff * dist::gaussian_dlogp_dlogsigma(u_sampled, mean, sigma);
    if (dmean_dlqr) grads->lqr += coeff * dlogp_dmean * (*dmean_dlqr);
  }
}

AugmentedState MetaPolicy::transition_bookkeeping(const AugmentedState& s, const Action& a) {
  AugmentedState next = s;
  if (a.recompute) {
    next.x_at_compute = s.x_now;
    next.ref_at_compute = s.ref_now;
    next.horizon_at_compute = a.horizon;
    next.steps_since = 0;
  }
  return next;
}

PolicyGradients MetaPolicy::zero_gradients() const {
  PolicyGradients g;
  g.recompute_net = params_.recompute_net.zero_gradients();
  g.horizon_net = params_.horizon_net.zero_gradients();
  g.lqr = Eigen::VectorXd::Zero(params_.weights.num_params());
  return g;
}

}  // namespace etmpc
