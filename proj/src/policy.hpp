#pragma once

#include <Eigen/Dense>
#include <memory>

#include "controller.hpp"
#include "distributions.hpp"
#include "mlp.hpp"
#include "normalizer.hpp"
#include "pendulum.hpp"
#include "riccati.hpp"
#include "rng.hpp"

namespace etmpc {

// Markovian control state: plant/reference/horizon at the last MPC
// computation plus the current measurements and the elapsed step count.
struct AugmentedState {
  State x_at_compute = State::Zero();
  double ref_at_compute = 0.0;
  int horizon_at_compute = 0;
  State x_now = State::Zero();
  double ref_now = 0.0;
  int steps_since = 0;

  static constexpr int kFeatureDim = 12;
  Eigen::VectorXd features() const;
};

struct PolicyConfig {
  int n_min = 1;
  int n_max = 40;
  double c_init = 0.9;    // initial probability of recomputing
  double n_init = 31.0;   // initial horizon operating point
  double sigma_init = 0.5;
  double alpha_init = 0.0;
  int head_hidden = 64;   // two hidden layers per head
  int value_hidden = 128;
};

struct PolicyParams {
  Mlp recompute_net;
  Mlp horizon_net;
  double alpha = 0.0;       // GPD dispersion, input-independent
  lqr::Weights weights;     // theta_L, Cholesky factors of (Q, R)
  double log_sigma_m = 0.0;
  double log_sigma_ml = 0.0;
};

// One decision of the mixture policy.
struct Action {
  int recompute = 0;        // c
  int horizon = 0;          // horizon entering the log-prob (fresh draw or stored N_i)
  double u_sampled = 0.0;   // raw Gaussian draw of the executed branch
  double u_executed = 0.0;  // clamped to the input bounds
  double mean = 0.0;        // branch mean at decision time
  double log_prob = 0.0;
  // head outputs at decision time, for diagnostics
  double logit = 0.0;
  double mu = 0.0;
};

struct PolicyGradients {
  Mlp::Gradients recompute_net;
  Mlp::Gradients horizon_net;
  double alpha = 0.0;
  Eigen::VectorXd lqr;  // per Cholesky parameter
  double log_sigma_m = 0.0;
  double log_sigma_ml = 0.0;
  void setZero();
};

// ablation hooks: cap the selected horizon, or bypass the recompute draw
struct ActOverrides {
  int horizon_cap = 0;       // 0 disables
  int force_recompute = -1;  // -1 keeps the Bernoulli draw
};

class MetaPolicy {
 public:
  MetaPolicy(const PolicyConfig& config, Rng* init_rng);

  // bias values that pin the initial operating point
  static double recompute_bias(double c_init);
  static double horizon_bias(double n_init, int n_min, int n_max);

  double recompute_logit(const Eigen::VectorXd& raw_features) const;
  // rate parameter after tanh scaling into [n_min, n_max]
  double horizon_mu(const Eigen::VectorXd& raw_features) const;

  double sigma_m() const { return std::exp(params_.log_sigma_m); }
  double sigma_ml() const { return std::exp(params_.log_sigma_ml); }

  // Sample a decision at state s, recomputing the OCP through the session on
  // the c = 1 branch. In exploit mode only the recompute draw stays
  // stochastic; horizon and inputs use the distribution modes.
  Action act(const AugmentedState& s, ControlSession* session, double u_prev, Rng* rng,
             bool exploit, const ActOverrides& overrides = {}) const;

  // Mixture log-probability of a recorded decision under current parameters.
  // mean must be the branch mean re-derived under current parameters.
  double logprob(const Eigen::VectorXd& raw_features, int c, int horizon_term, double u_sampled,
                 double mean) const;

  // Accumulates coeff * d(logprob)/d(parameters) into grads. For c = 0
  // decisions dmean_dlqr carries d(mean)/d(theta_L); the MPC branch mean is
  // parameter-free (theta_M frozen).
  void logprob_gradients(const Eigen::VectorXd& raw_features, int c, int horizon_term,
                         double u_sampled, double mean, const Eigen::VectorXd* dmean_dlqr,
                         double coeff, PolicyGradients* grads) const;

  // Deterministic bookkeeping after a decision (i <- t on recompute); plant
  // fields are refreshed by the environment afterwards.
  static AugmentedState transition_bookkeeping(const AugmentedState& s, const Action& a);

  PolicyGradients zero_gradients() const;

  PolicyParams& params() { return params_; }
  const PolicyParams& params() const { return params_; }
  FeatureNormalizer& normalizer() { return normalizer_; }
  const FeatureNormalizer& normalizer() const { return normalizer_; }
  const PolicyConfig& config() const { return config_; }

  // clip alpha to its admissible region (applied after every update)
  void clip_alpha() { params_.alpha = std::max(params_.alpha, -1.0 / config_.n_max); }

 private:
  PolicyConfig config_;
  PolicyParams params_;
  FeatureNormalizer normalizer_;
};

}  // namespace etmpc
