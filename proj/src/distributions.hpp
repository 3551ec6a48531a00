#pragma once

#include <cmath>
#include <limits>

#include "rng.hpp"

namespace etmpc::dist {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow on either tail
inline double log_sigmoid(double x) {
  return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
}

inline double bernoulli_logprob(int c, double logit) {
  return c ? log_sigmoid(logit) : log_sigmoid(-logit);
}

// d log P(c) / d logit = c - sigmoid(logit)
inline double bernoulli_dlogp_dlogit(int c, double logit) {
  return static_cast<double>(c) - sigmoid(logit);
}

// Generalized Poisson, GP-2 parameterization: rate mu > 0, dispersion alpha.
// E(N) = mu, V(N) = mu (1 + alpha mu)^2. alpha = 0 recovers the Poisson pmf.
namespace gpd {

inline bool in_domain(int n, double mu, double alpha) {
  return n >= 0 && mu > 0.0 && 1.0 + alpha * mu > 0.0 && 1.0 + alpha * n > 0.0;
}

inline double logpmf(int n, double mu, double alpha) {
  if (!in_domain(n, mu, alpha)) return -std::numeric_limits<double>::infinity();
  const double denom = 1.0 + alpha * mu;
  return n * std::log(mu / denom) + (n - 1) * std::log1p(alpha * n) -
         mu * (1.0 + alpha * n) / denom - std::lgamma(n + 1.0);
}

inline double dlogpmf_dmu(int n, double mu, double alpha) {
  const double denom = 1.0 + alpha * mu;
  return n / mu - n * alpha / denom - (1.0 + alpha * n) / (denom * denom);
}

inline double dlogpmf_dalpha(int n, double mu, double alpha) {
  const double denom = 1.0 + alpha * mu;
  return -n * mu / denom + static_cast<double>(n) * (n - 1) / (1.0 + alpha * n) -
         mu * (n * denom - (1.0 + alpha * n) * mu) / (denom * denom);
}

inline double variance(double mu, double alpha) {
  const double f = 1.0 + alpha * mu;
  return mu * f * f;
}

// Normal-approximation sampler: floor(mu + sqrt(V) zeta + 0.5), zeta ~ N(0,1).
inline int sample_raw(double mu, double alpha, Rng* rng) {
  const double draw = mu + std::sqrt(variance(mu, alpha)) * rng->normal() + 0.5;
  return static_cast<int>(std::floor(draw));
}

inline int sample(double mu, double alpha, int n_min, int n_max, Rng* rng) {
  const int raw = sample_raw(mu, alpha, rng);
  return raw < n_min ? n_min : (raw > n_max ? n_max : raw);
}

}  // namespace gpd

inline double gaussian_logprob(double u, double mean, double sigma) {
  const double z = (u - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

inline double gaussian_dlogp_dmean(double u, double mean, double sigma) {
  return (u - mean) / (sigma * sigma);
}

// parameterized by log sigma: d log P / d log sigma = z^2 - 1
inline double gaussian_dlogp_dlogsigma(double u, double mean, double sigma) {
  const double z = (u - mean) / sigma;
  return z * z - 1.0;
}

// linear [-1, 1] -> [lo, hi]
inline double scale_to_range(double t, double lo, double hi) {
  return lo + 0.5 * (t + 1.0) * (hi - lo);
}

inline double scale_inverse(double v, double lo, double hi) {
  return std::atanh(2.0 * (v - lo) / (hi - lo) - 1.0);
}

}  // namespace etmpc::dist
