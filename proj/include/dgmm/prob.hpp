#pragma once

#include <cmath>

#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// psi(x) by recurrence into the asymptotic region, then the standard series.
inline double digamma(double x) {
  if (x <= 0.0) throw InvalidArgument("digamma: x must be > 0");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

// Shape/rate Gamma posterior; houses the ARD precisions and the noise
// precision, and doubles as the prior hyperparameter pair.
struct GammaPosterior {
  double shape = 1.0;
  double rate = 1.0;

  GammaPosterior() = default;
  GammaPosterior(double shape_in, double rate_in)
      : shape(shape_in), rate(rate_in) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
      throw InvalidArgument("GammaPosterior: shape and rate must be > 0");
    }
  }

  double mean() const { return shape / rate; }
  double mean_log() const { return digamma(shape) - std::log(rate); }
};

// KL(q || p) between Gamma distributions in shape/rate parameterization.
inline double gamma_kl(const GammaPosterior& q, const GammaPosterior& p) {
  return (q.shape - p.shape) * digamma(q.shape) - std::lgamma(q.shape) +
         std::lgamma(p.shape) + p.shape * (std::log(q.rate) - std::log(p.rate)) +
         q.shape * (p.rate - q.rate) / q.rate;
}

// KL(N(mu, diag(var)) || N(0, I)) = -1/2 sum_k (1 + log var_k - mu_k^2 - var_k).
inline double gaussian_kl_to_standard(const Vector& mu, const Vector& var) {
  if (mu.size() != var.size()) {
    throw ShapeMismatch("gaussian_kl_to_standard: mu/var length mismatch");
  }
  double acc = 0.0;
  for (Index k = 0; k < var.size(); ++k) {
    if (!(var[k] > 0.0)) {
      throw NonPositiveVariance("gaussian_kl_to_standard: var[" +
                                std::to_string(k) + "] <= 0");
    }
    acc += 1.0 + std::log(var[k]) - mu[k] * mu[k] - var[k];
  }
  return -0.5 * acc;
}

// KL(N(mu, Sigma) || N(0, I)) with full covariance.
inline double gaussian_kl_to_standard_full(const Vector& mu,
                                           const Matrix& sigma) {
  const double k = static_cast<double>(mu.size());
  return 0.5 * (sigma.trace() + mu.squaredNorm() - k - spd_log_det(sigma));
}

}  // namespace dgmm
