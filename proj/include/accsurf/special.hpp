#pragma once

#include <cmath>
#include <stdexcept>

namespace accsurf {

// Numerically stable scalar helpers shared by the autodiff primitives and
// closed-form likelihoods.

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Inverse of softplus; softplus(softplus_inv(y)) == y for y > 0.
inline double softplus_inv(double y) {
  if (y > 35.0) return y;
  return std::log(std::expm1(y));
}

// Digamma via the recurrence psi(x) = psi(x+1) - 1/x pushed into the
// asymptotic range, then a Bernoulli-number tail. Absolute error is below
// 1e-12 for x >= 0.5.
inline double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: x must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^2n)
  double tail = inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                inv2 * (1.0 / 252.0 -
                inv2 * (1.0 / 240.0 -
                inv2 * (1.0 / 132.0 -
                inv2 * (691.0 / 32760.0 -
                inv2 * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 * inv - tail;
}

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace accsurf
