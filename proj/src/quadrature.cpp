#include "savnls/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "savnls/errors.hpp"

namespace savnls {

LegendreValue legendre(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p_prev = 1.0;
  double p = x;
  double dp_prev = 0.0;
  double dp = 1.0;
  for (int m = 2; m <= n; ++m) {
    const double p_next = ((2.0 * m - 1.0) * x * p - (m - 1.0) * p_prev) / m;
    // P'_m = P'_{m-2} + (2m-1) P_{m-1}; stable at the endpoints
    const double dp_next = dp_prev + (2.0 * m - 1.0) * p;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
  }
  return {p, dp};
}

double shifted_legendre(int n, double t, double t0, double t1) {
  const double tau = t1 - t0;
  if (!(tau > 0.0)) throw ConfigError("shifted_legendre: degenerate slab, tau = " + std::to_string(tau));
  return legendre(n, (2.0 * t - t0 - t1) / tau).value;
}

GaussRule gauss_rule(int k) {
  if (k < 1 || k > kMaxGaussPoints) {
    throw ConfigError("gauss_rule: k = " + std::to_string(k) + " outside [1, " +
                      std::to_string(kMaxGaussPoints) + "]");
  }
  GaussRule rule;
  rule.k = k;
  rule.nodes.resize(k);
  rule.weights.resize(k);
  const int half = (k + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // root i counted from the right end
    double x = std::cos(std::numbers::pi * (i + 0.75) / (k + 0.5));
    for (int it = 0; it < 50; ++it) {
      const auto [p, dp] = legendre(k, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) <= 1e-15) break;
    }
    const double dp = legendre(k, x).derivative;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(k - 1 - i) = x;
    rule.nodes(i) = -x;
    rule.weights(k - 1 - i) = w;
    rule.weights(i) = w;
  }
  if (k % 2 == 1) rule.nodes(k / 2) = 0.0;
  return rule;
}

}  // namespace savnls
