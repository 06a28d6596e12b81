#pragma once

#include <Eigen/Dense>

namespace savnls {

/// k-point Gauss-Legendre rule on [-1, 1]; nodes ascending.
struct GaussRule {
  int k = 0;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

inline constexpr int kMaxGaussPoints = 8;

/// Newton iteration on P_k from Chebyshev initial guesses. Supports 1 <= k <= 8.
GaussRule gauss_rule(int k);

/// Legendre polynomial P_n(x) and its derivative, by the three-term recurrence.
struct LegendreValue {
  double value;
  double derivative;
};
LegendreValue legendre(int n, double x);

/// P_n composed with the affine map of [t0, t1] onto [-1, 1].
double shifted_legendre(int n, double t, double t0, double t1);

}  // namespace savnls
