#pragma once

#include <complex>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "savnls/quadrature.hpp"

namespace savnls {

/// Lagrange basis on the reference slab [-1, 1] through {-1} and the k Gauss
/// nodes. Derivatives are with respect to the reference coordinate; callers
/// multiply by 2/tau.
struct CollocationScheme {
  GaussRule rule;
  Eigen::VectorXd slab_nodes;      // k+1 nodes: -1, c_1, ..., c_k
  Eigen::MatrixXd diff_matrix;     // k x (k+1): derivative at c_j from nodal values
  Eigen::VectorXd endpoint_weights;  // k+1: value at +1 from nodal values

  int k() const { return rule.k; }
};

CollocationScheme collocation_scheme(int k);

/// Values and reference derivatives of the Lagrange basis through `nodes` at s.
void lagrange_basis(const Eigen::VectorXd& nodes, double s, Eigen::Ref<Eigen::VectorXd> values,
                    Eigen::Ref<Eigen::VectorXd> derivatives);

/// Polynomial of degree <= k in time on [t0, t0 + tau], stored by its values at
/// the k+1 collocation nodes. Each column is one component (a spatial dof, or a
/// single scalar).
template <typename Scalar>
struct SlabPolynomial {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  double t0 = 0.0;
  double tau = 1.0;
  Eigen::VectorXd nodes;  // reference nodes, k+1
  Matrix values;          // (k+1) x components

  int k() const { return static_cast<int>(nodes.size()) - 1; }
  double reference(double t) const { return (2.0 * (t - t0)) / tau - 1.0; }
  double time_at(double s) const { return t0 + (s + 1.0) * 0.5 * tau; }

  RowVector operator()(double t) const {
    Eigen::VectorXd l(nodes.size()), dl(nodes.size());
    lagrange_basis(nodes, reference(t), l, dl);
    return l.cast<Scalar>().transpose() * values;
  }

  RowVector derivative(double t) const {
    Eigen::VectorXd l(nodes.size()), dl(nodes.size());
    lagrange_basis(nodes, reference(t), l, dl);
    return (2.0 / tau) * dl.cast<Scalar>().transpose() * values;
  }
};

/// Samples fn at the collocation nodes of `scheme` on [t0, t0 + tau].
template <typename Scalar>
SlabPolynomial<Scalar> sample_slab(const CollocationScheme& scheme, double t0, double tau,
                                   const std::function<Scalar(double)>& fn) {
  SlabPolynomial<Scalar> poly;
  poly.t0 = t0;
  poly.tau = tau;
  poly.nodes = scheme.slab_nodes;
  poly.values.resize(scheme.k() + 1, 1);
  for (int m = 0; m <= scheme.k(); ++m) poly.values(m, 0) = fn(poly.time_at(poly.nodes(m)));
  return poly;
}

/// L2 projection onto degree k-1 in time: removes the L_k component.
template <typename Scalar>
SlabPolynomial<Scalar> temporal_l2_project(const SlabPolynomial<Scalar>& u) {
  const int k = u.k();
  const GaussRule rule = gauss_rule(k + 1);
  Eigen::VectorXd l(k + 1), dl(k + 1);
  // Legendre coefficient of degree k: (2k+1)/2 * int_{-1}^{1} u P_k
  typename SlabPolynomial<Scalar>::RowVector coeff =
      SlabPolynomial<Scalar>::RowVector::Zero(u.values.cols());
  for (int q = 0; q <= k; ++q) {
    lagrange_basis(u.nodes, rule.nodes(q), l, dl);
    const double weight = rule.weights(q) * legendre(k, rule.nodes(q)).value;
    coeff += weight * (l.cast<Scalar>().transpose() * u.values);
  }
  coeff *= 0.5 * (2 * k + 1);

  SlabPolynomial<Scalar> out = u;
  for (int m = 0; m <= k; ++m) out.values.row(m) -= legendre(k, u.nodes(m)).value * coeff;
  return out;
}

/// Initial value plus the L2 projection of the derivative onto degree k-1.
/// Without an analytic derivative, a central difference with step 1e-7 is used.
template <typename Scalar>
SlabPolynomial<Scalar> temporal_ritz_project(
    const std::function<Scalar(double)>& fn, int k, double t0, double t1,
    const std::optional<std::function<Scalar(double)>>& derivative = std::nullopt) {
  const CollocationScheme scheme = collocation_scheme(k);
  const double tau = t1 - t0;
  const auto dfn = [&](double t) -> Scalar {
    if (derivative) return (*derivative)(t);
    constexpr double step = 1e-7;
    return (fn(t + step) - fn(t - step)) / (2.0 * step);
  };

  const GaussRule inner = gauss_rule(k + 2);
  // coefficients of d/dt u in the shifted Legendre basis, j < k
  std::vector<Scalar> coeff(k, Scalar(0));
  for (int q = 0; q < inner.k; ++q) {
    const double s = inner.nodes(q);
    const Scalar du = dfn(t0 + (s + 1.0) * 0.5 * tau);
    for (int j = 0; j < k; ++j) coeff[j] += inner.weights(q) * legendre(j, s).value * du;
  }
  // int L_j du / int L_j^2 = (2j+1)/2 * int_{-1}^{1} P_j (du) ds  (tau factors cancel)
  for (int j = 0; j < k; ++j) coeff[j] *= 0.5 * (2 * j + 1);

  SlabPolynomial<Scalar> out;
  out.t0 = t0;
  out.tau = tau;
  out.nodes = scheme.slab_nodes;
  out.values.resize(k + 1, 1);
  const Scalar initial = fn(t0);
  for (int m = 0; m <= k; ++m) {
    const double s = out.nodes(m);
    Scalar value = initial;
    for (int j = 0; j < k; ++j) {
      // int_{t0}^{t} L_j = tau/2 * int_{-1}^{s} P_j
      const double antiderivative =
          j == 0 ? s + 1.0
                 : (legendre(j + 1, s).value - legendre(j - 1, s).value) / (2.0 * j + 1.0);
      value += coeff[j] * (0.5 * tau * antiderivative);
    }
    out.values(m, 0) = value;
  }
  return out;
}

}  // namespace savnls
