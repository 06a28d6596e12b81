#include "savnls/time_collocation.hpp"

namespace savnls {

void lagrange_basis(const Eigen::VectorXd& nodes, double s, Eigen::Ref<Eigen::VectorXd> values,
                    Eigen::Ref<Eigen::VectorXd> derivatives) {
  const Eigen::Index n = nodes.size();
  for (Eigen::Index l = 0; l < n; ++l) {
    double denom = 1.0;
    double value = 1.0;
    double deriv = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == l) continue;
      denom *= nodes(l) - nodes(m);
      deriv = deriv * (s - nodes(m)) + value;
      value *= s - nodes(m);
    }
    values(l) = value / denom;
    derivatives(l) = deriv / denom;
  }
}

CollocationScheme collocation_scheme(int k) {
  CollocationScheme scheme;
  scheme.rule = gauss_rule(k);
  scheme.slab_nodes.resize(k + 1);
  scheme.slab_nodes(0) = -1.0;
  scheme.slab_nodes.tail(k) = scheme.rule.nodes;

  scheme.diff_matrix.resize(k, k + 1);
  Eigen::VectorXd values(k + 1), derivs(k + 1);
  for (int j = 0; j < k; ++j) {
    lagrange_basis(scheme.slab_nodes, scheme.rule.nodes(j), values, derivs);
    scheme.diff_matrix.row(j) = derivs.transpose();
  }
  lagrange_basis(scheme.slab_nodes, 1.0, values, derivs);
  scheme.endpoint_weights = values;
  return scheme;
}

}  // namespace savnls
