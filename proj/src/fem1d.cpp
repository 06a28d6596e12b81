#include "savnls/fem1d.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "savnls/errors.hpp"

namespace savnls {

namespace {

constexpr int kMaxDegree = 4;

Eigen::VectorXd equispaced_nodes(int degree) {
  return Eigen::VectorXd::LinSpaced(degree + 1, 0.0, 1.0);
}

// Element-local dof values, with zeros in Dirichlet slots.
Eigen::VectorXcd gather(const FemSpace& space, const FemVector& v, int e) {
  Eigen::VectorXcd local(space.local_dofs());
  for (int l = 0; l < space.local_dofs(); ++l) {
    const int g = space.dof(e, l);
    local(l) = g < 0 ? Complex(0.0) : v(g);
  }
  return local;
}

template <typename LocalFn>
SparseOperator assemble(const FemSpace& space, LocalFn&& local_entry) {
  const int n = space.local_dofs();
  const ElementQuadrature quad = element_quadrature(space, space.degree() + 1);
  Eigen::MatrixXd local(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) local(a, b) = local_entry(quad, a, b);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(space.num_elements()) * n * n);
  for (int e = 0; e < space.num_elements(); ++e) {
    for (int a = 0; a < n; ++a) {
      const int ga = space.dof(e, a);
      if (ga < 0) continue;
      for (int b = 0; b < n; ++b) {
        const int gb = space.dof(e, b);
        if (gb < 0) continue;
        triplets.emplace_back(ga, gb, local(a, b));
      }
    }
  }
  SparseOperator op(space.num_dofs(), space.num_dofs());
  op.setFromTriplets(triplets.begin(), triplets.end());
  op.makeCompressed();
  return op;
}

}  // namespace

FemSpace::FemSpace(Mesh1D mesh, int degree) : mesh_(mesh), degree_(degree) {
  if (!(mesh_.a < mesh_.b)) {
    std::ostringstream os;
    os << "FemSpace: domain endpoints a = " << mesh_.a << ", b = " << mesh_.b << " require a < b";
    throw ConfigError(os.str());
  }
  if (mesh_.num_elements < 2)
    throw ConfigError("FemSpace: num_elements = " + std::to_string(mesh_.num_elements) + " < 2");
  if (degree_ < 1 || degree_ > kMaxDegree)
    throw ConfigError("FemSpace: degree = " + std::to_string(degree_) + " outside [1, 4]");

  const int m = mesh_.num_elements;
  mesh_.h = (mesh_.b - mesh_.a) / m;
  node_coords_ = equispaced_nodes(degree_);

  const int full = degree_ * m;  // global node count before identification, minus one
  num_dofs_ = mesh_.bc == BoundaryCondition::Periodic ? full : full - 1;
  dof_map_.resize(m, degree_ + 1);
  for (int e = 0; e < m; ++e) {
    for (int l = 0; l <= degree_; ++l) {
      const int g = e * degree_ + l;
      if (mesh_.bc == BoundaryCondition::Periodic) {
        dof_map_(e, l) = g % full;
      } else {
        dof_map_(e, l) = (g == 0 || g == full) ? -1 : g - 1;
      }
    }
  }
}

double FemSpace::dof_coordinate(int i) const {
  const int g = mesh_.bc == BoundaryCondition::Periodic ? i : i + 1;
  return mesh_.a + g * (mesh_.h / degree_);
}

FemSpace build_space(double a, double b, int num_elements, int degree, BoundaryCondition bc) {
  Mesh1D mesh;
  mesh.a = a;
  mesh.b = b;
  mesh.num_elements = num_elements;
  mesh.bc = bc;
  return FemSpace(mesh, degree);
}

void shape_functions(int degree, double xi, Eigen::Ref<Eigen::VectorXd> values,
                     Eigen::Ref<Eigen::VectorXd> derivatives) {
  const int n = degree + 1;
  const Eigen::VectorXd nodes = equispaced_nodes(degree);
  for (int l = 0; l < n; ++l) {
    double denom = 1.0;
    double value = 1.0;
    double deriv = 0.0;
    for (int m = 0; m < n; ++m) {
      if (m == l) continue;
      denom *= nodes(l) - nodes(m);
      // product rule: d/dxi of prod (xi - x_m)
      deriv = deriv * (xi - nodes(m)) + value;
      value *= xi - nodes(m);
    }
    values(l) = value / denom;
    derivatives(l) = deriv / denom;
  }
}

ElementQuadrature element_quadrature(const FemSpace& space, int num_points) {
  if (num_points < 1)
    throw ConfigError("element_quadrature: num_points = " + std::to_string(num_points) + " < 1");
  const GaussRule rule = gauss_rule(num_points);
  ElementQuadrature quad;
  quad.num_points = num_points;
  quad.points = (rule.nodes.array() + 1.0) * 0.5;
  quad.weights = rule.weights * 0.5;
  const int n = space.local_dofs();
  quad.values.resize(num_points, n);
  quad.derivatives.resize(num_points, n);
  Eigen::VectorXd values(n), derivs(n);
  for (int q = 0; q < num_points; ++q) {
    shape_functions(space.degree(), quad.points(q), values, derivs);
    quad.values.row(q) = values.transpose();
    quad.derivatives.row(q) = derivs.transpose();
  }
  return quad;
}

SparseOperator assemble_mass(const FemSpace& space) {
  const double h = space.mesh().h;
  return assemble(space, [h](const ElementQuadrature& quad, int a, int b) {
    return h * (quad.weights.array() * quad.values.col(a).array() * quad.values.col(b).array()).sum();
  });
}

SparseOperator assemble_stiffness(const FemSpace& space) {
  const double h = space.mesh().h;
  return assemble(space, [h](const ElementQuadrature& quad, int a, int b) {
    return (quad.weights.array() * quad.derivatives.col(a).array() *
            quad.derivatives.col(b).array())
               .sum() /
           h;
  });
}

FemVector interpolate(const FemSpace& space, const ScalarField& fn) {
  FemVector v(space.num_dofs());
  for (int i = 0; i < space.num_dofs(); ++i) {
    const double x = space.dof_coordinate(i);
    const Complex value = fn(x);
    if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
      std::ostringstream os;
      os << "interpolate: non-finite sample at x = " << x;
      throw InputError(os.str());
    }
    v(i) = value;
  }
  return v;
}

PointValue evaluate(const FemSpace& space, const FemVector& v, double x) {
  const Mesh1D& mesh = space.mesh();
  if (!(x >= mesh.a && x <= mesh.b)) {
    std::ostringstream os;
    os << "evaluate: x = " << x << " outside [" << mesh.a << ", " << mesh.b << "]";
    throw InputError(os.str());
  }
  int e = static_cast<int>(std::floor((x - mesh.a) / mesh.h));
  e = std::clamp(e, 0, mesh.num_elements - 1);
  const double xi = (x - mesh.element_left(e)) / mesh.h;
  const int n = space.local_dofs();
  Eigen::VectorXd values(n), derivs(n);
  shape_functions(space.degree(), xi, values, derivs);
  const Eigen::VectorXcd local = gather(space, v, e);
  return {values.cast<Complex>().dot(local), derivs.cast<Complex>().dot(local) / mesh.h};
}

double integrate_density(const FemSpace& space, const FemVector& v, const Density& density,
                         int num_points) {
  const ElementQuadrature quad = element_quadrature(space, num_points);
  const Mesh1D& mesh = space.mesh();
  double total = 0.0;
  for (int e = 0; e < mesh.num_elements; ++e) {
    const Eigen::VectorXcd local = gather(space, v, e);
    const Eigen::VectorXcd u = quad.values.cast<Complex>() * local;
    const Eigen::VectorXcd du = quad.derivatives.cast<Complex>() * local / mesh.h;
    double element_sum = 0.0;
    for (int q = 0; q < quad.num_points; ++q) {
      const double x = mesh.element_left(e) + quad.points(q) * mesh.h;
      element_sum += quad.weights(q) * density(u(q), du(q), x);
    }
    total += element_sum * mesh.h;
  }
  return total;
}

ErrorNorms error_norms(const FemSpace& space, const FemVector& v, const ScalarField& exact,
                       const ScalarField& exact_grad) {
  const ElementQuadrature quad = element_quadrature(space, space.degree() + 3);
  const Mesh1D& mesh = space.mesh();
  double l2 = 0.0;
  double grad = 0.0;
  for (int e = 0; e < mesh.num_elements; ++e) {
    const Eigen::VectorXcd local = gather(space, v, e);
    const Eigen::VectorXcd u = quad.values.cast<Complex>() * local;
    const Eigen::VectorXcd du = quad.derivatives.cast<Complex>() * local / mesh.h;
    for (int q = 0; q < quad.num_points; ++q) {
      const double x = mesh.element_left(e) + quad.points(q) * mesh.h;
      const double w = quad.weights(q) * mesh.h;
      l2 += w * std::norm(u(q) - exact(x));
      grad += w * std::norm(du(q) - exact_grad(x));
    }
  }
  return {std::sqrt(l2), std::sqrt(l2 + grad)};
}

}  // namespace savnls
