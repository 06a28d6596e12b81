#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "savnls/quadrature.hpp"

namespace savnls {

using Complex = std::complex<double>;

enum class BoundaryCondition { Periodic, Dirichlet };

/// Uniform partition of [a, b] into M elements.
struct Mesh1D {
  double a = 0.0;
  double b = 1.0;
  int num_elements = 0;
  double h = 0.0;
  BoundaryCondition bc = BoundaryCondition::Periodic;

  double element_left(int e) const { return a + e * h; }
};

/// Continuous complex Lagrange space of degree p on a Mesh1D with equispaced
/// element nodes. Global dofs are numbered element-major, left to right; the
/// Dirichlet boundary nodes carry no dof.
class FemSpace {
 public:
  FemSpace(Mesh1D mesh, int degree);

  const Mesh1D& mesh() const { return mesh_; }
  int degree() const { return degree_; }
  int num_dofs() const { return num_dofs_; }
  int num_elements() const { return mesh_.num_elements; }
  int local_dofs() const { return degree_ + 1; }

  /// Global dof of local node l on element e, or -1 for a Dirichlet node.
  int dof(int e, int l) const { return dof_map_(e, l); }
  const Eigen::MatrixXi& dof_map() const { return dof_map_; }

  /// Reference node positions in [0, 1].
  const Eigen::VectorXd& node_coords() const { return node_coords_; }

  /// Physical coordinate of global dof i.
  double dof_coordinate(int i) const;

 private:
  Mesh1D mesh_;
  int degree_;
  int num_dofs_;
  Eigen::MatrixXi dof_map_;
  Eigen::VectorXd node_coords_;
};

using FemVector = Eigen::VectorXcd;

/// Real symmetric operator. The Lagrange basis is real, so the mass and
/// stiffness forms have real entries and act on complex vectors directly.
using SparseOperator = Eigen::SparseMatrix<double>;

FemSpace build_space(double a, double b, int num_elements, int degree, BoundaryCondition bc);

/// Values and derivatives (w.r.t. the reference coordinate in [0, 1]) of the
/// p+1 equispaced Lagrange shape functions at xi.
void shape_functions(int degree, double xi, Eigen::Ref<Eigen::VectorXd> values,
                     Eigen::Ref<Eigen::VectorXd> derivatives);

/// Shape functions tabulated at the points of an nq-point Gauss rule mapped to [0, 1].
struct ElementQuadrature {
  int num_points = 0;
  Eigen::VectorXd points;   // reference coordinates in [0, 1]
  Eigen::VectorXd weights;  // sum to 1
  Eigen::MatrixXd values;       // num_points x (p+1)
  Eigen::MatrixXd derivatives;  // num_points x (p+1), reference derivative
};
ElementQuadrature element_quadrature(const FemSpace& space, int num_points);

SparseOperator assemble_mass(const FemSpace& space);
SparseOperator assemble_stiffness(const FemSpace& space);

using ScalarField = std::function<Complex(double)>;

FemVector interpolate(const FemSpace& space, const ScalarField& fn);

struct PointValue {
  Complex value;
  Complex derivative;
};
PointValue evaluate(const FemSpace& space, const FemVector& v, double x);

/// density(u, u', x) integrated with an nq-point Gauss rule on every element.
using Density = std::function<double(Complex, Complex, double)>;
double integrate_density(const FemSpace& space, const FemVector& v, const Density& density,
                         int num_points);

struct ErrorNorms {
  double l2;
  double h1;
};
/// L2 and full H1 errors with p+3 Gauss points per element.
ErrorNorms error_norms(const FemSpace& space, const FemVector& v, const ScalarField& exact,
                       const ScalarField& exact_grad);

}  // namespace savnls
