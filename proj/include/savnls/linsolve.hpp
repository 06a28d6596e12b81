#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "savnls/errors.hpp"

namespace savnls {

/// Sparse LU with partial pivoting, reusable across right-hand sides. The
/// column ordering from the first factorization is kept by `refactor`, which
/// requires an unchanged sparsity pattern.
template <typename Scalar>
class Factorization {
 public:
  using SparseMatrix = Eigen::SparseMatrix<Scalar>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Factorization() = default;
  explicit Factorization(const SparseMatrix& K) { refactor(K); }

  void refactor(const SparseMatrix& K) {
    if (K.rows() != K.cols()) throw SolverError("factor: matrix is not square");
    if (!analyzed_ || K.rows() != rows_ || K.nonZeros() != nonzeros_) {
      lu_.analyzePattern(K);
      analyzed_ = true;
      rows_ = K.rows();
      nonzeros_ = K.nonZeros();
    }
    lu_.factorize(K);
    if (lu_.info() != Eigen::Success) {
      // the message carries the index of the failing pivot column
      throw SolverError("factor: singular matrix: " + lu_.lastErrorMessage());
    }
  }

  template <typename Rhs>
  Matrix solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return lu_.solve(rhs);
  }

 private:
  // SparseLU::solve is logically const but not declared so
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  bool analyzed_ = false;
  Eigen::Index rows_ = 0;
  Eigen::Index nonzeros_ = 0;
};

template <typename Scalar>
Factorization<Scalar> factor(const Eigen::SparseMatrix<Scalar>& K) {
  return Factorization<Scalar>(K);
}

/// [K B; C D] [x; y] = [f; g] with a sparse main block and a few dense border
/// rows and columns.
template <typename Scalar>
struct BorderedSystem {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Eigen::SparseMatrix<Scalar> K;
  Matrix B;
  Matrix C;
  Matrix D;
  Vector rhs_main;
  Vector rhs_border;
};

template <typename Scalar>
struct BorderedSolution {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x_main;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x_border;
  /// Normwise backward error ||r|| / (||A|| ||x|| + ||b||) in the infinity norm.
  double residual = 0.0;
};

/// Full residual of the bordered system at (x, y), returned as (r_main, r_border).
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
bordered_residual(const BorderedSystem<Scalar>& sys,
                  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r_main = sys.rhs_main - sys.K * x;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r_border = sys.rhs_border;
  if (y.size() > 0) {
    r_main.noalias() -= sys.B * y;
    r_border.noalias() -= sys.C * x + sys.D * y;
  }
  return {std::move(r_main), std::move(r_border)};
}

namespace detail {

template <typename Scalar>
double bordered_norm(const BorderedSystem<Scalar>& sys) {
  // infinity norm of the full matrix
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(sys.K.rows());
  for (Eigen::Index c = 0; c < sys.K.outerSize(); ++c)
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(sys.K, c); it; ++it)
      row_sums(it.row()) += std::abs(it.value());
  double norm = 0.0;
  for (Eigen::Index i = 0; i < row_sums.size(); ++i) {
    const double border = sys.B.cols() > 0 ? sys.B.row(i).cwiseAbs().sum() : 0.0;
    norm = std::max(norm, row_sums(i) + border);
  }
  for (Eigen::Index i = 0; i < sys.C.rows(); ++i)
    norm = std::max(norm, sys.C.row(i).cwiseAbs().sum() + sys.D.row(i).cwiseAbs().sum());
  return norm;
}

}  // namespace detail

/// Block elimination through the Schur complement S = D - C K^{-1} B, with up
/// to two steps of iterative refinement when the backward error exceeds
/// `tolerance`.
template <typename Scalar>
BorderedSolution<Scalar> solve_bordered(const BorderedSystem<Scalar>& sys,
                                        Factorization<Scalar>& lu, double tolerance = 1e-11) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = sys.K.rows();
  const Eigen::Index m = sys.D.rows();
  if (sys.K.cols() != n || sys.rhs_main.size() != n || sys.B.rows() != (m > 0 ? n : sys.B.rows()) ||
      sys.B.cols() != m || sys.C.rows() != m || (m > 0 && sys.C.cols() != n) || sys.D.cols() != m ||
      sys.rhs_border.size() != m) {
    throw SolverError("solve_bordered: inconsistent block dimensions");
  }

  lu.refactor(sys.K);
  Matrix W;
  Eigen::FullPivLU<Matrix> schur;
  if (m > 0) {
    W = lu.solve(sys.B);
    schur.compute(sys.D - sys.C * W);
    if (!schur.isInvertible()) throw SolverError("solve_bordered: singular Schur complement");
  }

  const auto eliminate = [&](const Vector& f, const Vector& g) {
    Vector y = lu.solve(f);
    Vector x_border;
    if (m > 0) {
      x_border = schur.solve(g - sys.C * y);
      y.noalias() -= W * x_border;
    }
    return std::pair<Vector, Vector>{std::move(y), std::move(x_border)};
  };

  auto [x, xb] = eliminate(sys.rhs_main, sys.rhs_border);
  const double a_norm = detail::bordered_norm(sys);
  const double b_norm = std::max(sys.rhs_main.template lpNorm<Eigen::Infinity>(),
                                 m > 0 ? sys.rhs_border.template lpNorm<Eigen::Infinity>() : 0.0);

  double backward = 0.0;
  for (int refinement = 0;; ++refinement) {
    auto [r_main, r_border] = bordered_residual(sys, x, xb);
    const double r_norm = std::max(r_main.template lpNorm<Eigen::Infinity>(),
                                   m > 0 ? r_border.template lpNorm<Eigen::Infinity>() : 0.0);
    const double x_norm = std::max(x.template lpNorm<Eigen::Infinity>(),
                                   m > 0 ? xb.template lpNorm<Eigen::Infinity>() : 0.0);
    const double scale = a_norm * x_norm + b_norm;
    backward = scale > 0.0 ? r_norm / scale : 0.0;
    if (!std::isfinite(backward)) throw SolverError("solve_bordered: non-finite solution");
    if (backward <= tolerance) break;
    if (refinement == 2) {
      std::ostringstream os;
      os << "solve_bordered: backward error " << backward << " exceeds " << tolerance;
      throw SolverError(os.str());
    }
    auto [dx, dxb] = eliminate(r_main, r_border);
    x += dx;
    if (m > 0) xb += dxb;
  }
  return {std::move(x), std::move(xb), backward};
}

template <typename Scalar>
BorderedSolution<Scalar> solve_bordered(const BorderedSystem<Scalar>& sys,
                                        double tolerance = 1e-11) {
  Factorization<Scalar> lu;
  return solve_bordered(sys, lu, tolerance);
}

}  // namespace savnls
