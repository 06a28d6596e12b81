#include "savnls/slab_stepper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "savnls/errors.hpp"

namespace savnls {

namespace {

using Triplet = Eigen::Triplet<double>;

// Gathers element-local coefficients; Dirichlet slots are zero.
Eigen::VectorXcd gather(const FemSpace& space, const FemVector& v, int e) {
  Eigen::VectorXcd local(space.local_dofs());
  for (int l = 0; l < space.local_dofs(); ++l) {
    const int g = space.dof(e, l);
    local(l) = g < 0 ? Complex(0.0) : v(g);
  }
  return local;
}

double mass_norm(const SparseOperator& mass, const FemVector& v) {
  return std::sqrt(std::max(0.0, v.dot(mass * v).real()));
}

// (2/tau) D applied to a row of nodal values [initial, stage_1, ..., stage_k].
double scaled_diff(const CollocationScheme& scheme, double tau, int j, int m) {
  return (2.0 / tau) * scheme.diff_matrix(j, m);
}

SlabUnknowns add_increment(const SlabUnknowns& x, const std::vector<FemVector>& dU,
                           const Eigen::VectorXd& dR) {
  SlabUnknowns out = x;
  for (int j = 0; j < x.k(); ++j) out.U[j] += dU[j];
  out.R += dR;
  return out;
}

double increment_norm(const SparseOperator& mass, const std::vector<FemVector>& dU,
                      const Eigen::VectorXd& dR) {
  double norm = dR.size() > 0 ? dR.cwiseAbs().maxCoeff() : 0.0;
  for (const FemVector& d : dU) norm = std::max(norm, mass_norm(mass, d));
  return norm;
}

}  // namespace

void StepperConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("StepperConfig: tau must be positive");
  if (!(newton_tol > 0.0)) throw ConfigError("StepperConfig: newton_tol must be positive");
  if (max_newton_iters < 1) throw ConfigError("StepperConfig: max_newton_iters must be >= 1");
  if (k < 1 || k > kMaxGaussPoints) throw ConfigError("StepperConfig: k outside [1, 8]");
}

Assemblies::Assemblies(FemSpace space_in, int nonlinear_points)
    : space(std::move(space_in)),
      mass(assemble_mass(space)),
      stiffness(assemble_stiffness(space)),
      nonlinear_quad(element_quadrature(space, nonlinear_points)) {}

Assemblies::Assemblies(FemSpace space_in)
    : Assemblies(space_in, default_nonlinear_points(space_in)) {}

SlabUnknowns SlabUnknowns::constant(const SavState& state, int k) {
  SlabUnknowns x;
  x.U.assign(k, state.u);
  x.R = Eigen::VectorXd::Constant(k, state.r);
  return x;
}

double SlabResidual::max_abs() const {
  double norm = res_r.size() > 0 ? res_r.cwiseAbs().maxCoeff() : 0.0;
  for (const FemVector& r : res_u)
    if (r.size() > 0) norm = std::max(norm, r.cwiseAbs().maxCoeff());
  return norm;
}

NonlinearLoad nonlinear_load(const Assemblies& assemblies, const FemVector& U,
                             const Nonlinearity& nl) {
  const FemSpace& space = assemblies.space;
  const ElementQuadrature& quad = assemblies.nonlinear_quad;
  const double h = space.mesh().h;
  NonlinearLoad load;
  load.N = FemVector::Zero(space.num_dofs());
  if (nl.is_linear()) {
    load.radicand = nl.c0();
    load.denominator = std::sqrt(nl.c0());
    return load;
  }
  double integral = 0.0;
  Eigen::VectorXcd local_load(space.local_dofs());
  for (int e = 0; e < space.num_elements(); ++e) {
    const Eigen::VectorXcd u = quad.values.cast<Complex>() * gather(space, U, e);
    local_load.setZero();
    for (int q = 0; q < quad.num_points; ++q) {
      const double s = std::norm(u(q));
      const double w = quad.weights(q) * h;
      integral += w * nl.F(s);
      local_load += (w * nl.f(s) * u(q)) * quad.values.row(q).transpose().cast<Complex>();
    }
    for (int l = 0; l < space.local_dofs(); ++l) {
      const int g = space.dof(e, l);
      if (g >= 0) load.N(g) += local_load(l);
    }
  }
  load.radicand = 0.5 * integral + nl.c0();
  if (!(load.radicand > 0.0)) {
    std::ostringstream os;
    os << "SAV radicand " << load.radicand << " is not positive at a stage";
    throw ModelError(os.str(), load.radicand);
  }
  load.denominator = std::sqrt(load.radicand);
  load.N /= load.denominator;
  return load;
}

std::vector<FemVector> stage_time_derivatives(const FemVector& initial, const SlabUnknowns& x,
                                              const CollocationScheme& scheme, double tau) {
  const int k = scheme.k();
  // rows of D sum to zero, so differences from the initial value give the same
  // derivative and keep constants exact
  std::vector<FemVector> d(k, FemVector::Zero(initial.size()));
  for (int m = 0; m < k; ++m) {
    const FemVector diff = x.U[m] - initial;
    for (int j = 0; j < k; ++j) d[j] += scaled_diff(scheme, tau, j, m + 1) * diff;
  }
  return d;
}

SlabResidual residual(const SavState& state, const SlabUnknowns& x, const SlabContext& ctx) {
  const int k = ctx.scheme.k();
  if (x.k() != k || x.R.size() != k) throw ConfigError("residual: stage count differs from k");
  const std::vector<FemVector> dudt = stage_time_derivatives(state.u, x, ctx.scheme, ctx.tau);
  SlabResidual res;
  res.res_u.resize(k);
  res.res_r.resize(k);
  for (int j = 0; j < k; ++j) {
    const NonlinearLoad load = nonlinear_load(ctx.assemblies, x.U[j], ctx.nl);
    res.res_u[j] = Complex(0.0, 1.0) * (ctx.assemblies.mass * dudt[j]) +
                   ctx.assemblies.stiffness * x.U[j] - x.R(j) * load.N;
    double drdt = 0.0;
    for (int m = 0; m < k; ++m) drdt += scaled_diff(ctx.scheme, ctx.tau, j, m + 1) * (x.R(m) - state.r);
    // Re (g u, du/dt) = Re sum_i conj(d_i) N_i
    res.res_r(j) = drdt - 0.5 * dudt[j].dot(load.N).real();
  }
  return res;
}

Eigen::VectorXd pack_main(const SlabUnknowns& x) {
  const int k = x.k();
  const int n = k > 0 ? static_cast<int>(x.U[0].size()) : 0;
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(n) * k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      out(real_index(i, j, 0, k)) = x.U[j](i).real();
      out(real_index(i, j, 1, k)) = x.U[j](i).imag();
    }
  return out;
}

Eigen::VectorXd pack_residual_main(const SlabResidual& r) {
  SlabUnknowns tmp;
  tmp.U = r.res_u;
  return pack_main(tmp);
}

namespace {

// Position of (row, col) in the value array of a compressed column-major matrix.
int value_position(const Eigen::SparseMatrix<double>& m, Eigen::Index row, Eigen::Index col) {
  const int* inner = m.innerIndexPtr();
  const int begin = m.outerIndexPtr()[col];
  const int end = m.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(inner + begin, inner + end, static_cast<int>(row));
  if (it == inner + end || *it != row) throw SolverError("slab pattern: missing entry");
  return static_cast<int>(it - inner);
}

}  // namespace

SlabSolver::SlabSolver(const Assemblies& assemblies, const CollocationScheme& scheme,
                       const Nonlinearity& nl, const StepperConfig& cfg)
    : ctx_{assemblies, scheme, nl, cfg.tau}, cfg_(cfg) {
  if (scheme.k() != cfg.k) throw ConfigError("SlabSolver: scheme order differs from cfg.k");
  if (!nl.is_linear()) build_pattern();
}

void SlabSolver::build_pattern() {
  const int k = ctx_.scheme.k();
  const FemSpace& space = ctx_.assemblies.space;
  const Eigen::Index n_main = 2 * static_cast<Eigen::Index>(space.num_dofs()) * k;
  const SparseOperator& M = ctx_.assemblies.mass;
  const SparseOperator& A = ctx_.assemblies.stiffness;

  // Stage coupling through the mass matrix only touches the off-diagonal
  // entries of each 2x2 block; same-stage blocks are full.
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(M.nonZeros()) * (2 * k * k + 2 * k));
  for (int c = 0; c < M.outerSize(); ++c)
    for (SparseOperator::InnerIterator it(M, c); it; ++it)
      for (int j = 0; j < k; ++j)
        for (int m = 0; m < k; ++m) {
          const Eigen::Index row = real_index(it.row(), j, 0, k);
          const Eigen::Index col = real_index(it.col(), m, 0, k);
          triplets.emplace_back(row, col + 1, 0.0);
          triplets.emplace_back(row + 1, col, 0.0);
          if (j == m) {
            triplets.emplace_back(row, col, 0.0);
            triplets.emplace_back(row + 1, col + 1, 0.0);
          }
        }
  pattern_.resize(n_main, n_main);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  double* values = pattern_.valuePtr();
  for (int c = 0; c < M.outerSize(); ++c)
    for (SparseOperator::InnerIterator it(M, c); it; ++it)
      for (int j = 0; j < k; ++j)
        for (int m = 0; m < k; ++m) {
          const double v = scaled_diff(ctx_.scheme, ctx_.tau, j, m + 1) * it.value();
          const Eigen::Index row = real_index(it.row(), j, 0, k);
          const Eigen::Index col = real_index(it.col(), m, 0, k);
          values[value_position(pattern_, row, col + 1)] -= v;
          values[value_position(pattern_, row + 1, col)] += v;
        }
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseOperator::InnerIterator it(A, c); it; ++it)
      for (int j = 0; j < k; ++j) {
        const Eigen::Index row = real_index(it.row(), j, 0, k);
        const Eigen::Index col = real_index(it.col(), j, 0, k);
        values[value_position(pattern_, row, col)] += it.value();
        values[value_position(pattern_, row + 1, col + 1)] += it.value();
      }

  const int nloc = space.local_dofs();
  nonlinear_slots_.assign(static_cast<std::size_t>(space.num_elements()) * k * nloc * nloc,
                          {-1, -1, -1, -1});
  for (int e = 0; e < space.num_elements(); ++e)
    for (int j = 0; j < k; ++j)
      for (int a = 0; a < nloc; ++a)
        for (int b = 0; b < nloc; ++b) {
          const int ga = space.dof(e, a);
          const int gb = space.dof(e, b);
          if (ga < 0 || gb < 0) continue;
          const Eigen::Index row = real_index(ga, j, 0, k);
          const Eigen::Index col = real_index(gb, j, 0, k);
          nonlinear_slots_[((static_cast<std::size_t>(e) * k + j) * nloc + a) * nloc + b] = {
              value_position(pattern_, row, col), value_position(pattern_, row, col + 1),
              value_position(pattern_, row + 1, col), value_position(pattern_, row + 1, col + 1)};
        }
}

BorderedSystem<double> SlabSolver::jacobian(const SavState& state, const SlabUnknowns& x,
                                            int* clamped_points) const {
  if (ctx_.nl.is_linear()) throw ConfigError("SlabSolver::jacobian: linear problems use the complex path");
  const int k = ctx_.scheme.k();
  const FemSpace& space = ctx_.assemblies.space;
  const int n = space.num_dofs();
  const Eigen::Index n_main = pattern_.rows();
  const bool full = cfg_.full_jacobian;
  const int n_border = full ? 2 * k : k;
  const double h = space.mesh().h;
  const ElementQuadrature& quad = ctx_.assemblies.nonlinear_quad;
  const int nloc = space.local_dofs();

  const std::vector<FemVector> dudt = stage_time_derivatives(state.u, x, ctx_.scheme, ctx_.tau);
  const SlabResidual res = residual(state, x, ctx_);

  BorderedSystem<double> sys;
  sys.K = pattern_;
  sys.B = Eigen::MatrixXd::Zero(n_main, n_border);
  sys.C = Eigen::MatrixXd::Zero(n_border, n_main);
  sys.D = Eigen::MatrixXd::Zero(n_border, n_border);
  sys.rhs_border = Eigen::VectorXd::Zero(n_border);
  double* values = sys.K.valuePtr();

  int clamped = 0;
  Eigen::MatrixXcd G1(nloc, nloc), G2(nloc, nloc);
  const Eigen::MatrixXcd phi = quad.values.cast<Complex>();
  for (int j = 0; j < k; ++j) {
    const NonlinearLoad load = nonlinear_load(ctx_.assemblies, x.U[j], ctx_.nl);

    // dependence on R_m through dr/dt
    for (int m = 0; m < k; ++m) sys.D(j, m) = scaled_diff(ctx_.scheme, ctx_.tau, j, m + 1);

    for (int i = 0; i < n; ++i) {
      // u-equation: -R_j N(U_j)
      sys.B(real_index(i, j, 0, k), j) = -load.N(i).real();
      sys.B(real_index(i, j, 1, k), j) = -load.N(i).imag();
      // r-equation: -1/2 Re(conj(delta d) N) with delta d = (2/tau) sum_m D_jm delta U_m
      for (int m = 0; m < k; ++m) {
        const double dm = scaled_diff(ctx_.scheme, ctx_.tau, j, m + 1);
        sys.C(j, real_index(i, m, 0, k)) -= 0.5 * dm * load.N(i).real();
        sys.C(j, real_index(i, m, 1, k)) -= 0.5 * dm * load.N(i).imag();
      }
    }

    for (int e = 0; e < space.num_elements(); ++e) {
      Eigen::VectorXcd local(nloc);
      for (int l = 0; l < nloc; ++l) {
        const int g = space.dof(e, l);
        local(l) = g < 0 ? Complex(0.0) : x.U[j](g);
      }
      const Eigen::VectorXcd u = phi * local;
      G1.setZero();
      G2.setZero();
      for (int q = 0; q < quad.num_points; ++q) {
        const GDerivatives g = g_derivatives(u(q), load.denominator, ctx_.nl);
        if (g.clamped) ++clamped;
        const double w = quad.weights(q) * h;
        for (int a = 0; a < nloc; ++a)
          for (int b = 0; b < nloc; ++b) {
            const double pp = w * quad.values(q, a) * quad.values(q, b);
            G1(a, b) += pp * g.g1;
            G2(a, b) += pp * g.g2;
          }
      }
      for (int a = 0; a < nloc; ++a) {
        const int ga = space.dof(e, a);
        if (ga < 0) continue;
        const Complex d_conj = std::conj(dudt[j](ga));
        for (int b = 0; b < nloc; ++b) {
          const int gb = space.dof(e, b);
          if (gb < 0) continue;
          // u-equation: -R_j (G1 dU + G2 conj dU), as z -> a z + b conj z in real form
          const Complex ca = -x.R(j) * G1(a, b);
          const Complex cb = -x.R(j) * G2(a, b);
          const auto& slot = nonlinear_slots_[((static_cast<std::size_t>(e) * k + j) * nloc + a) * nloc + b];
          values[slot[0]] += ca.real() + cb.real();
          values[slot[1]] += -ca.imag() + cb.imag();
          values[slot[2]] += ca.imag() + cb.imag();
          values[slot[3]] += ca.real() - cb.real();
          // r-equation: -1/2 Re(conj(d) (G1 dU + G2 conj dU))
          sys.C(j, real_index(gb, j, 0, k)) -= 0.5 * (d_conj * (G1(a, b) + G2(a, b))).real();
          sys.C(j, real_index(gb, j, 1, k)) += 0.5 * (d_conj * (G1(a, b) - G2(a, b))).imag();
        }
      }
    }

    if (full) {
      // eta_j = delta(radicand_j); dN/d(radicand) = -N / (2 radicand)
      const int eta = k + j;
      const double two_rho = 2.0 * load.radicand;
      for (int i = 0; i < n; ++i) {
        sys.B(real_index(i, j, 0, k), eta) = x.R(j) * load.N(i).real() / two_rho;
        sys.B(real_index(i, j, 1, k), eta) = x.R(j) * load.N(i).imag() / two_rho;
        sys.C(eta, real_index(i, j, 0, k)) = load.denominator * load.N(i).real();
        sys.C(eta, real_index(i, j, 1, k)) = load.denominator * load.N(i).imag();
      }
      sys.D(j, eta) = 0.5 * dudt[j].dot(load.N).real() / two_rho;
      sys.D(eta, eta) = -1.0;
    }
  }

  sys.rhs_main = -pack_residual_main(res);
  sys.rhs_border.head(k) = -res.res_r;
  if (clamped_points != nullptr) *clamped_points = clamped;
  return sys;
}

NewtonUpdate SlabSolver::linear_step(const SavState& state, const SlabUnknowns& x) {
  const int k = ctx_.scheme.k();
  const int n = ctx_.assemblies.space.num_dofs();
  const SlabResidual res = residual(state, x, ctx_);

  std::vector<Eigen::Triplet<Complex>> triplets;
  const SparseOperator& M = ctx_.assemblies.mass;
  const SparseOperator& A = ctx_.assemblies.stiffness;
  for (int c = 0; c < M.outerSize(); ++c)
    for (SparseOperator::InnerIterator it(M, c); it; ++it)
      for (int j = 0; j < k; ++j)
        for (int m = 0; m < k; ++m)
          triplets.emplace_back(it.row() * k + j, it.col() * k + m,
                                Complex(0.0, scaled_diff(ctx_.scheme, ctx_.tau, j, m + 1) * it.value()));
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseOperator::InnerIterator it(A, c); it; ++it)
      for (int j = 0; j < k; ++j) triplets.emplace_back(it.row() * k + j, it.col() * k + j, it.value());

  BorderedSystem<Complex> sys;
  const Eigen::Index size = static_cast<Eigen::Index>(n) * k;
  sys.K.resize(size, size);
  sys.K.setFromTriplets(triplets.begin(), triplets.end());
  sys.K.makeCompressed();
  sys.B = Eigen::MatrixXcd::Zero(size, k);
  sys.C = Eigen::MatrixXcd::Zero(k, size);
  sys.D = ((2.0 / ctx_.tau) * ctx_.scheme.diff_matrix.rightCols(k)).cast<Complex>();
  sys.rhs_main.resize(size);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) sys.rhs_main(static_cast<Eigen::Index>(i) * k + j) = -res.res_u[j](i);
  sys.rhs_border = (-res.res_r).cast<Complex>();

  const BorderedSolution<Complex> sol = solve_bordered(sys, complex_lu_);
  std::vector<FemVector> dU(k, FemVector(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) dU[j](i) = sol.x_main(static_cast<Eigen::Index>(i) * k + j);
  const Eigen::VectorXd dR = sol.x_border.real();

  NewtonUpdate update;
  update.unknowns = add_increment(x, dU, dR);
  update.increment_norm = increment_norm(M, dU, dR);
  update.backward_error = sol.residual;
  return update;
}

NewtonUpdate SlabSolver::newton_step(const SavState& state, const SlabUnknowns& x) {
  if (ctx_.nl.is_linear()) return linear_step(state, x);

  const int k = ctx_.scheme.k();
  const int n = ctx_.assemblies.space.num_dofs();
  int clamped = 0;
  const BorderedSystem<double> sys = jacobian(state, x, &clamped);
  const BorderedSolution<double> sol = solve_bordered(sys, lu_);

  std::vector<FemVector> dU(k, FemVector(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      dU[j](i) = Complex(sol.x_main(real_index(i, j, 0, k)), sol.x_main(real_index(i, j, 1, k)));
  const Eigen::VectorXd dR = sol.x_border.head(k);

  NewtonUpdate update;
  update.unknowns = add_increment(x, dU, dR);
  update.increment_norm = increment_norm(ctx_.assemblies.mass, dU, dR);
  update.backward_error = sol.residual;
  update.clamped_points = clamped;
  return update;
}

BorderedSystem<double> slab_jacobian(const SavState& state, const SlabUnknowns& x,
                                     const SlabContext& ctx, bool full_jacobian,
                                     int* clamped_points) {
  StepperConfig cfg;
  cfg.tau = ctx.tau;
  cfg.k = ctx.scheme.k();
  cfg.full_jacobian = full_jacobian;
  return SlabSolver(ctx.assemblies, ctx.scheme, ctx.nl, cfg).jacobian(state, x, clamped_points);
}

NewtonUpdate newton_step(const SavState& state, const SlabUnknowns& x, const SlabContext& ctx,
                         bool full_jacobian) {
  StepperConfig cfg;
  cfg.tau = ctx.tau;
  cfg.k = ctx.scheme.k();
  cfg.full_jacobian = full_jacobian;
  return SlabSolver(ctx.assemblies, ctx.scheme, ctx.nl, cfg).newton_step(state, x);
}
SavState endpoint(const SavState& start, const SlabUnknowns& stages,
                  const CollocationScheme& scheme, double tau) {
  const Eigen::VectorXd& e = scheme.endpoint_weights;
  SavState end;
  end.u = e(0) * start.u;
  end.r = e(0) * start.r;
  for (int m = 0; m < stages.k(); ++m) {
    end.u += e(m + 1) * stages.U[m];
    end.r += e(m + 1) * stages.R(m);
  }
  end.t = start.t + tau;
  return end;
}

SlabResult SlabSolver::advance(const SavState& state) {
  SlabResult result;
  result.stages = SlabUnknowns::constant(state, cfg_.k);
  StepReport& report = result.report;
  int clamped = 0;
  for (int it = 1; it <= cfg_.max_newton_iters; ++it) {
    NewtonUpdate update = newton_step(state, result.stages);
    report.increment_history.push_back(update.increment_norm);
    report.solver_backward_error = std::max(report.solver_backward_error, update.backward_error);
    clamped += update.clamped_points;
    result.stages = std::move(update.unknowns);
    report.iterations = it;
    if (!std::isfinite(update.increment_norm)) {
      throw StepError("advance: Newton diverged (non-finite increment)", report.increment_history);
    }
    // the linear problem is solved exactly by one linear solve
    if (update.increment_norm <= cfg_.newton_tol || ctx_.nl.is_linear()) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) {
    std::ostringstream os;
    os << "advance: Newton did not converge in " << cfg_.max_newton_iters
       << " iterations, last increment " << report.increment_history.back();
    throw StepError(os.str(), report.increment_history);
  }
  if (clamped > 0) {
    report.warnings.push_back("g-derivatives clamped at " + std::to_string(clamped) +
                              " quadrature points near u = 0");
  }
  report.residual_final = residual(state, result.stages, ctx_).max_abs();
  result.state = endpoint(state, result.stages, ctx_.scheme, ctx_.tau);
  return result;
}

SlabResult advance(const SavState& state, const StepperConfig& cfg, const Assemblies& assemblies,
                   const CollocationScheme& scheme, const Nonlinearity& nl) {
  return SlabSolver(assemblies, scheme, nl, cfg).advance(state);
}
long slab_count(double T, double tau) {
  if (!(tau > 0.0)) throw ConfigError("slab_count: tau must be positive");
  if (!(T >= 0.0)) throw ConfigError("slab_count: T must be nonnegative");
  const double ratio = T / tau;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << "T / tau = " << ratio << " is not an integer (T = " << T << ", tau = " << tau << ")";
    throw ConfigError(os.str());
  }
  return static_cast<long>(rounded);
}

IntegrationSummary integrate(const ScalarField& u0_fn, const StepperConfig& cfg,
                             const Assemblies& assemblies, const Nonlinearity& nl, double T,
                             const std::vector<SlabObserver*>& observers) {
  cfg.validate();
  const long num_slabs = slab_count(T, cfg.tau);
  const CollocationScheme scheme = collocation_scheme(cfg.k);

  IntegrationSummary summary;
  summary.initial.u = interpolate(assemblies.space, u0_fn);
  summary.initial.r = r_init(assemblies.space, summary.initial.u, nl,
                             assemblies.nonlinear_quad.num_points);
  summary.initial.t = 0.0;
  for (SlabObserver* obs : observers) obs->on_start(summary.initial);

  SlabSolver solver(assemblies, scheme, nl, cfg);
  SavState state = summary.initial;
  for (long n = 1; n <= num_slabs; ++n) {
    SlabResult slab;
    try {
      slab = solver.advance(state);
    } catch (const StepError& err) {
      throw StepError("slab " + std::to_string(n) + ": " + err.what(), err.increment_history(), n);
    } catch (const SolverError& err) {
      throw StepError("slab " + std::to_string(n) + ": " + err.what(), {}, n);
    } catch (const ModelError& err) {
      throw StepError("slab " + std::to_string(n) + ": " + err.what(), {}, n);
    }
    slab.state.t = static_cast<double>(n) * cfg.tau;
    const SlabRecord record{n, cfg.tau, state, slab.stages, slab.state, slab.report};
    for (SlabObserver* obs : observers) obs->on_slab(record);
    summary.reports.push_back(slab.report);
    if (cfg.report_stages) summary.stages.push_back(slab.stages);
    state = std::move(slab.state);
  }
  summary.final_state = std::move(state);
  return summary;
}

}  // namespace savnls
