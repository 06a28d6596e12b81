#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "savnls/fem1d.hpp"
#include "savnls/linsolve.hpp"
#include "savnls/sav_model.hpp"
#include "savnls/time_collocation.hpp"

namespace savnls {

struct StepperConfig {
  double tau = 0.1;
  double newton_tol = 1e-10;
  int max_newton_iters = 25;
  int k = 2;
  bool report_stages = false;
  /// Include the derivative of the global SAV denominator in the Jacobian
  /// (rank-one term per stage, carried as extra border unknowns).
  bool full_jacobian = false;

  void validate() const;
};

/// Operators shared by every slab of a run.
struct Assemblies {
  Assemblies(FemSpace space, int nonlinear_points);
  explicit Assemblies(FemSpace space);

  FemSpace space;
  SparseOperator mass;
  SparseOperator stiffness;
  ElementQuadrature nonlinear_quad;
};

/// Stage values u_h(t_nj), r_h(t_nj), j = 1..k.
struct SlabUnknowns {
  std::vector<FemVector> U;
  Eigen::VectorXd R;

  int k() const { return static_cast<int>(U.size()); }
  static SlabUnknowns constant(const SavState& state, int k);
};

struct SlabResidual {
  std::vector<FemVector> res_u;
  Eigen::VectorXd res_r;

  double max_abs() const;
};

struct StepReport {
  int iterations = 0;
  std::vector<double> increment_history;
  double residual_final = 0.0;
  double solver_backward_error = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Everything a slab computation needs besides the unknowns.
struct SlabContext {
  const Assemblies& assemblies;
  const CollocationScheme& scheme;
  const Nonlinearity& nl;
  double tau;
};

/// Nonlinear load N(U)_i = int g(U) U phi_i dx for one stage.
struct NonlinearLoad {
  FemVector N;
  double radicand = 0.0;
  double denominator = 0.0;
};
NonlinearLoad nonlinear_load(const Assemblies& assemblies, const FemVector& U,
                             const Nonlinearity& nl);

/// Time derivative of the slab polynomial at the Gauss points, from the initial
/// value and the stage values.
std::vector<FemVector> stage_time_derivatives(const FemVector& initial, const SlabUnknowns& x,
                                              const CollocationScheme& scheme, double tau);

/// Collocation residual of the slab system.
SlabResidual residual(const SavState& state, const SlabUnknowns& x, const SlabContext& ctx);

/// Real layout of the slab unknowns: entry 2(i k + j) + c is the real (c = 0)
/// or imaginary (c = 1) part of dof i at stage j. Border unknowns are R_j,
/// followed by the stage radicand increments when full_jacobian is set.
inline Eigen::Index real_index(int dof, int stage, int part, int k) {
  return 2 * (static_cast<Eigen::Index>(dof) * k + stage) + part;
}
Eigen::VectorXd pack_main(const SlabUnknowns& x);
Eigen::VectorXd pack_residual_main(const SlabResidual& r);

/// Newton linearization in real form; rhs = -residual. The border width is k,
/// or 2k with full_jacobian.
BorderedSystem<double> slab_jacobian(const SavState& state, const SlabUnknowns& x,
                                     const SlabContext& ctx, bool full_jacobian,
                                     int* clamped_points = nullptr);

struct NewtonUpdate {
  SlabUnknowns unknowns;
  double increment_norm = 0.0;
  double backward_error = 0.0;
  int clamped_points = 0;
};
NewtonUpdate newton_step(const SavState& state, const SlabUnknowns& x, const SlabContext& ctx,
                         bool full_jacobian = false);

struct SlabResult {
  SavState state;
  SlabUnknowns stages;
  StepReport report;
};

/// Newton solver for the slabs of one run. The Jacobian sparsity pattern, its
/// state-independent part i(2/tau)(D kron M) + I kron A and the symbolic LU
/// analysis are computed once and reused by every iteration and slab.
class SlabSolver {
 public:
  SlabSolver(const Assemblies& assemblies, const CollocationScheme& scheme, const Nonlinearity& nl,
             const StepperConfig& cfg);

  BorderedSystem<double> jacobian(const SavState& state, const SlabUnknowns& x,
                                  int* clamped_points = nullptr) const;
  NewtonUpdate newton_step(const SavState& state, const SlabUnknowns& x);
  SlabResult advance(const SavState& state);

  const SlabContext& context() const { return ctx_; }

 private:
  void build_pattern();
  NewtonUpdate linear_step(const SavState& state, const SlabUnknowns& x);

  SlabContext ctx_;
  StepperConfig cfg_;
  Eigen::SparseMatrix<double> pattern_;  // values hold the linear part
  // value positions of the 2x2 blocks (rr, ri, ir, ii) for element e, stage j,
  // local pair (a, b); -1 for Dirichlet slots
  std::vector<std::array<int, 4>> nonlinear_slots_;
  Factorization<double> lu_;
  Factorization<Complex> complex_lu_;
};

/// One slab: Newton from the constant-in-time guess, then the endpoint values.
/// Throws StepError when Newton fails to converge.
SlabResult advance(const SavState& state, const StepperConfig& cfg, const Assemblies& assemblies,
                   const CollocationScheme& scheme, const Nonlinearity& nl);

/// Endpoint u_h(t_n), r_h(t_n) from the initial value and the stages.
SavState endpoint(const SavState& start, const SlabUnknowns& stages,
                  const CollocationScheme& scheme, double tau);

struct SlabRecord {
  long n;  // 1-based slab index
  double tau;
  const SavState& start;
  const SlabUnknowns& stages;
  const SavState& end;
  const StepReport& report;
};

class SlabObserver {
 public:
  virtual ~SlabObserver() = default;
  virtual void on_start(const SavState& /*initial*/) {}
  virtual void on_slab(const SlabRecord& record) = 0;
};

struct IntegrationSummary {
  SavState initial;
  SavState final_state;
  std::vector<StepReport> reports;
  std::vector<SlabUnknowns> stages;  // filled when report_stages is set
};

/// Number of slabs T / tau; throws ConfigError unless it is an integer.
long slab_count(double T, double tau);

/// u0 interpolated, r0 from the SAV functional, then T / tau slabs. A failing
/// slab aborts with a StepError carrying its index; observers have seen every
/// slab before it.
IntegrationSummary integrate(const ScalarField& u0_fn, const StepperConfig& cfg,
                             const Assemblies& assemblies, const Nonlinearity& nl, double T,
                             const std::vector<SlabObserver*>& observers = {});

}  // namespace savnls
