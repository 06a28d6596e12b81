#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "savnls/fem1d.hpp"
#include "savnls/sav_model.hpp"
#include "savnls/slab_stepper.hpp"

namespace savnls {

/// int |u|^2 = Re(u* M u).
double mass(const SparseOperator& mass_op, const FemVector& u);
double mass(const FemSpace& space, const FemVector& u);

/// 1/2 int |u'|^2 - r^2.
double sav_energy(const SparseOperator& stiffness, const SavState& state);
double sav_energy(const FemSpace& space, const SavState& state);

/// 1/2 int |u'|^2 - 1/2 int F(|u|^2).
double original_energy(const Assemblies& assemblies, const FemVector& u, const Nonlinearity& nl);
double original_energy(const FemSpace& space, const FemVector& u, const Nonlinearity& nl);

struct InternalMassCheck {
  double value = 0.0;
  bool ok = true;
};

/// (1/2) sum_j w_j ||P u_h(t_nj)||^2 against the initial mass. The temporal L2
/// projection leaves Gauss-point values unchanged, so the stage values are used
/// directly.
InternalMassCheck internal_mass_check(std::span<const FemVector> stages,
                                      const Eigen::VectorXd& weights, const SparseOperator& mass_op,
                                      double u0_mass, double rel_tol = 1e-10);

using SpaceTimeField = std::function<Complex(double x, double t)>;

struct ExactSolution {
  SpaceTimeField value;
  SpaceTimeField gradient;
};

struct TimeSample {
  double t;
  FemVector u;
};

/// Gauss-stage samples of a slab followed by its endpoint.
std::vector<TimeSample> slab_samples(const SlabRecord& record, const CollocationScheme& scheme);

/// max over the samples of the H1 error; a discrete L-infinity(0,T; H1) norm.
double trajectory_error(const FemSpace& space, std::span<const TimeSample> samples,
                        const ExactSolution& exact);

/// log(e_{i-1}/e_i) / log(p_{i-1}/p_i); entry 0 and entries with nonpositive
/// errors are empty.
std::vector<std::optional<double>> eoc(std::span<const double> errors,
                                       std::span<const double> params);

struct ConvergenceRow {
  double param;
  double error;  // NaN when the run failed
  std::optional<double> eoc;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;

  static ConvergenceTable build(std::span<const double> params, std::span<const double> errors);
};

struct ObservationRecord {
  double t = 0.0;
  double mass = 0.0;
  double sav_energy = 0.0;
  double original_energy = 0.0;
  std::optional<double> h1_error;
  std::optional<double> l2_error;
  int newton_iters = 0;
};

/// Per-slab conservation, internal-stage and (optionally) error bookkeeping.
class RunMonitor : public SlabObserver {
 public:
  RunMonitor(const Assemblies& assemblies, const Nonlinearity& nl, int k,
             std::optional<ExactSolution> exact = std::nullopt);

  void on_start(const SavState& initial) override;
  void on_slab(const SlabRecord& record) override;

  const std::vector<ObservationRecord>& records() const { return records_; }
  double max_mass_drift() const { return max_mass_drift_; }
  double max_sav_energy_drift() const { return max_energy_drift_; }
  /// Max over endpoints and Gauss stages of the H1 error (0 without exact solution).
  double linf_h1_error() const { return linf_h1_; }
  bool internal_mass_ok() const { return internal_ok_; }
  double max_internal_mass() const { return max_internal_mass_; }
  int max_newton_iters() const { return max_iters_; }
  long total_newton_iters() const { return total_iters_; }

 private:
  ObservationRecord observe(const SavState& state, int iters);

  const Assemblies& assemblies_;
  const Nonlinearity& nl_;
  CollocationScheme scheme_;
  std::optional<ExactSolution> exact_;
  std::vector<ObservationRecord> records_;
  double mass0_ = 0.0;
  double energy0_ = 0.0;
  double max_mass_drift_ = 0.0;
  double max_energy_drift_ = 0.0;
  double linf_h1_ = 0.0;
  double max_internal_mass_ = 0.0;
  bool internal_ok_ = true;
  int max_iters_ = 0;
  long total_iters_ = 0;
};

}  // namespace savnls
