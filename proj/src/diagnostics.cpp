#include "savnls/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "savnls/errors.hpp"

namespace savnls {

double mass(const SparseOperator& mass_op, const FemVector& u) {
  return u.dot(mass_op * u).real();
}

double mass(const FemSpace& space, const FemVector& u) { return mass(assemble_mass(space), u); }

double sav_energy(const SparseOperator& stiffness, const SavState& state) {
  return 0.5 * state.u.dot(stiffness * state.u).real() - state.r * state.r;
}

double sav_energy(const FemSpace& space, const SavState& state) {
  return sav_energy(assemble_stiffness(space), state);
}

namespace {

double potential(const FemSpace& space, const FemVector& u, const Nonlinearity& nl, int points) {
  return 0.5 * integrate_density(
                   space, u, [&nl](Complex v, Complex, double) { return nl.F(std::norm(v)); },
                   points);
}

}  // namespace

double original_energy(const Assemblies& assemblies, const FemVector& u, const Nonlinearity& nl) {
  return 0.5 * u.dot(assemblies.stiffness * u).real() -
         potential(assemblies.space, u, nl, assemblies.nonlinear_quad.num_points);
}

double original_energy(const FemSpace& space, const FemVector& u, const Nonlinearity& nl) {
  return 0.5 * u.dot(assemble_stiffness(space) * u).real() -
         potential(space, u, nl, default_nonlinear_points(space));
}

InternalMassCheck internal_mass_check(std::span<const FemVector> stages,
                                      const Eigen::VectorXd& weights, const SparseOperator& mass_op,
                                      double u0_mass, double rel_tol) {
  if (static_cast<Eigen::Index>(stages.size()) != weights.size())
    throw ConfigError("internal_mass_check: stage count differs from weight count");
  InternalMassCheck check;
  for (std::size_t j = 0; j < stages.size(); ++j)
    check.value += 0.5 * weights(static_cast<Eigen::Index>(j)) * mass(mass_op, stages[j]);
  check.ok = check.value <= u0_mass * (1.0 + rel_tol);
  return check;
}

std::vector<TimeSample> slab_samples(const SlabRecord& record, const CollocationScheme& scheme) {
  std::vector<TimeSample> samples;
  const double t0 = record.start.t;
  for (int j = 0; j < scheme.k(); ++j) {
    samples.push_back({t0 + 0.5 * (1.0 + scheme.rule.nodes(j)) * record.tau, record.stages.U[j]});
  }
  samples.push_back({record.end.t, record.end.u});
  return samples;
}

double trajectory_error(const FemSpace& space, std::span<const TimeSample> samples,
                        const ExactSolution& exact) {
  double worst = 0.0;
  for (const TimeSample& s : samples) {
    const ErrorNorms err = error_norms(
        space, s.u, [&](double x) { return exact.value(x, s.t); },
        [&](double x) { return exact.gradient(x, s.t); });
    worst = std::max(worst, err.h1);
  }
  return worst;
}

std::vector<std::optional<double>> eoc(std::span<const double> errors,
                                       std::span<const double> params) {
  if (errors.size() != params.size() || errors.size() < 2)
    throw ConfigError("eoc: need two or more errors with matching parameters");
  const bool increasing = params[1] > params[0];
  for (std::size_t i = 1; i < params.size(); ++i) {
    if ((params[i] > params[i - 1]) != increasing || params[i] == params[i - 1])
      throw ConfigError("eoc: parameters must be strictly monotone");
  }
  std::vector<std::optional<double>> out(errors.size());
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double e0 = errors[i - 1];
    const double e1 = errors[i];
    if (!(e0 > 0.0) || !(e1 > 0.0) || !std::isfinite(e0) || !std::isfinite(e1)) continue;
    out[i] = std::log(e0 / e1) / std::log(params[i - 1] / params[i]);
  }
  return out;
}

ConvergenceTable ConvergenceTable::build(std::span<const double> params,
                                         std::span<const double> errors) {
  if (params.size() != errors.size()) throw ConfigError("ConvergenceTable: size mismatch");
  ConvergenceTable table;
  std::vector<std::optional<double>> orders(params.size());
  if (params.size() >= 2) orders = eoc(errors, params);
  for (std::size_t i = 0; i < params.size(); ++i) table.rows.push_back({params[i], errors[i], orders[i]});
  return table;
}

RunMonitor::RunMonitor(const Assemblies& assemblies, const Nonlinearity& nl, int k,
                       std::optional<ExactSolution> exact)
    : assemblies_(assemblies), nl_(nl), scheme_(collocation_scheme(k)), exact_(std::move(exact)) {}

ObservationRecord RunMonitor::observe(const SavState& state, int iters) {
  ObservationRecord rec;
  rec.t = state.t;
  rec.mass = mass(assemblies_.mass, state.u);
  rec.sav_energy = sav_energy(assemblies_.stiffness, state);
  rec.original_energy = original_energy(assemblies_, state.u, nl_);
  rec.newton_iters = iters;
  if (exact_) {
    const ErrorNorms err = error_norms(
        assemblies_.space, state.u, [&](double x) { return exact_->value(x, state.t); },
        [&](double x) { return exact_->gradient(x, state.t); });
    rec.h1_error = err.h1;
    rec.l2_error = err.l2;
    linf_h1_ = std::max(linf_h1_, err.h1);
  }
  return rec;
}

void RunMonitor::on_start(const SavState& initial) {
  records_.clear();
  const ObservationRecord rec = observe(initial, 0);
  mass0_ = rec.mass;
  energy0_ = rec.sav_energy;
  records_.push_back(rec);
}

void RunMonitor::on_slab(const SlabRecord& record) {
  const ObservationRecord rec = observe(record.end, record.report.iterations);
  max_mass_drift_ = std::max(max_mass_drift_, std::abs(rec.mass - mass0_));
  max_energy_drift_ = std::max(max_energy_drift_, std::abs(rec.sav_energy - energy0_));
  max_iters_ = std::max(max_iters_, record.report.iterations);
  total_iters_ += record.report.iterations;
  records_.push_back(rec);

  const InternalMassCheck check = internal_mass_check(record.stages.U, scheme_.rule.weights,
                                                      assemblies_.mass, mass0_);
  max_internal_mass_ = std::max(max_internal_mass_, check.value);
  internal_ok_ = internal_ok_ && check.ok;

  if (exact_) {
    for (int j = 0; j < scheme_.k(); ++j) {
      const double t = record.start.t + 0.5 * (1.0 + scheme_.rule.nodes(j)) * record.tau;
      const ErrorNorms err = error_norms(
          assemblies_.space, record.stages.U[j], [&](double x) { return exact_->value(x, t); },
          [&](double x) { return exact_->gradient(x, t); });
      linf_h1_ = std::max(linf_h1_, err.h1);
    }
  }
}

}  // namespace savnls
