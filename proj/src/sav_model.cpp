#include "savnls/sav_model.hpp"

#include <cmath>
#include <sstream>

#include "savnls/errors.hpp"

namespace savnls {

namespace {
constexpr double kSingularThreshold = 1e-14;
}

Nonlinearity Nonlinearity::power_law(double kappa, double q, double c0) {
  if (!(q > 1.0)) throw ConfigError("Nonlinearity: power q must exceed 1");
  if (!(c0 > 0.0)) throw ConfigError("Nonlinearity: c0 must be positive");
  Nonlinearity nl;
  nl.power_law_ = true;
  nl.kappa_ = kappa;
  nl.q_ = q;
  nl.c0_ = c0;
  return nl;
}

Nonlinearity Nonlinearity::custom(Fn f, Fn F, Fn f_prime, double c0) {
  if (!f || !F || !f_prime) throw ConfigError("Nonlinearity: custom f, F and f' are required");
  if (!(c0 > 0.0)) throw ConfigError("Nonlinearity: c0 must be positive");
  Nonlinearity nl;
  nl.power_law_ = false;
  nl.c0_ = c0;
  nl.f_ = std::move(f);
  nl.F_ = std::move(F);
  nl.f_prime_ = std::move(f_prime);
  return nl;
}

double Nonlinearity::f(double s) const {
  if (!power_law_) return f_(s);
  if (kappa_ == 0.0) return 0.0;
  return q_ == 3.0 ? kappa_ * s : kappa_ * std::pow(s, 0.5 * (q_ - 1.0));
}

double Nonlinearity::F(double s) const {
  if (!power_law_) return F_(s);
  if (kappa_ == 0.0) return 0.0;
  return q_ == 3.0 ? 0.5 * kappa_ * s * s
                   : kappa_ * (2.0 / (q_ + 1.0)) * std::pow(s, 0.5 * (q_ + 1.0));
}

double Nonlinearity::f_prime(double s) const {
  if (!power_law_) return f_prime_(s);
  if (kappa_ == 0.0) return 0.0;
  return q_ == 3.0 ? kappa_ : kappa_ * 0.5 * (q_ - 1.0) * std::pow(s, 0.5 * (q_ - 3.0));
}

double sav_radicand(const FemSpace& space, const FemVector& u, const Nonlinearity& nl,
                    int num_points) {
  const double integral = integrate_density(
      space, u, [&nl](Complex v, Complex, double) { return nl.F(std::norm(v)); }, num_points);
  return 0.5 * integral + nl.c0();
}

double r_init(const FemSpace& space, const FemVector& u0, const Nonlinearity& nl, int num_points) {
  const double radicand = sav_radicand(space, u0, nl, num_points);
  if (!(radicand > 0.0)) {
    std::ostringstream os;
    os << "SAV radicand int F(|u|^2)/2 + c0 = " << radicand << " is not positive";
    throw ModelError(os.str(), radicand);
  }
  return std::sqrt(radicand);
}

double r_init(const FemSpace& space, const FemVector& u0, const Nonlinearity& nl) {
  return r_init(space, u0, nl, default_nonlinear_points(space));
}

double g_scalar_denominator(const FemSpace& space, const FemVector& u, const Nonlinearity& nl) {
  return r_init(space, u, nl);
}

Complex g_times_u(Complex u, double denom, const Nonlinearity& nl) {
  return nl.f(std::norm(u)) / denom * u;
}

GDerivatives g_derivatives(Complex u, double denom, const Nonlinearity& nl) {
  const double s = std::norm(u);
  if (nl.is_linear()) return {0.0, 0.0, false};
  if (std::abs(u) < kSingularThreshold) {
    const bool singular = nl.is_power_law() && nl.q() < 3.0;
    if (singular) return {0.0, 0.0, true};
  }
  // g u = f(u conj u) u  =>  d/du = f + f' s,  d/d(conj u) = f' u^2
  const double fp = nl.f_prime(s);
  return {(nl.f(s) + fp * s) / denom, fp * u * u / denom, false};
}

}  // namespace savnls
