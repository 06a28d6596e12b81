#pragma once

#include <complex>
#include <functional>

#include "savnls/fem1d.hpp"

namespace savnls {

/// The pair (f, F) with F' = f, plus the SAV shift c0 > 0.
///
/// PowerLaw(kappa, q): f(s) = kappa s^{(q-1)/2}, F(s) = kappa 2/(q+1) s^{(q+1)/2}.
/// The cubic equation  i u_t - u_xx - 2|u|^2 u = 0  is PowerLaw(2, 3).
class Nonlinearity {
 public:
  using Fn = std::function<double(double)>;

  static Nonlinearity power_law(double kappa, double q, double c0 = 1.0);
  /// f, F with F' = f, and f' (needed by the Newton Jacobian).
  static Nonlinearity custom(Fn f, Fn F, Fn f_prime, double c0 = 1.0);

  double f(double s) const;
  double F(double s) const;
  double f_prime(double s) const;

  double c0() const { return c0_; }
  bool is_power_law() const { return power_law_; }
  double kappa() const { return kappa_; }
  double q() const { return q_; }
  /// True when f vanishes identically (linear Schrodinger equation).
  bool is_linear() const { return power_law_ && kappa_ == 0.0; }

 private:
  Nonlinearity() = default;

  bool power_law_ = true;
  double kappa_ = 0.0;
  double q_ = 3.0;
  double c0_ = 1.0;
  Fn f_, F_, f_prime_;
};

/// Finite element coefficients of u_h(t), SAV scalar r_h(t) and the time t.
struct SavState {
  FemVector u;
  double r = 0.0;
  double t = 0.0;
};

/// Gauss points per element for the non-polynomial integrals.
inline int default_nonlinear_points(const FemSpace& space) { return space.degree() + 2; }

/// int F(|u|^2)/2 dx + c0.
double sav_radicand(const FemSpace& space, const FemVector& u, const Nonlinearity& nl,
                    int num_points);

/// sqrt(int F(|u0|^2)/2 dx + c0); throws ModelError when the radicand is not positive.
double r_init(const FemSpace& space, const FemVector& u0, const Nonlinearity& nl);
double r_init(const FemSpace& space, const FemVector& u0, const Nonlinearity& nl, int num_points);

/// The denominator of g(u); same functional as r_init.
double g_scalar_denominator(const FemSpace& space, const FemVector& u, const Nonlinearity& nl);

/// g(u) u = f(|u|^2) u / denom at a point.
Complex g_times_u(Complex u, double denom, const Nonlinearity& nl);

/// Wirtinger derivatives of g(u)u with the denominator held fixed:
/// g1 = d/du [g(u)u], g2 = d/d(conj u) [g(u)u].
struct GDerivatives {
  Complex g1;
  Complex g2;
  bool clamped = false;  // |u| below 1e-14 where f' is singular (q < 3)
};
GDerivatives g_derivatives(Complex u, double denom, const Nonlinearity& nl);

}  // namespace savnls
