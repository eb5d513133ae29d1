#pragma once

// Multipole and local expansions of the 1/r potential of point charges.
//
// Coefficients use Racah-normalised harmonics C_n^m = sqrt((n-m)!/(n+m)!) P_n^m e^{i m phi}
// with the Condon-Shortley phase:
//   phi(x) = sum M_n^m C_n^m(t, p) / r^{n+1},  M_n^m = sum_k q_k rho_k^n conj(C_n^m(t_k, p_k))
//   phi(x) = sum L_n^m r^n C_n^m(t, p)
// with (r, t, p) measured from the expansion center. The Coulomb constant is applied by
// evaluate() only, so coefficients carry charge-geometry units (C m^n, C / m^{n+1}).

#include "penning/coulomb.hpp"

#include <complex>

namespace penning {

struct MultipoleExpansion {
  Vec3 center = Vec3::Zero();
  int order = 0;
  /// Radius of a sphere about center enclosing every source.
  double radius = 0.0;
  /// (order+1)^2 entries, M_n^m at n*n + n + m.
  Eigen::VectorXcd coeffs;

  std::complex<double> coeff(int n, int m) const { return coeffs[n * n + n + m]; }
};

struct LocalExpansion {
  Vec3 center = Vec3::Zero();
  int order = 0;
  /// Radius of the ball about center where the expansion is meant to be evaluated.
  double radius = 0.0;
  Eigen::VectorXcd coeffs;

  std::complex<double> coeff(int n, int m) const { return coeffs[n * n + n + m]; }
};

/// Relative truncation bound c^{p+1} / (1 - c) of an order-p expansion at geometry ratio c.
double truncation_bound(int p, double c);
/// Smallest p with truncation_bound(p, c) <= epsilon.
int truncation_order(double epsilon, double c);

MultipoleExpansion p2m(const ChargeSystem& sys, const Vec3& center, int order);
MultipoleExpansion m2m(const MultipoleExpansion& me, const Vec3& new_center);
/// Throws "not well-separated" unless |target - me.center| > me.radius + target_radius.
LocalExpansion m2l(const MultipoleExpansion& me, const Vec3& target_center, double target_radius);
LocalExpansion l2l(const LocalExpansion& le, const Vec3& new_center);

/// Potential (V) at x; the field (V/m) is written when requested.
double evaluate(const MultipoleExpansion& me, const Vec3& x, Vec3* field = nullptr);
double evaluate(const LocalExpansion& le, const Vec3& x, Vec3* field = nullptr);

}  // namespace penning
