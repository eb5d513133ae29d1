#include "penning/expansions.hpp"

#include "penning/constants.hpp"
#include "penning/harmonics.hpp"

#include <cmath>
#include <vector>

namespace penning {

namespace h = harmonics;
using cplx = std::complex<double>;

namespace {

enum class Basis { Multipole, Local };

// scaled m >= 0 storage -> full Racah vector
Eigen::VectorXcd to_racah(const std::vector<cplx>& s, int p, Basis basis) {
  Eigen::VectorXcd out((p + 1) * (p + 1));
  for (int n = 0; n <= p; ++n)
    for (int m = 0; m <= n; ++m) {
      const double f = h::racah_factor(n, m);
      const cplx v = basis == Basis::Multipole ? s[h::idx(n, m)] * f : s[h::idx(n, m)] / f;
      out[n * n + n + m] = v;
      if (m > 0) out[n * n + n - m] = (m & 1) ? -std::conj(v) : std::conj(v);
    }
  return out;
}

std::vector<cplx> to_scaled(const Eigen::VectorXcd& c, int p, Basis basis) {
  std::vector<cplx> s(h::coeff_count(p + 1), 0.0);
  for (int n = 0; n <= p; ++n)
    for (int m = 0; m <= n; ++m) {
      const double f = h::racah_factor(n, m);
      s[h::idx(n, m)] = basis == Basis::Multipole ? c[n * n + n + m] / f : c[n * n + n + m] * f;
    }
  return s;
}

void check_order(int p) {
  if (p < 0 || p > 60) throw Error("expansion order must lie in [0, 60]");
}

}  // namespace

double truncation_bound(int p, double c) { return std::pow(c, p + 1) / (1.0 - c); }

int truncation_order(double epsilon, double c) {
  if (!(epsilon > 0.0)) throw Error("precision must be positive");
  if (!(c > 0.0 && c < 1.0)) throw Error("geometry ratio must lie in (0, 1)");
  int p = 0;
  while (truncation_bound(p, c) > epsilon) ++p;
  return p;
}

MultipoleExpansion p2m(const ChargeSystem& sys, const Vec3& center, int order) {
  check_order(order);
  sys.validate();
  std::vector<cplx> s(h::coeff_count(order + 1), 0.0);
  h::Workspace ws(order);
  double radius = 0.0;
  for (Eigen::Index k = 0; k < sys.size(); ++k) {
    const Vec3 rel = sys.x.col(k) - center;
    radius = std::max(radius, rel.norm());
    h::p2m(rel, sys.q[k], order, s.data(), ws);
  }
  return {center, order, radius, to_racah(s, order, Basis::Multipole)};
}

MultipoleExpansion m2m(const MultipoleExpansion& me, const Vec3& new_center) {
  const int p = me.order;
  const Vec3 shift = me.center - new_center;
  if (shift.norm() == 0.0) return {new_center, p, me.radius, me.coeffs};
  const std::vector<cplx> in = to_scaled(me.coeffs, p, Basis::Multipole);
  std::vector<cplx> out(in.size(), 0.0);
  h::Workspace ws(p);
  h::m2m(in.data(), shift, p, out.data(), ws);
  return {new_center, p, me.radius + shift.norm(), to_racah(out, p, Basis::Multipole)};
}

LocalExpansion m2l(const MultipoleExpansion& me, const Vec3& target_center, double target_radius) {
  const int p = me.order;
  const Vec3 shift = target_center - me.center;
  if (!(shift.norm() > me.radius + target_radius)) throw Error("not well-separated");
  const std::vector<cplx> in = to_scaled(me.coeffs, p, Basis::Multipole);
  std::vector<cplx> out(in.size(), 0.0);
  h::Workspace ws(p);
  h::m2l(in.data(), shift, p, out.data(), ws);
  return {target_center, p, target_radius, to_racah(out, p, Basis::Local)};
}

LocalExpansion l2l(const LocalExpansion& le, const Vec3& new_center) {
  const int p = le.order;
  const Vec3 shift = new_center - le.center;
  const double radius = std::max(0.0, le.radius - shift.norm());
  if (shift.norm() == 0.0) return {new_center, p, radius, le.coeffs};
  const std::vector<cplx> in = to_scaled(le.coeffs, p, Basis::Local);
  std::vector<cplx> out(in.size(), 0.0);
  h::Workspace ws(p);
  h::l2l(in.data(), shift, p, out.data(), ws);
  return {new_center, p, radius, to_racah(out, p, Basis::Local)};
}

double evaluate(const MultipoleExpansion& me, const Vec3& x, Vec3* field) {
  const std::vector<cplx> s = to_scaled(me.coeffs, me.order, Basis::Multipole);
  h::Workspace ws(me.order);
  Vec3 grad;
  const double phi = h::m2p(s.data(), x - me.center, me.order, field ? &grad : nullptr, ws);
  if (field) *field = -constants::coulomb * grad;
  return constants::coulomb * phi;
}

double evaluate(const LocalExpansion& le, const Vec3& x, Vec3* field) {
  const std::vector<cplx> s = to_scaled(le.coeffs, le.order, Basis::Local);
  h::Workspace ws(le.order);
  Vec3 grad;
  const double phi = h::l2p(s.data(), x - le.center, le.order, field ? &grad : nullptr, ws);
  if (field) *field = -constants::coulomb * grad;
  return constants::coulomb * phi;
}

}  // namespace penning
