#include "doctest.h"

#include "penning/constants.hpp"
#include "penning/cooltheory.hpp"

#include <cmath>
#include <limits>

using namespace penning;

namespace {

CoolingTheoryParams paper_like(double detuning_mhz = 13.6, double waist = 2.48e-6) {
  TrapConfig cfg = TrapConfig::defaults();
  CoolingSetup s;
  s.planar_detuning = constants::two_pi * detuning_mhz * 1e6;
  s.waist_y = waist;
  return CoolingTheoryParams::from_crystal(cfg, 1000, s);
}

// single ion on the beam axis, no rotation, uniform beam: only the velocity integral remains
CoolingTheoryParams doppler_case(double saturation) {
  CoolingTheoryParams p = paper_like();
  p.rotation = 0.0;
  p.offset = 0.0;
  p.waist_y = p.waist_z = std::numeric_limits<double>::infinity();
  p.saturation = saturation;
  p.axial_saturation = 0.0;
  p.detuning = -0.5 * p.linewidth;
  return p;
}

// midpoint rule on the dimensionless integrand in elliptic polar coordinates
// y = a_y r cos(phi), z = a_z r sin(phi), r = sin(t)
double brute_force(double u, const CoolingTheoryParams& p) {
  const double hk = constants::hbar * p.wavenumber, v_rec = 5 * hk / (6 * p.mass);
  const int nt = 160, nphi = 160, nv = 3200;
  const double ht = constants::pi / 2 / nt, hphi = constants::two_pi / nphi, hv = 16.0 / nv;
  const double a = p.linewidth / 2;
  double total = 0.0;
  for (int it = 0; it < nt; ++it) {
    const double t = (it + 0.5) * ht, r = std::sin(t);
    const double jac = p.axes.y() * p.axes.z() * r * std::cos(t);             // dy dz = a_y a_z r dr dphi
    const double chord = 2 * p.axes.x() * std::cos(t);                        // x extent
    for (int ip = 0; ip < nphi; ++ip) {
      const double phi = (ip + 0.5) * hphi;
      const double y = p.axes.y() * r * std::cos(phi), z = p.axes.z() * r * std::sin(phi);
      const double dy = (y - p.offset) / p.waist_y, dz = z / p.waist_z;
      const double e = std::exp(-dy * dy - dz * dz);
      double sv = 0.0;
      for (int iv = 0; iv < nv; ++iv) {
        const double v = -8.0 + (iv + 0.5) * hv;
        const double b = (p.detuning - p.wavenumber * p.rotation * p.offset) / a -
                         p.wavenumber * p.rotation * p.waist_y * dy / a - p.wavenumber * u * v / a;
        sv += (v + v_rec / u) * std::exp(-v * v) * e / (1 + 2 * p.saturation * e + b * b);
      }
      total += sv * hv * chord * jac * hphi * ht;
    }
  }
  return p.linewidth * p.saturation * p.density * hk / std::sqrt(constants::pi) * u * total;
}

}  // namespace

TEST_CASE("energy balance basics") {
  CoolingTheoryParams p = paper_like();
  CHECK_THROWS_AS(de_dt(0.0, p), Error);
  p.saturation = 0.0;
  CHECK(de_dt(3.0, p) == 0.0);
  p = paper_like();
  p.density = 0.0;
  CHECK_THROWS_AS(de_dt(1.0, p), Error);
}

TEST_CASE("pure Doppler cooling always removes energy") {
  CoolingTheoryParams p = doppler_case(0.3);
  p.mass *= 1e12;  // recoil velocity 5 hbar k / 6m -> 0
  for (double u : {1e-3, 0.1, 1.0, 10.0, 100.0, 1000.0}) CHECK(de_dt(u, p) < 0.0);
}

TEST_CASE("adaptive quadrature agrees with a dense midpoint rule") {
  CoolingTheoryParams p = paper_like();
  p.waist_y = 5e-6;
  p.waist_z = 2e-5;
  const double u = 5.0;
  CHECK(de_dt(u, p) == doctest::Approx(brute_force(u, p)).epsilon(1e-4));
}

TEST_CASE("axial recoil heating") {
  CoolingTheoryParams p = paper_like();
  p.axial_saturation = 0.0;
  CHECK(recoil_heating(p) == 0.0);
  p.axial_saturation = 5e-3;
  // 2 * gamma0 S N / (3 (1 + S)) * (hbar k)^2 / 2m for 9Be+, 313 nm, 18 MHz, N = 1000
  CHECK(recoil_heating(p) == doctest::Approx(5.617e-20).epsilon(1e-3));
  const double one = recoil_heating(p);
  p.ions *= 3;
  CHECK(recoil_heating(p) == doctest::Approx(3 * one).epsilon(1e-14));
}

TEST_CASE("Doppler limit of the planar balance") {
  const CoolingTheoryParams p = doppler_case(0.01);
  const double T = equilibrium_temperature(p);
  const double doppler = constants::hbar * p.linewidth / (2 * constants::boltzmann);
  CHECK(T > doppler / 2);
  CHECK(T < doppler * 2);

  // independent 1D oracle: bisection on a trapezoid-rule velocity integral
  const double hk = constants::hbar * p.wavenumber, v_rec = 5 * hk / (6 * p.mass), a = p.linewidth / 2;
  auto f = [&](double u) {
    const int n = 40000;
    const double h = 16.0 / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double v = -8.0 + i * h;
      const double b = (p.detuning - p.wavenumber * u * v) / a;
      s += (i == 0 || i == n ? 0.5 : 1.0) * (v + v_rec / u) * std::exp(-v * v) / (1 + 2 * p.saturation + b * b);
    }
    return s;
  };
  double lo = 0.01, hi = 100.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = std::sqrt(lo * hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  const double u = std::sqrt(lo * hi);
  CHECK(T == doctest::Approx(p.mass * u * u / (2 * constants::boltzmann)).epsilon(1e-6));
}

TEST_CASE("planar temperature at the reference beam parameters") {
  const CoolingTheoryParams p = paper_like();
  const double T = equilibrium_temperature(p);
  CHECK(T > 0.0);
  CHECK(T < 2e-3);  // planar energy cools to a few millikelvin or below

  // locally unique: heating below the root, cooling above
  const double u = std::sqrt(2 * constants::boltzmann * T / p.mass);
  const double heat = recoil_heating(p);
  CHECK(de_dt(0.99 * u, p) + heat > 0.0);
  CHECK(de_dt(1.01 * u, p) + heat < 0.0);

  CoolingTheoryParams more = p;
  more.axial_saturation = 5e-2;
  CHECK(equilibrium_temperature(more) >= T);

  CoolingTheoryParams no_wall = p;
  no_wall.wall_torque = false;
  bool differs = true;
  try {
    differs = std::abs(equilibrium_temperature(no_wall) - T) > 0.01 * T;
  } catch (const NoEquilibrium&) {
  }
  CHECK(differs);
}

TEST_CASE("wide beams approach the uniform limit") {
  CoolingTheoryParams wide = paper_like();
  wide.waist_y = wide.waist_z = 1e3;
  CoolingTheoryParams uniform = wide;
  uniform.waist_y = uniform.waist_z = std::numeric_limits<double>::infinity();
  for (double u : {0.5, 5.0, 50.0}) CHECK(de_dt(u, wide) == doctest::Approx(de_dt(u, uniform)).epsilon(1e-6));
}

TEST_CASE("blue detuning has no equilibrium") {
  CoolingTheoryParams p = doppler_case(0.1);
  p.detuning = +p.linewidth;
  CHECK_THROWS_AS(equilibrium_temperature(p), NoEquilibrium);
}

TEST_CASE("temperature maps") {
  const TrapConfig cfg = TrapConfig::defaults();
  CoolingSetup s;
  s.planar_detuning = constants::two_pi * 13.6e6;
  const double d = constants::two_pi * 13.6e6;
  const TemperatureMap one = temperature_map({2.48e-6}, {d}, cfg, 1000, s);
  REQUIRE(one.value(0, 0).has_value());
  CHECK(*one.value(0, 0) == equilibrium_temperature(paper_like()));

  const std::vector<double> w{1e-6, 4e-6}, det{constants::two_pi * 5e6, constants::two_pi * 200e6};
  const TemperatureMap fwd = temperature_map(w, det, cfg, 1000, s);
  const TemperatureMap rev = temperature_map({w[1], w[0]}, {det[1], det[0]}, cfg, 1000, s);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(fwd.value(i, j) == rev.value(1 - i, 1 - j));
  bool any_missing = false;
  for (const auto& v : fwd.values) any_missing = any_missing || !v.has_value();
  CHECK(any_missing);  // far blue of the co-rotating resonance nothing cools
  CHECK_THROWS_AS(temperature_map({}, {d}, cfg, 1000, s), Error);
}
