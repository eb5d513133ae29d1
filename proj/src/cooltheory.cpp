#include "penning/cooltheory.hpp"

#include "penning/constants.hpp"
#include "penning/equilibrium.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>

namespace penning {

namespace {

constexpr double kRelTol = 1e-8;

template <class F>
double integrate(F f, double a, double b, double tol = kRelTol) {
  return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 15, tol);
}

// integral over the normalised velocity v = (v_x - omega_r y) / u of
// (v + c) exp(-v^2) gamma_L / (gamma_0 S_0 g) at fixed (y, z), g the Gaussian weight
double velocity_integral(double u, double y, double g, const CoolingTheoryParams& p, double c) {
  const double half = 0.5 * p.linewidth;
  const double sat = 1.0 + 2.0 * p.saturation * g;
  // Delta - k v_x = (Delta - k omega_r y) - k u v
  const double shift = p.detuning - p.wavenumber * p.rotation * y;
  auto f = [&](double v) {
    const double det = (shift - p.wavenumber * u * v) / half;
    return (v + c) * std::exp(-v * v) / (sat + det * det);
  };
  const double lim = 8.0;
  const double centre = shift / (p.wavenumber * u);
  if (centre > -lim && centre < lim) return integrate(f, -lim, centre) + integrate(f, centre, lim);
  return integrate(f, -lim, lim);
}

}  // namespace

void CoolingTheoryParams::validate() const {
  if (!(density > 0.0)) throw Error("density must be positive");
  if (!(axes.minCoeff() > 0.0) || !axes.allFinite()) throw Error("crystal semi-axes must be positive");
  if (!(ions >= 0.0)) throw Error("ion count must be non-negative");
  if (!(mass > 0.0)) throw Error("mass must be positive");
  if (!(saturation >= 0.0) || !(axial_saturation >= 0.0)) throw Error("saturation must be non-negative");
  if (!(waist_y > 0.0) || !(waist_z > 0.0)) throw Error("beam waists must be positive");
  if (!(wavenumber > 0.0) || !(linewidth > 0.0)) throw Error("wavenumber and linewidth must be positive");
  if (!std::isfinite(detuning) || !std::isfinite(offset) || !std::isfinite(rotation))
    throw Error("detuning, offset and rotation must be finite");
}

CoolingTheoryParams CoolingTheoryParams::from_crystal(const TrapConfig& cfg, double n, const CoolingSetup& setup) {
  if (!(n > 0.0)) throw Error("ion count must be positive");
  CoolingTheoryParams p;
  p.density = cold_fluid_density(cfg);
  const EllipsoidShape unit = predicted_shape(cfg);
  const double scale = std::cbrt(n / p.density / (4.0 / 3.0 * constants::pi * unit.axes.prod()));
  p.axes = unit.axes * scale;
  p.ions = n;
  p.mass = cfg.species.mass;
  p.rotation = cfg.rotation_frequency;
  p.saturation = setup.planar_saturation;
  p.detuning = planar_detuning(setup, cfg.rotation_frequency);
  p.offset = setup.offset;
  p.waist_y = setup.waist_y;
  p.waist_z = setup.waist_z;
  p.wavenumber = setup.wavenumber > 0.0 ? setup.wavenumber : constants::two_pi / constants::beryllium_wavelength;
  p.linewidth = setup.linewidth > 0.0 ? setup.linewidth : constants::beryllium_linewidth;
  p.axial_saturation = setup.axial_saturation;
  return p;
}

double de_dt(double u, const CoolingTheoryParams& p) {
  p.validate();
  if (!(u > 0.0)) throw Error("thermal speed must be positive");
  if (p.saturation == 0.0) return 0.0;
  const double hk = constants::hbar * p.wavenumber;
  const double v_rec = 5.0 * hk / (6.0 * p.mass);
  const double ax = p.axes.x(), ay = p.axes.y(), az = p.axes.z();

  // y = a_y sin(alpha), z = a_z cos(alpha) sin(beta): the chord length along x becomes
  // 2 a_x cos(alpha) cos(beta) and the Jacobian a_y a_z cos^2(alpha) cos(beta)
  auto inner = [&](double alpha) {
    const double ca = std::cos(alpha), y = ay * std::sin(alpha);
    const double dy = std::isinf(p.waist_y) ? 0.0 : (y - p.offset) / p.waist_y;
    auto over_z = [&](double beta) {
      const double cb = std::cos(beta), z = az * ca * std::sin(beta);
      const double dz = std::isinf(p.waist_z) ? 0.0 : z / p.waist_z;
      const double g = std::exp(-dy * dy - dz * dz);
      if (g == 0.0) return 0.0;
      const double weight = 2.0 * ax * ay * az * ca * ca * ca * cb * cb;
      // per photon hbar k (v_x - omega_r y) + 5/3 hbar^2 k^2 / 2m = hbar k u (v + v_rec / u);
      // without the wall work the omega_r y part stays in
      const double c = (v_rec + (p.wall_torque ? 0.0 : p.rotation * y)) / u;
      return weight * g * velocity_integral(u, y, g, p, c);
    };
    return integrate(over_z, -constants::pi / 2, constants::pi / 2);
  };
  const double total = integrate(inner, -constants::pi / 2, constants::pi / 2);
  return p.linewidth * p.saturation * p.density * hk * u / std::sqrt(constants::pi) * total;
}

double recoil_heating(const CoolingTheoryParams& p) {
  if (!(p.axial_saturation >= 0.0)) throw Error("saturation must be non-negative");
  const double hk = constants::hbar * p.wavenumber;
  const double one = p.linewidth * p.axial_saturation * p.ions / (3.0 * (1.0 + p.axial_saturation)) * hk * hk /
                     (2.0 * p.mass);
  return 2.0 * one;
}

double equilibrium_temperature(const CoolingTheoryParams& p, double u_min, double u_max) {
  p.validate();
  if (!(u_min > 0.0) || !(u_max > u_min)) throw Error("invalid speed bracket");
  const double heating = recoil_heating(p);
  auto balance = [&](double u) { return de_dt(u, p) + heating; };
  // walk up geometrically to the first heating -> cooling sign change
  double lo = u_min, f_lo = balance(lo);
  double hi = lo, f_hi = f_lo;
  bool found = false;
  while (hi < u_max) {
    hi = std::min(hi * 2.0, u_max);
    f_hi = balance(hi);
    if (f_lo > 0.0 && f_hi <= 0.0) {
      found = true;
      break;
    }
    lo = hi;
    f_lo = f_hi;
  }
  if (!found) throw NoEquilibrium("no equilibrium planar temperature: the energy balance does not change sign");
  std::uintmax_t iterations = 100;
  const auto r = boost::math::tools::toms748_solve(balance, lo, hi, f_lo, f_hi,
                                                   boost::math::tools::eps_tolerance<double>(40), iterations);
  const double u = 0.5 * (r.first + r.second);
  return p.mass * u * u / (2.0 * constants::boltzmann);
}

TemperatureMap temperature_map(const std::vector<double>& waists, const std::vector<double>& detunings,
                               const TrapConfig& cfg, double n, const CoolingSetup& setup) {
  if (waists.empty() || detunings.empty()) throw Error("temperature map grid is empty");
  TemperatureMap map;
  map.waists = waists;
  map.detunings = detunings;
  map.values.assign(waists.size() * detunings.size(), std::nullopt);
  const long cells = long(map.values.size());
  const CoolingTheoryParams base = CoolingTheoryParams::from_crystal(cfg, n, setup);
#pragma omp parallel for schedule(dynamic, 1)
  for (long c = 0; c < cells; ++c) {
    const std::size_t i = std::size_t(c) / detunings.size(), j = std::size_t(c) % detunings.size();
    CoolingSetup cell = setup;
    cell.waist_y = waists[i];
    cell.planar_detuning = detunings[j];
    CoolingTheoryParams p = base;
    p.waist_y = cell.waist_y;
    p.detuning = planar_detuning(cell, cfg.rotation_frequency);
    try {
      map.values[std::size_t(c)] = equilibrium_temperature(p);
    } catch (const NoEquilibrium&) {
    }
  }
  return map;
}

}  // namespace penning
