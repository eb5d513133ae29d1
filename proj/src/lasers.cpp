#include "penning/lasers.hpp"

#include "penning/constants.hpp"

#include <cmath>
#include <random>

namespace penning {

void BeamConfig::validate() const {
  if (!(std::abs(direction.norm() - 1.0) < 1e-12)) throw Error("beam direction must be a unit vector");
  if (!(wavenumber > 0.0)) throw Error("beam wavenumber must be positive");
  if (!(linewidth > 0.0)) throw Error("beam linewidth must be positive");
  if (!(saturation >= 0.0) || !std::isfinite(saturation)) throw Error("beam saturation must be non-negative");
  if (!std::isfinite(detuning)) throw Error("beam detuning must be finite");
  if (profile == BeamProfile::Gaussian) {
    if (!(waist_y > 0.0) || !(waist_z > 0.0)) throw Error("beam waists must be positive");
    if (!std::isfinite(offset)) throw Error("beam offset must be finite");
  }
}

double saturation(const BeamConfig& beam, const Vec3& x) {
  if (beam.profile == BeamProfile::Uniform) return beam.saturation;
  const double dy = (x.y() - beam.offset) / beam.waist_y;
  const double dz = x.z() / beam.waist_z;
  return beam.saturation * std::exp(-dy * dy - dz * dz);
}

double scattering_rate(const BeamConfig& beam, const Vec3& x, const Vec3& v) {
  const double s = saturation(beam, x);
  const double half = 0.5 * beam.linewidth;
  const double detune = beam.detuning - beam.wavenumber * beam.direction.dot(v);
  return s * beam.linewidth * half * half / (half * half * (1.0 + 2.0 * s) + detune * detune);
}

int sample_photons(double mean, SplitMix64& rng) {
  if (!(mean >= 0.0)) throw Error("photon mean must be non-negative");
  if (mean == 0.0) return 0;
  std::poisson_distribution<int> poisson(mean);
  return poisson(rng);
}

Vec3 recoil_kick(const BeamConfig& beam, int n, double mass, SplitMix64& rng) {
  if (n <= 0) return Vec3::Zero();
  const double dv = constants::hbar * beam.wavenumber / mass;
  Vec3 kick = double(n) * dv * beam.direction;
  for (int j = 0; j < n; ++j) kick += dv * random_unit_vector(rng);
  return kick;
}

namespace {

double wavenumber_of(const CoolingSetup& s) {
  return s.wavenumber > 0.0 ? s.wavenumber : constants::two_pi / constants::beryllium_wavelength;
}

double linewidth_of(const CoolingSetup& s) {
  return s.linewidth > 0.0 ? s.linewidth : constants::beryllium_linewidth;
}

}  // namespace

double planar_detuning(const CoolingSetup& setup, double rotation_frequency) {
  if (setup.convention == DetuningConvention::Lab) return setup.planar_detuning;
  return wavenumber_of(setup) * rotation_frequency * setup.offset - setup.planar_detuning;
}

std::vector<BeamConfig> standard_setup(const CoolingSetup& setup, double rotation_frequency) {
  const double k = wavenumber_of(setup);
  const double gamma = linewidth_of(setup);

  BeamConfig axial;
  axial.wavenumber = k;
  axial.linewidth = gamma;
  axial.detuning = -0.5 * gamma;
  axial.saturation = setup.axial_saturation;
  axial.direction = Vec3::UnitZ();
  BeamConfig axial_back = axial;
  axial_back.direction = -Vec3::UnitZ();

  BeamConfig planar;
  planar.wavenumber = k;
  planar.linewidth = gamma;
  planar.direction = Vec3::UnitX();
  planar.detuning = planar_detuning(setup, rotation_frequency);
  planar.saturation = setup.planar_saturation;
  planar.profile = BeamProfile::Gaussian;
  planar.offset = setup.offset;
  planar.waist_y = setup.waist_y;
  planar.waist_z = setup.waist_z;

  std::vector<BeamConfig> beams{axial, axial_back, planar};
  for (const auto& b : beams) b.validate();
  return beams;
}

}  // namespace penning
