#pragma once

#include "penning/model.hpp"
#include "penning/rng.hpp"

#include <vector>

namespace penning {

enum class BeamProfile { Uniform, Gaussian };

/// A cooling beam fixed in the lab frame.
struct BeamConfig {
  Vec3 direction = Vec3::UnitZ();  // unit propagation direction
  double wavenumber = 0.0;         // k (rad/m)
  double detuning = 0.0;           // Delta (rad/s), laser minus atomic resonance
  double saturation = 0.0;         // peak S_0
  double linewidth = 0.0;          // gamma_0 (rad/s)
  BeamProfile profile = BeamProfile::Uniform;
  // Gaussian profile exp[-(y - offset)^2 / w_y^2 - z^2 / w_z^2]; only used for Gaussian beams
  // propagating along x.
  double offset = 0.0;
  double waist_y = 0.0;
  double waist_z = 0.0;

  void validate() const;
};

/// Local saturation parameter at lab position x.
double saturation(const BeamConfig& beam, const Vec3& x);

/// Photon absorption rate (1/s) of an ion at lab position x moving with lab velocity v.
double scattering_rate(const BeamConfig& beam, const Vec3& x, const Vec3& v);

/// Poisson draw with the given mean (rate * dt).
int sample_photons(double mean, SplitMix64& rng);

/// Velocity change from n absorbed photons and n isotropic re-emissions.
Vec3 recoil_kick(const BeamConfig& beam, int n, double mass, SplitMix64& rng);

/// How a planar detuning is quoted. Lab: Delta enters the rate directly. Comoving: the
/// quoted value is the red shift below the Doppler-shifted resonance of an ion co-rotating
/// at y = d, so Delta = k omega_r d - quoted.
enum class DetuningConvention { Lab, Comoving };

struct CoolingSetup {
  double planar_detuning = 0.0;  // Delta_perp (rad/s), as quoted
  DetuningConvention convention = DetuningConvention::Lab;
  double waist_y = 2.48e-6;
  double waist_z = 1.0;  // effectively uniform along z
  double offset = 5e-6;
  double planar_saturation = 0.5;
  double axial_saturation = 5e-3;
  double wavenumber = 0.0;  // 0 selects 2 pi / 313 nm
  double linewidth = 0.0;   // 0 selects 2 pi 18 MHz
};

/// Detuning entering the rate for the planar beam.
double planar_detuning(const CoolingSetup& setup, double rotation_frequency);

/// Two counter-propagating uniform axial beams at -gamma_0/2 and one Gaussian planar beam
/// along +x offset to y = d.
std::vector<BeamConfig> standard_setup(const CoolingSetup& setup, double rotation_frequency);

}  // namespace penning
