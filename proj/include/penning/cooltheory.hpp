#pragma once

#include "penning/lasers.hpp"
#include "penning/model.hpp"

#include <optional>
#include <vector>

namespace penning {

/// Uniform-density ellipsoidal crystal cooled by one Gaussian planar beam along +x and
/// two uniform axial beams.
struct CoolingTheoryParams {
  double density = 0.0;       // rho (1/m^3)
  Vec3 axes = Vec3::Zero();   // crystal semi-axes a_x, a_y, a_z (m)
  double ions = 0.0;          // N, for the axial recoil heating
  double mass = 0.0;          // kg
  double rotation = 0.0;      // omega_r (rad/s)
  double saturation = 0.0;    // planar S_0
  double detuning = 0.0;      // planar Delta (rad/s), as it enters the rate
  double offset = 0.0;        // d (m)
  double waist_y = 0.0;       // w_y (m); infinity for a uniform beam
  double waist_z = 0.0;       // w_z (m); infinity for a uniform beam
  double wavenumber = 0.0;    // k (rad/m)
  double linewidth = 0.0;     // gamma_0 (rad/s)
  double axial_saturation = 0.0;
  bool wall_torque = true;    // include the rotating-wall work term

  void validate() const;

  /// Crystal of n ions at the cold-fluid density in the predicted ellipsoid of cfg.
  static CoolingTheoryParams from_crystal(const TrapConfig& cfg, double n, const CoolingSetup& setup);
};

/// Laser plus rotating-wall rate of change of the planar energy (W) at thermal speed
/// u = sqrt(2 k_B T_perp / m).
double de_dt(double u, const CoolingTheoryParams& p);

/// Planar recoil heating from both axial beams (W).
double recoil_heating(const CoolingTheoryParams& p);

/// Raised when the energy balance has no stable root in the speed bracket.
class NoEquilibrium : public Error {
 public:
  using Error::Error;
};

/// T_perp (K) where de_dt + recoil_heating vanishes, cooling above and heating below.
double equilibrium_temperature(const CoolingTheoryParams& p, double u_min = 1e-3, double u_max = 1e3);

struct TemperatureMap {
  std::vector<double> waists;     // w_y (m)
  std::vector<double> detunings;  // Delta_perp (rad/s), quoted in the setup's convention
  // value(i, j) for waist i and detuning j; empty where the balance has no root
  std::vector<std::optional<double>> values;

  const std::optional<double>& value(std::size_t i, std::size_t j) const { return values[i * detunings.size() + j]; }
};

/// equilibrium_temperature for every (w_y, Delta_perp) pair on top of `setup`.
TemperatureMap temperature_map(const std::vector<double>& waists, const std::vector<double>& detunings,
                               const TrapConfig& cfg, double n, const CoolingSetup& setup);

}  // namespace penning
