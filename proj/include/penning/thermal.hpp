#pragma once

#include "penning/model.hpp"
#include "penning/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace penning {

struct ThermalInitConfig {
  double temperature = 0.0;  // T_i (K)
  double step = 1e-6;        // largest trial displacement (m)
  int scans = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Maxwell-Boltzmann velocities (rotating frame): speed distributed as
/// 4 pi (m / 2 pi k T)^{3/2} v^2 exp(-m v^2 / 2 k T), isotropic direction.
Velocities sample_velocities(Eigen::Index n, double temperature, double mass, SplitMix64& rng);

/// Lab-frame state from rotating-frame positions and velocities at time t.
IonState thermal_state(const Positions& x_rot, const Velocities& v_rot, double t, const TrapConfig& cfg);

struct MetropolisReport {
  Positions x;                 // rotating frame
  double energy_change = 0.0;  // final minus initial potential energy (J)
  double acceptance = 0.0;     // accepted / attempted moves
};

/// Called after every scan with the current configuration and its energy change.
using ScanObserver = std::function<void(const Positions&, double energy_change, int scan)>;

/// Metropolis sampling of the rotating-frame potential at T_i. Each scan visits every ion
/// once with a move of length uniform in (0, step) along a random direction. Energies are
/// updated incrementally with direct Coulomb sums.
MetropolisReport metropolis_positions(const Positions& x_eq, const TrapConfig& cfg,
                                      const ThermalInitConfig& init, const ScanObserver& observer = {});

struct TemperatureReport {
  double axial = 0.0;      // K
  double planar = 0.0;     // K
  double potential = 0.0;  // K
  double window = 0.0;     // s
  int samples = 0;
  bool negative_potential = false;
};

/// Time averages for the kinetic and potential temperatures. Velocities are taken in the
/// frame rotating with the crystal, so rigid rotation contributes nothing.
class TemperatureAccumulator {
 public:
  TemperatureAccumulator(const TrapConfig& cfg, Eigen::Index n);

  /// potential_energy is the rotating-frame potential energy of the state (J).
  void add(const IonState& lab, double potential_energy);
  void add_rotating(const RotatingState& state, double potential_energy, double t);

  /// reference_energy is the potential energy of the reference minimum.
  TemperatureReport report(double reference_energy) const;

  int samples() const { return samples_; }
  double lowest_energy() const { return lowest_energy_; }
  /// Rotating-frame positions of the lowest-energy sample.
  const Positions& lowest_configuration() const { return lowest_; }
  void reset();

 private:
  TrapConfig cfg_;
  Eigen::Index n_;
  int samples_ = 0;
  double sum_vz2_ = 0.0, sum_vp2_ = 0.0, sum_pe_ = 0.0;
  double t_first_ = 0.0, t_last_ = 0.0;
  double lowest_energy_ = 0.0;
  Positions lowest_;
};

/// Per-ion root-mean-square displacement about the mean position over a window.
class DisplacementAccumulator {
 public:
  void add(const Positions& x_rot);
  Eigen::VectorXd rms() const;
  int samples() const { return samples_; }

 private:
  int samples_ = 0;
  Positions origin_;
  Eigen::Matrix3Xd sum_;
  Eigen::VectorXd sum2_;
};

/// sqrt(sum |a_i - b_i|^2 / sum |b_i|^2), b taken as the reference.
double position_error(const Positions& a, const Positions& b);
std::vector<double> position_error(const std::vector<Positions>& a, const std::vector<Positions>& b);
/// |E_a - E_b| / |E_b| per sample.
std::vector<double> energy_error(const std::vector<double>& a, const std::vector<double>& b);

/// Interparticle spacing zeta with V / N = 4/3 pi zeta^3.
double interparticle_spacing(double volume, Eigen::Index n);

}  // namespace penning
