#pragma once

#include "penning/coulomb.hpp"
#include "penning/lasers.hpp"
#include "penning/model.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace penning {

/// Time at which the trap and wall forces of the kick are evaluated.
enum class ForceTime { Midpoint, Start };

struct StepConfig {
  double dt = 0.0;  // s
  CoulombSettings coulomb;
  std::uint64_t seed = 0;
  ForceTime force_time = ForceTime::Midpoint;

  /// Requires dt > 0 and |omega_c| dt < 0.5.
  void validate(const TrapConfig& cfg) const;
};

/// One fortieth of a cyclotron period.
double default_time_step(const TrapConfig& cfg);

/// Exact motion in the uniform magnetic field alone for a time dt, applied in place.
void u0_drift(IonState& state, double dt, const TrapConfig& cfg);

/// v += F dt / m + laser velocity changes (either may be empty).
void kick(IonState& state, double dt, double mass, const Eigen::Matrix3Xd& forces,
          const Eigen::Matrix3Xd& laser_dv);

/// Lorentz-free forces on every ion at time t: trap, wall and Coulomb.
Eigen::Matrix3Xd total_forces(const Positions& x, double t, const TrapConfig& cfg,
                              const CoulombSettings& coulomb);

/// Photon recoil velocity changes over dt for every ion at the given state; ion i draws
/// from stream (seed, step, i) so the result does not depend on threading.
Eigen::Matrix3Xd laser_kicks(const IonState& state, const TrapConfig& cfg,
                             const std::vector<BeamConfig>& beams, std::uint64_t seed,
                             std::uint64_t step, double dt);

/// Half drift, kick at the midpoint, half drift. step labels the random streams.
void step(IonState& state, const TrapConfig& cfg, const StepConfig& step_cfg,
          const std::vector<BeamConfig>& beams, std::uint64_t step_index);

/// Called with the state after `step` steps (and once before the first step, with 0).
using Observer = std::function<void(const IonState& state, std::uint64_t step)>;

/// Advances n_steps from step index first_step, calling observe every `stride` steps.
void run(IonState& state, const TrapConfig& cfg, const StepConfig& step_cfg,
         const std::vector<BeamConfig>& beams, std::uint64_t n_steps, const Observer& observe,
         std::uint64_t stride = 1, std::uint64_t first_step = 0);

}  // namespace penning
