#include "penning/integrator.hpp"

#include "penning/constants.hpp"

#include <cmath>

namespace penning {

void StepConfig::validate(const TrapConfig& cfg) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("time step must be positive");
  if (!(std::abs(cfg.cyclotron_frequency()) * dt < 0.5))
    throw Error("time step does not resolve the cyclotron motion (|omega_c| dt >= 0.5)");
}

double default_time_step(const TrapConfig& cfg) {
  return constants::two_pi / std::abs(cfg.cyclotron_frequency()) / 40.0;
}

void u0_drift(IonState& state, double dt, const TrapConfig& cfg) {
  const double wc = cfg.cyclotron_frequency();
  const double th = wc * dt;
  const double c = std::cos(th), s = std::sin(th);
  // sin(th)/wc and (1 - cos th)/wc, written to stay accurate for small th
  const double a = wc != 0.0 ? s / wc : dt;
  const double b = wc != 0.0 ? 2.0 * std::sin(0.5 * th) * std::sin(0.5 * th) / wc : 0.0;
  const Eigen::Index n = state.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double vx = state.v(0, i), vy = state.v(1, i);
    state.x(0, i) += a * vx + b * vy;
    state.x(1, i) += a * vy - b * vx;
    state.x(2, i) += dt * state.v(2, i);
    state.v(0, i) = c * vx + s * vy;
    state.v(1, i) = c * vy - s * vx;
  }
  state.t += dt;
}

void kick(IonState& state, double dt, double mass, const Eigen::Matrix3Xd& forces,
          const Eigen::Matrix3Xd& laser_dv) {
  if (forces.cols() == state.size()) state.v += (dt / mass) * forces;
  if (laser_dv.cols() == state.size()) state.v += laser_dv;
}

Eigen::Matrix3Xd total_forces(const Positions& x, double t, const TrapConfig& cfg,
                              const CoulombSettings& coulomb) {
  Eigen::Matrix3Xd f = external_forces(x, t, cfg);
  if (x.cols() > 1) {
    const FieldResult field = coulomb_solve(ChargeSystem::identical(x, cfg.species.charge), coulomb);
    f += cfg.species.charge * field.E;
  }
  return f;
}

Eigen::Matrix3Xd laser_kicks(const IonState& state, const TrapConfig& cfg,
                             const std::vector<BeamConfig>& beams, std::uint64_t seed,
                             std::uint64_t step, double dt) {
  const Eigen::Index n = state.size();
  Eigen::Matrix3Xd dv = Eigen::Matrix3Xd::Zero(3, n);
  if (beams.empty()) return dv;
  const double mass = cfg.species.mass;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    SplitMix64 rng = stream(seed, step, std::uint64_t(i));
    const Vec3 x = state.x.col(i), v = state.v.col(i);
    Vec3 sum = Vec3::Zero();
    for (const BeamConfig& beam : beams) {
      const int photons = sample_photons(scattering_rate(beam, x, v) * dt, rng);
      sum += recoil_kick(beam, photons, mass, rng);
    }
    dv.col(i) = sum;
  }
  return dv;
}

void step(IonState& state, const TrapConfig& cfg, const StepConfig& step_cfg,
          const std::vector<BeamConfig>& beams, std::uint64_t step_index) {
  const double dt = step_cfg.dt;
  const double t0 = state.t;
  u0_drift(state, 0.5 * dt, cfg);
  const double t_force = step_cfg.force_time == ForceTime::Midpoint ? state.t : t0;
  const Eigen::Matrix3Xd forces = total_forces(state.x, t_force, cfg, step_cfg.coulomb);
  const Eigen::Matrix3Xd dv = laser_kicks(state, cfg, beams, step_cfg.seed, step_index, dt);
  kick(state, dt, cfg.species.mass, forces, dv);
  u0_drift(state, 0.5 * dt, cfg);
  // keep t exact rather than accumulating two half steps
  state.t = t0 + dt;
}

void run(IonState& state, const TrapConfig& cfg, const StepConfig& step_cfg,
         const std::vector<BeamConfig>& beams, std::uint64_t n_steps, const Observer& observe,
         std::uint64_t stride, std::uint64_t first_step) {
  step_cfg.validate(cfg);
  state.validate();
  if (stride == 0) stride = 1;
  if (observe) observe(state, first_step);
  for (std::uint64_t k = 0; k < n_steps; ++k) {
    const std::uint64_t index = first_step + k;
    step(state, cfg, step_cfg, beams, index);
    if (observe && ((k + 1) % stride == 0 || k + 1 == n_steps)) observe(state, index + 1);
  }
}

}  // namespace penning
