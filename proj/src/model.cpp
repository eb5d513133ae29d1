#include "penning/model.hpp"

#include "penning/constants.hpp"

#include <cmath>

namespace penning {

IonSpecies IonSpecies::beryllium9() {
  // 9Be atomic mass minus one electron.
  constexpr double mass_u = 9.0121831 - constants::electron_mass_u;
  return {mass_u * constants::atomic_mass_unit, constants::elementary_charge};
}

void IonSpecies::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw Error("ion mass must be positive");
  if (charge == 0.0 || !std::isfinite(charge)) throw Error("ion charge must be non-zero");
}

double TrapConfig::axial_frequency() const {
  return std::sqrt(species.charge * trap_strength / species.mass);
}

void TrapConfig::validate() const {
  species.validate();
  if (!(magnetic_field > 0.0)) throw Error("magnetic field must be positive");
  if (!(species.charge * trap_strength > 0.0)) throw Error("trap strength must confine axially");
  if (!(wall_strength >= 0.0)) throw Error("rotating wall strength must be non-negative");
  const double wc = std::abs(cyclotron_frequency());
  if (!(rotation_frequency > 0.0 && rotation_frequency < wc))
    throw Error("rotation frequency must lie in (0, omega_c)");
}

TrapConfig TrapConfig::from_axial_frequency(const IonSpecies& species, double magnetic_field,
                                            double omega_z, double wall_strength,
                                            double rotation_frequency) {
  TrapConfig cfg;
  cfg.species = species;
  cfg.magnetic_field = magnetic_field;
  cfg.trap_strength = species.mass * omega_z * omega_z / species.charge;
  cfg.wall_strength = wall_strength;
  cfg.rotation_frequency = rotation_frequency;
  return cfg;
}

TrapConfig TrapConfig::defaults() {
  TrapConfig cfg = from_axial_frequency(IonSpecies::beryllium9(), 4.4588,
                                        constants::two_pi * 1.58e6, 0.0, 1.0);
  cfg.rotation_frequency = rotation_for_beta(cfg, 1.0);
  cfg.wall_strength = 0.01 * beta(cfg);
  return cfg;
}

double beta(const TrapConfig& cfg) {
  const double wr = cfg.rotation_frequency;
  const double wz = cfg.axial_frequency();
  return wr * (cfg.cyclotron_frequency() - wr) / (wz * wz) - 0.5;
}

Vec3 confinement_coefficients(const TrapConfig& cfg) {
  const double b = beta(cfg);
  const double half_delta = 0.5 * cfg.wall_strength;
  return {b + half_delta, b - half_delta, 1.0};
}

double rotation_for_beta(const TrapConfig& cfg, double target_beta, RotationBranch branch) {
  const double wc = cfg.cyclotron_frequency();
  const double wz = cfg.axial_frequency();
  const double product = (target_beta + 0.5) * wz * wz;
  const double disc = wc * wc - 4.0 * product;
  if (disc < 0.0) throw Error("requested beta is not reachable for this field");
  const double root = std::sqrt(disc);
  // Low root written without cancellation.
  const double low = 2.0 * product / (wc + root);
  return branch == RotationBranch::Low ? low : product / low;
}

double external_potential(const Vec3& x, double t, const TrapConfig& cfg) {
  const double kz = cfg.trap_strength;
  const double r2 = x.x() * x.x() + x.y() * x.y();
  const double trap = 0.25 * kz * (2.0 * x.z() * x.z() - r2);
  const double phase = 2.0 * cfg.rotation_frequency * t;
  // r^2 cos(2 phi + 2 omega_r t) = (x^2 - y^2) cos - 2 x y sin
  const double wall = 0.25 * kz * cfg.wall_strength *
                      ((x.x() * x.x() - x.y() * x.y()) * std::cos(phase) -
                       2.0 * x.x() * x.y() * std::sin(phase));
  return trap + wall;
}

namespace {

struct WallPhase {
  double c, s;
};

inline Vec3 force_at(const Vec3& x, const WallPhase& w, double q, double kz, double delta) {
  const double gx = -0.5 * kz * x.x() + 0.5 * kz * delta * (x.x() * w.c - x.y() * w.s);
  const double gy = -0.5 * kz * x.y() - 0.5 * kz * delta * (x.y() * w.c + x.x() * w.s);
  const double gz = kz * x.z();
  return -q * Vec3(gx, gy, gz);
}

}  // namespace

Vec3 external_force(const Vec3& x, double t, const TrapConfig& cfg) {
  const double phase = 2.0 * cfg.rotation_frequency * t;
  return force_at(x, {std::cos(phase), std::sin(phase)}, cfg.species.charge, cfg.trap_strength,
                  cfg.wall_strength);
}

Eigen::Matrix3Xd external_forces(const Positions& x, double t, const TrapConfig& cfg) {
  const double phase = 2.0 * cfg.rotation_frequency * t;
  const WallPhase w{std::cos(phase), std::sin(phase)};
  Eigen::Matrix3Xd f(3, x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    f.col(i) = force_at(x.col(i), w, cfg.species.charge, cfg.trap_strength, cfg.wall_strength);
  return f;
}

void IonState::validate() const {
  if (x.cols() < 1) throw Error("ion state must hold at least one ion");
  if (v.cols() != x.cols()) throw Error("position and velocity counts differ");
  if (!x.allFinite() || !v.allFinite() || !std::isfinite(t))
    throw Error("ion state contains non-finite entries");
}

Eigen::Matrix3d rotating_frame_matrix(double t, const TrapConfig& cfg) {
  const double angle = cfg.rotation_frequency * t;
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Vec3 corotation_velocity(const Vec3& x, const TrapConfig& cfg) {
  return cfg.rotation_frequency * Vec3(x.y(), -x.x(), 0.0);
}

RotatingState to_rotating_frame(const IonState& state, const TrapConfig& cfg) {
  const Eigen::Matrix3d rot = rotating_frame_matrix(state.t, cfg);
  RotatingState out;
  out.x = rot * state.x;
  // v_r = R (v + omega_r z^ x x)
  Eigen::Matrix3Xd swirl(3, state.size());
  swirl.row(0) = -state.x.row(1);
  swirl.row(1) = state.x.row(0);
  swirl.row(2).setZero();
  out.v = rot * (state.v + cfg.rotation_frequency * swirl);
  return out;
}

IonState from_rotating_frame(const RotatingState& rotating, double t, const TrapConfig& cfg) {
  const Eigen::Matrix3d inv = rotating_frame_matrix(t, cfg).transpose();
  IonState out;
  out.t = t;
  out.x = inv * rotating.x;
  Eigen::Matrix3Xd swirl(3, out.x.cols());
  swirl.row(0) = -out.x.row(1);
  swirl.row(1) = out.x.row(0);
  swirl.row(2).setZero();
  out.v = inv * rotating.v - cfg.rotation_frequency * swirl;
  return out;
}

Eigen::VectorXd rotating_trap_energies(const Positions& x_rot, const TrapConfig& cfg) {
  const Vec3 c = confinement_coefficients(cfg);
  const double wz = cfg.axial_frequency();
  const double scale = 0.5 * cfg.species.mass * wz * wz;
  return scale * (c.asDiagonal() * x_rot.cwiseAbs2()).colwise().sum().transpose();
}

Eigen::Matrix3Xd rotating_trap_gradient(const Positions& x_rot, const TrapConfig& cfg) {
  const Vec3 c = confinement_coefficients(cfg);
  const double wz = cfg.axial_frequency();
  return cfg.species.mass * wz * wz * (c.asDiagonal() * x_rot);
}

double rotating_potential_energy(const Positions& x_rot, const TrapConfig& cfg,
                                 const Eigen::VectorXd& coulomb_phi) {
  const Vec3 c = confinement_coefficients(cfg);
  if (!(c.x() > 0.0) || !(c.y() > 0.0))
    throw Error("rotating-frame potential is not confining (C_x or C_y <= 0)");
  if (coulomb_phi.size() != x_rot.cols()) throw Error("coulomb potential length mismatch");
  return rotating_trap_energies(x_rot, cfg).sum() + 0.5 * cfg.species.charge * coulomb_phi.sum();
}

EnergyReport energy_report(const IonState& state, const TrapConfig& cfg,
                           const Eigen::VectorXd& coulomb_phi) {
  const RotatingState rot = to_rotating_frame(state, cfg);
  const double half_m = 0.5 * cfg.species.mass;
  EnergyReport r;
  r.kinetic_planar = half_m * rot.v.topRows<2>().squaredNorm();
  r.kinetic_axial = half_m * rot.v.row(2).squaredNorm();
  r.kinetic_rotating = r.kinetic_planar + r.kinetic_axial;
  r.potential_rotating = rotating_potential_energy(rot.x, cfg, coulomb_phi);
  r.total = r.kinetic_rotating + r.potential_rotating;
  return r;
}

}  // namespace penning
