#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace penning {

using Vec3 = Eigen::Vector3d;
/// Column i holds the coordinates of ion i.
using Positions = Eigen::Matrix3Xd;
using Velocities = Eigen::Matrix3Xd;

/// Thrown for invalid inputs and unphysical configurations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IonSpecies {
  double mass = 0.0;    // kg
  double charge = 0.0;  // C

  static IonSpecies beryllium9();
  void validate() const;
};

/// Static trap, field and rotating-wall parameters. All quantities SI.
struct TrapConfig {
  IonSpecies species = IonSpecies::beryllium9();
  double magnetic_field = 0.0;      // B (T), along +z
  double trap_strength = 0.0;       // k_z (V/m^2)
  double wall_strength = 0.0;       // delta (dimensionless)
  double rotation_frequency = 0.0;  // omega_r (rad/s)

  /// Signed cyclotron frequency q B / m.
  double cyclotron_frequency() const { return species.charge * magnetic_field / species.mass; }
  double axial_frequency() const;
  /// B - 2 m omega_r / q, the field seen in the rotating frame.
  double effective_field() const {
    return magnetic_field - 2.0 * species.mass * rotation_frequency / species.charge;
  }

  /// Throws penning::Error when the configuration is not a confining Penning trap.
  void validate() const;

  /// k_z from the axial frequency omega_z = sqrt(q k_z / m).
  static TrapConfig from_axial_frequency(const IonSpecies& species, double magnetic_field,
                                         double omega_z, double wall_strength,
                                         double rotation_frequency);

  /// B = 4.4588 T, f_z = 1.58 MHz, omega_r giving beta = 1, delta = 0.01 beta.
  static TrapConfig defaults();
};

/// Planar-to-axial confinement ratio omega_r (omega_c - omega_r) / omega_z^2 - 1/2.
double beta(const TrapConfig& cfg);

/// (C_x, C_y, C_z) of the rotating-frame potential 1/2 m omega_z^2 sum C_a x_a^2.
Vec3 confinement_coefficients(const TrapConfig& cfg);

enum class RotationBranch { Low, High };

/// Rotation frequency giving the requested beta: solves omega_r (omega_c - omega_r) =
/// (beta + 1/2) omega_z^2. The low branch is the slowly rotating (magnetron side) root.
double rotation_for_beta(const TrapConfig& cfg, double target_beta,
                         RotationBranch branch = RotationBranch::Low);

/// phi_trap + phi_wall in the lab frame (V).
double external_potential(const Vec3& x, double t, const TrapConfig& cfg);

/// -q grad(phi_trap + phi_wall) at (x, t). The magnetic force is not included.
Vec3 external_force(const Vec3& x, double t, const TrapConfig& cfg);
Eigen::Matrix3Xd external_forces(const Positions& x, double t, const TrapConfig& cfg);

struct IonState {
  Positions x;     // lab frame (m)
  Velocities v;    // lab frame (m/s)
  double t = 0.0;  // s

  Eigen::Index size() const { return x.cols(); }
  void validate() const;
};

/// Coordinates in the frame rotating with the crystal.
struct RotatingState {
  Positions x;
  Velocities v;
};

/// Rotation angle omega_r t of the lab -> rotating map.
Eigen::Matrix3d rotating_frame_matrix(double t, const TrapConfig& cfg);

RotatingState to_rotating_frame(const IonState& state, const TrapConfig& cfg);
IonState from_rotating_frame(const RotatingState& rotating, double t, const TrapConfig& cfg);

/// Lab-frame velocity of rigid co-rotation at position x.
Vec3 corotation_velocity(const Vec3& x, const TrapConfig& cfg);

/// Trap part of the rotating-frame potential energy of every ion: 1/2 m omega_z^2 sum C_a x_a^2.
Eigen::VectorXd rotating_trap_energies(const Positions& x_rot, const TrapConfig& cfg);

/// Gradient of the trap part (N), column per ion.
Eigen::Matrix3Xd rotating_trap_gradient(const Positions& x_rot, const TrapConfig& cfg);

/// Total rotating-frame potential energy (J). coulomb_phi holds the Coulomb potential (V)
/// at every ion due to all others; the pair sum is halved.
double rotating_potential_energy(const Positions& x_rot, const TrapConfig& cfg,
                                 const Eigen::VectorXd& coulomb_phi);

struct EnergyReport {
  double kinetic_rotating = 0.0;
  double potential_rotating = 0.0;
  double total = 0.0;
  double kinetic_planar = 0.0;
  double kinetic_axial = 0.0;
};

/// coulomb_phi must be evaluated at the state's positions (rotation leaves it invariant).
EnergyReport energy_report(const IonState& state, const TrapConfig& cfg,
                           const Eigen::VectorXd& coulomb_phi);

}  // namespace penning
