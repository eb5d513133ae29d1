#pragma once

#include "penning/coulomb.hpp"
#include "penning/model.hpp"

#include <array>
#include <cstdint>

namespace penning {

/// Incomplete elliptic integrals of the first and second kind, modulus k, amplitude theta.
double elliptic_F(double theta, double k);
double elliptic_E(double theta, double k);

/// Ellipsoid with semi-axes along the coordinate axes.
struct EllipsoidShape {
  Vec3 axes = Vec3::Ones();            // a_x, a_y, a_z (m)
  std::array<int, 3> order{0, 1, 2};  // coordinate index of a_1 >= a_2 >= a_3

  double sorted(int i) const { return axes[order[i]]; }
  /// Orders `order` by decreasing length.
  void sort();
};

/// The three shape factors of a uniformly charged ellipsoid with sorted semi-axes
/// a1 >= a2 >= a3, normalised so they sum to one. Inside the ellipsoid the space-charge
/// potential is quadratic with these weights along the a1, a2, a3 directions.
Vec3 shape_factors(double a1, double a2, double a3);

/// The same factors from the incomplete elliptic integrals (requires a1 > a2 > a3).
Vec3 shape_factors_elliptic(double a1, double a2, double a3);

/// Aspect ratios (a_2/a_1, a_3/a_1) of the cold uniform-density crystal. The largest
/// axis lies along the weakest confinement.
std::array<double, 2> ellipsoid_ratios(const TrapConfig& cfg);

/// Unit-a_1 ellipsoid with the predicted ratios, axes assigned to x, y, z.
EllipsoidShape predicted_shape(const TrapConfig& cfg);

/// Cold-fluid ion density (1/m^3): epsilon_0 m omega_p^2 / q^2 with
/// omega_p^2 = 2 omega_r (omega_c - omega_r).
double cold_fluid_density(const TrapConfig& cfg);

/// Scales `shape` so its surface passes through the outermost ion (largest normalised
/// radius). Positions are centred on their mean first.
EllipsoidShape fit_ellipsoid_scale(const Positions& x, const EllipsoidShape& shape);

/// Semi-axes from second moments, a_i = sqrt(5 <x_i^2>), exact for a uniform ellipsoid.
EllipsoidShape fit_ellipsoid_moments(const Positions& x);

struct MinimizeOptions {
  double tolerance = 0.0;  // max gradient component (N); 0 selects 1e-7 of the trap scale
  int max_iterations = 20000;
  int history = 60;
  CoulombSettings coulomb{CoulombMethod::Direct};
};

struct MinimizeReport {
  Positions x;  // rotating frame (m)
  double energy = 0.0;
  double gradient_norm = 0.0;  // max component (N)
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

/// Rotating-frame potential energy (J) and its gradient (N).
double rotating_energy(const Positions& x, const TrapConfig& cfg, const CoulombSettings& coulomb,
                       Eigen::Matrix3Xd* gradient = nullptr);

/// L-BFGS descent from `seed` to a local minimum of the rotating-frame energy.
MinimizeReport minimize_local(const Positions& seed, const TrapConfig& cfg,
                              const MinimizeOptions& options = {});

/// N ions placed uniformly at random inside the predicted cold-fluid ellipsoid.
Positions ellipsoid_seed(int n, const TrapConfig& cfg, std::uint64_t seed);

/// Best of `restarts` local minimisations; each restart nudges the incumbent by Gaussian
/// noise of standard deviation `nudge` (m).
MinimizeReport find_equilibrium(int n, const TrapConfig& cfg, int restarts, double nudge,
                                std::uint64_t seed, const MinimizeOptions& options = {});

}  // namespace penning
