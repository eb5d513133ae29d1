#pragma once

#include "penning/equilibrium.hpp"
#include "penning/model.hpp"

#include <string>
#include <vector>

namespace penning {

/// Hessian of the rotating-frame potential, 3N x 3N. Coordinates are ordered by block:
/// index a * N + i is component a of ion i, so block (a, b) is K^{ab}.
Eigen::MatrixXd stiffness_matrix(const Positions& x_rot, const TrapConfig& cfg);

/// Linearised rotating-frame dynamics d/dt (r, v) = D (r, v), 6N x 6N.
Eigen::MatrixXd dynamical_matrix(const Eigen::MatrixXd& K, const TrapConfig& cfg, Eigen::Index n);

enum class Branch { ExB, Axial, Cyclotron };
const char* branch_name(Branch b);

struct ModeSpectrum {
  Eigen::Index ions = 0;
  Eigen::VectorXd omega;     // rad/s, ascending
  Eigen::MatrixXcd vectors;  // 6N x modes, velocity part normalised to 1
  Eigen::VectorXd energy_ratio;
  Eigen::VectorXd axial_fraction;
  std::vector<Branch> branch;
  int zero_modes = 0;              // modes at zero frequency, excluded above
  double branch_separation = 0.0;  // see classify_branches
  bool branches_resolved = true;

  Eigen::Index size() const { return omega.size(); }
  /// Position (velocity) part of mode k.
  Eigen::VectorXcd position(Eigen::Index k) const { return vectors.col(k).head(3 * ions); }
  Eigen::VectorXcd velocity(Eigen::Index k) const { return vectors.col(k).tail(3 * ions); }
};

/// Raised when the linearised dynamics has growing modes.
class UnstableEquilibrium : public Error {
 public:
  UnstableEquilibrium(const std::string& what, std::vector<std::complex<double>> eigenvalues)
      : Error(what), eigenvalues(std::move(eigenvalues)) {}
  std::vector<std::complex<double>> eigenvalues;
};

struct ModeOptions {
  double growth_tolerance = 1e-6;  // allowed Re(lambda) relative to the largest |lambda|
  double zero_tolerance = 1e-7;    // |lambda| below this (relative) counts as a zero mode
};

/// Positive-frequency eigenmodes of D, with R_n, f_n^z and branch labels filled in.
/// D u = -i omega u for every returned vector.
ModeSpectrum eigenmodes(const Eigen::MatrixXd& D, const Eigen::MatrixXd& K, double mass,
                        const ModeOptions& options = {});

/// stiffness_matrix, dynamical_matrix and eigenmodes in one call.
ModeSpectrum normal_modes(const Positions& x_rot, const TrapConfig& cfg,
                          const ModeOptions& options = {});

/// Tightens an approximate equilibrium to a true local minimum: descends to a much
/// smaller gradient and, while the Hessian has a negative eigenvalue, steps down that
/// direction and descends again. Very flat saddles (e.g. crystal orientation relative to
/// a weak wall) pass the ordinary gradient test but give growing modes.
MinimizeReport refine_minimum(const Positions& x_rot, const TrapConfig& cfg, int rounds = 5);

/// Time-averaged potential over kinetic energy of a mode.
double mode_energy_ratio(const Eigen::VectorXcd& u, const Eigen::MatrixXd& K, double mass);
/// |u^z|^2 / |u^r|^2.
double axial_fraction(const Eigen::VectorXcd& u);

/// Splits log-frequencies into three contiguous groups (least within-group spread),
/// labelled ExB, axial, cyclotron in ascending order. The separation score is the
/// smaller of the two boundary gaps in log omega, each divided by the larger mean level
/// spacing of its two groups; branches count as resolved when it exceeds `threshold`.
void classify_branches(ModeSpectrum& spectrum, double threshold = 2.0);

}  // namespace penning
