#pragma once

#include "penning/config.hpp"
#include "penning/cooltheory.hpp"
#include "penning/io.hpp"

#include <functional>
#include <string>
#include <vector>

namespace penning {

/// A run that produced non-finite values or could not reach a required state.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, nlohmann::json details = nlohmann::json::object())
      : Error(what), details(std::move(details)) {}
  nlohmann::json details;
};

/// Reference crystal and the state the dynamics starts from.
struct CrystalStart {
  Positions equilibrium;  // rotating frame (m)
  double energy = 0.0;    // potential energy of the equilibrium (J)
  double gradient_norm = 0.0;
  bool converged = true;  // false when the search stopped on its iteration limit
  IonState state;         // lab frame, t = 0
};

/// Equilibrium from init.equilibrium_file or a fresh search, then a thermal or cold state.
CrystalStart prepare_crystal(const RunConfig& cfg);

/// One diagnostics row: window averages over the samples since the previous row.
struct DiagnosticRow {
  double t = 0.0;               // end of the window (s)
  double axial = 0.0;           // K
  double planar = 0.0;          // K
  double potential = 0.0;       // K, relative to the reference energy
  double total_energy = 0.0;    // rotating-frame energy at t (J)
  double mean_potential = 0.0;  // window mean of the potential energy (J)
  int samples = 0;
};

struct CoolingTrace {
  std::vector<DiagnosticRow> rows;  // the first row is the initial state alone
  IonState final_state;
  Positions lowest;  // rotating-frame sample of lowest potential energy
  double lowest_energy = 0.0;
  double reference_energy = 0.0;
};

using SnapshotHook = std::function<void(const IonState&, std::uint64_t step)>;

/// Integrates cfg.n_steps steps with the given beams and records diagnostics every
/// output.diagnostic_stride steps from samples every output.sample_stride steps. Potential
/// temperatures are first quoted against start.energy.
CoolingTrace run_cooling(const RunConfig& cfg, const std::vector<BeamConfig>& beams,
                         const CrystalStart& start, const SnapshotHook& snapshot = {});

/// Recomputes the potential temperatures against a new reference energy.
void apply_reference(std::vector<DiagnosticRow>& rows, double reference, Eigen::Index ions);

/// Minimises from `seed` and returns min(energy found, current). Used to move the
/// reference below every sampled configuration so potential temperatures stay positive.
double lower_reference(const Positions& seed, const TrapConfig& trap, double current);

/// Mean planar temperature over rows with t in (t0, t1].
double window_mean_planar(const std::vector<DiagnosticRow>& rows, double t0, double t1);

Table diagnostics_table(const std::vector<DiagnosticRow>& rows);

struct ScanCell {
  double waist = 0.0;     // m
  double detuning = 0.0;  // rad/s, as quoted
  std::vector<DiagnosticRow> rows;
  double planar = 0.0;  // mean over the last quarter of the run (K)
  double axial = 0.0;
  double potential = 0.0;
  bool settled = false;  // last two quarters agree within scan.settle_tolerance
};

struct ScanResult {
  std::vector<ScanCell> cells;  // waist-major
  TemperatureMap theory;
  double reference_energy = 0.0;
  const ScanCell& cell(std::size_t i, std::size_t j) const { return cells[i * theory.detunings.size() + j]; }
};

/// The same starting crystal cooled at every (w_y, Delta_perp) of cfg.scan, next to the
/// cooling-theory prediction. Potential temperatures share one reference: the lowest
/// minimum reached from any cell's lowest-energy sample.
ScanResult cooling_scan(const RunConfig& cfg, const CrystalStart& start);

/// N points uniform in a ball of the given radius.
Positions uniform_sphere(Eigen::Index n, double radius, std::uint64_t seed);
/// Radius holding n ions at the trap's cold-fluid density.
double sphere_radius(Eigen::Index n, const TrapConfig& trap);

struct BenchRow {
  int n = 0;
  std::string method;
  double epsilon = 0.0;
  double wall_time = 0.0;  // fastest of the repeats (s)
  double error_pot = 0.0;  // against direct summation; NaN when direct was not run
};

std::vector<BenchRow> coulomb_bench(const BenchConfig& bench, const TrapConfig& trap, std::uint64_t seed,
                                    bool deterministic = false);

struct FmmCheckRow {
  double epsilon = 0.0;
  int order = 0;
  double error_pot = 0.0;
  double error_field = 0.0;
  double wall_time = 0.0;
};

std::vector<FmmCheckRow> fmm_check(const FmmCheckConfig& check, const TrapConfig& trap, std::uint64_t seed,
                                   bool deterministic = false);

}  // namespace penning
