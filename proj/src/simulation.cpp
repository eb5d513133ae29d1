#include "penning/simulation.hpp"

#include "penning/constants.hpp"
#include "penning/equilibrium.hpp"
#include "penning/fmm.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace penning {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double potential_temperature(double mean_potential, double reference, Eigen::Index n) {
  return 2.0 / 3.0 * (mean_potential - reference) / (constants::boltzmann * double(n));
}

// sample-weighted mean of a row field over t in (t0, t1]; the initial row is skipped
double window_mean(const std::vector<DiagnosticRow>& rows, double DiagnosticRow::*field, double t0, double t1) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].t > t0 && rows[k].t <= t1) {
      sum += rows[k].*field * rows[k].samples;
      count += rows[k].samples;
    }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / count;
}

}  // namespace

CrystalStart prepare_crystal(const RunConfig& cfg) {
  const TrapConfig& trap = cfg.trap;
  const int n = cfg.init.ions;
  CrystalStart s;
  if (!cfg.init.equilibrium_file.empty()) {
    s.equilibrium = read_positions(cfg.init.equilibrium_file);
    if (s.equilibrium.cols() != n)
      throw ConfigError("init.equilibrium_file: holds " + std::to_string(s.equilibrium.cols()) +
                        " ions but init.ions is " + std::to_string(n));
    Eigen::Matrix3Xd g;
    s.energy = rotating_energy(s.equilibrium, trap, CoulombSettings{CoulombMethod::Direct}, &g);
    s.gradient_norm = g.cwiseAbs().maxCoeff();
  } else {
    const MinimizeReport rep = find_equilibrium(n, trap, cfg.init.restarts, cfg.init.nudge, cfg.seed);
    s.equilibrium = rep.x;
    s.energy = rep.energy;
    s.gradient_norm = rep.gradient_norm;
    s.converged = rep.converged;
  }
  if (!std::isfinite(s.energy) || !s.equilibrium.allFinite())
    throw NumericalFailure("equilibrium energy is not finite", {{"energy", s.energy}});

  Positions x = s.equilibrium;
  Velocities v = Velocities::Zero(3, n);
  if (cfg.init.thermal) {
    x = metropolis_positions(s.equilibrium, trap, *cfg.init.thermal).x;
    SplitMix64 rng = stream(cfg.seed, 0x76656c6f63ULL);
    v = sample_velocities(n, cfg.init.velocity_temperature, trap.species.mass, rng);
  }
  s.state = thermal_state(x, v, 0.0, trap);
  return s;
}

CoolingTrace run_cooling(const RunConfig& cfg, const std::vector<BeamConfig>& beams,
                         const CrystalStart& start, const SnapshotHook& snapshot) {
  const TrapConfig& trap = cfg.trap;
  const OutputConfig& out = cfg.output;
  const Eigen::Index n = start.state.size();
  const std::uint64_t n_steps = cfg.n_steps;

  CoolingTrace tr;
  tr.reference_energy = start.energy;
  tr.lowest_energy = std::numeric_limits<double>::infinity();
  TemperatureAccumulator acc(trap, n);
  double sum_pe = 0.0;

  std::uint64_t stride = std::gcd(out.sample_stride, out.diagnostic_stride);
  if (out.snapshot_stride > 0) stride = std::gcd(stride, out.snapshot_stride);

  auto observe = [&](const IonState& s, std::uint64_t k) {
    if (!s.x.allFinite() || !s.v.allFinite())
      throw NumericalFailure("non-finite ion state", {{"step", k}, {"t", s.t}});
    const bool last = k == n_steps;
    if (snapshot && (k == 0 || last || (out.snapshot_stride > 0 && k % out.snapshot_stride == 0)))
      snapshot(s, k);
    const bool row = k == 0 || last || k % out.diagnostic_stride == 0;
    if (!row && k % out.sample_stride != 0) return;

    const RotatingState rot = to_rotating_frame(s, trap);
    const Eigen::VectorXd phi =
        coulomb_solve(ChargeSystem::identical(rot.x, trap.species.charge), cfg.step.coulomb).phi;
    const double pe = rotating_potential_energy(rot.x, trap, phi);
    if (!std::isfinite(pe)) throw NumericalFailure("non-finite potential energy", {{"step", k}, {"t", s.t}});
    acc.add_rotating(rot, pe, s.t);
    sum_pe += pe;
    if (pe < tr.lowest_energy) {
      tr.lowest_energy = pe;
      tr.lowest = rot.x;
    }
    if (!row) return;

    const TemperatureReport rep = acc.report(start.energy);
    DiagnosticRow r;
    r.t = s.t;
    r.axial = rep.axial;
    r.planar = rep.planar;
    r.samples = rep.samples;
    r.mean_potential = sum_pe / rep.samples;
    r.potential = potential_temperature(r.mean_potential, start.energy, n);
    r.total_energy = energy_report(s, trap, phi).total;
    tr.rows.push_back(r);
    acc.reset();
    sum_pe = 0.0;
  };

  tr.final_state = start.state;
  run(tr.final_state, trap, cfg.step, beams, n_steps, observe, stride);

  tr.reference_energy = lower_reference(tr.lowest, trap, start.energy);
  apply_reference(tr.rows, tr.reference_energy, n);
  return tr;
}

void apply_reference(std::vector<DiagnosticRow>& rows, double reference, Eigen::Index ions) {
  for (auto& r : rows) r.potential = potential_temperature(r.mean_potential, reference, ions);
}

double lower_reference(const Positions& seed, const TrapConfig& trap, double current) {
  if (seed.cols() == 0) return current;
  const MinimizeReport rep = minimize_local(seed, trap);
  return std::isfinite(rep.energy) ? std::min(current, rep.energy) : current;
}

double window_mean_planar(const std::vector<DiagnosticRow>& rows, double t0, double t1) {
  return window_mean(rows, &DiagnosticRow::planar, t0, t1);
}

Table diagnostics_table(const std::vector<DiagnosticRow>& rows) {
  Table t;
  t.columns = {"t", "T_ax_mK", "T_perp_mK", "T_pe_mK", "E_total_J"};
  for (const auto& r : rows) t.add_row({r.t, 1e3 * r.axial, 1e3 * r.planar, 1e3 * r.potential, r.total_energy});
  return t;
}

ScanResult cooling_scan(const RunConfig& cfg, const CrystalStart& start) {
  const ScanConfig& scan = cfg.scan;
  const double duration = double(cfg.n_steps) * cfg.step.dt;
  if (cfg.n_steps < 8 * cfg.output.diagnostic_stride)
    throw ConfigError("output.diagnostic_stride: a scan needs at least eight diagnostics rows per run");

  ScanResult res;
  res.theory = temperature_map(scan.waists, scan.detunings, cfg.trap, double(cfg.init.ions), cfg.cooling);
  res.reference_energy = start.energy;
  for (double w : scan.waists)
    for (double d : scan.detunings) {
      RunConfig c = cfg;
      c.cooling.waist_y = w;
      c.cooling.planar_detuning = d;
      const auto beams = standard_setup(c.cooling, cfg.trap.rotation_frequency);
      CoolingTrace tr = run_cooling(c, beams, start);
      res.reference_energy = std::min(res.reference_energy, tr.reference_energy);
      ScanCell cell;
      cell.waist = w;
      cell.detuning = d;
      cell.rows = std::move(tr.rows);
      res.cells.push_back(std::move(cell));
    }

  const double q3 = 0.75 * duration, q2 = 0.5 * duration, end = duration * (1.0 + 1e-12);
  for (auto& cell : res.cells) {
    apply_reference(cell.rows, res.reference_energy, cfg.init.ions);
    cell.planar = window_mean(cell.rows, &DiagnosticRow::planar, q3, end);
    cell.axial = window_mean(cell.rows, &DiagnosticRow::axial, q3, end);
    cell.potential = window_mean(cell.rows, &DiagnosticRow::potential, q3, end);
    const double before = window_mean(cell.rows, &DiagnosticRow::planar, q2, q3);
    cell.settled = std::abs(cell.planar - before) <= scan.settle_tolerance * cell.planar;
  }
  return res;
}

Positions uniform_sphere(Eigen::Index n, double radius, std::uint64_t seed) {
  SplitMix64 rng = stream(seed, 0x73706865ULL, std::uint64_t(n));
  Positions x(3, n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = radius * std::cbrt(rng.uniform()) * random_unit_vector(rng);
  return x;
}

double sphere_radius(Eigen::Index n, const TrapConfig& trap) {
  return std::cbrt(3.0 * double(n) / (4.0 * constants::pi * cold_fluid_density(trap)));
}

std::vector<BenchRow> coulomb_bench(const BenchConfig& bench, const TrapConfig& trap, std::uint64_t seed,
                                    bool deterministic) {
  std::vector<BenchRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int n : bench.sizes) {
    const ChargeSystem sys =
        ChargeSystem::identical(uniform_sphere(n, sphere_radius(n, trap), seed), trap.species.charge);
    auto timed = [&](const CoulombSettings& s, FieldResult& out) {
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < bench.repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        out = coulomb_solve(sys, s);
        best = std::min(best, seconds_since(t0));
      }
      return best;
    };
    FieldResult reference;
    const bool direct = n <= bench.direct_max;
    if (direct) rows.push_back({n, "direct", 0.0, timed(CoulombSettings{CoulombMethod::Direct}, reference), 0.0});

    CoulombSettings fmm{CoulombMethod::Fmm, bench.epsilon, bench.leaf_min};
    fmm.deterministic = deterministic;
    FieldResult approx;
    const double t = timed(fmm, approx);
    rows.push_back({n, "fmm", bench.epsilon, t, direct ? rel_error_pot(approx, reference) : nan});
  }
  return rows;
}

std::vector<FmmCheckRow> fmm_check(const FmmCheckConfig& check, const TrapConfig& trap, std::uint64_t seed,
                                   bool deterministic) {
  const ChargeSystem sys = ChargeSystem::identical(
      uniform_sphere(check.ions, sphere_radius(check.ions, trap), seed), trap.species.charge);
  const FieldResult reference = direct_solve(sys);
  std::vector<FmmCheckRow> rows;
  for (double eps : check.epsilons) {
    FmmOptions opt;
    opt.epsilon = eps;
    opt.deterministic = deterministic;
    const auto t0 = std::chrono::steady_clock::now();
    const FieldResult r = fmm_solve(sys, opt);
    const double t = seconds_since(t0);
    rows.push_back({eps, fmm_order(eps), rel_error_pot(r, reference), rel_error_field(r, reference), t});
  }
  return rows;
}

}  // namespace penning
