#include "penning/commands.hpp"

#include "penning/constants.hpp"
#include "penning/equilibrium.hpp"
#include "penning/io.hpp"
#include "penning/modes.hpp"
#include "penning/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace penning {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMHz = constants::two_pi * 1e6;

Provenance provenance(const RunConfig& cfg) { return {cfg.hash, cfg.seed, json::object()}; }

std::string numbered(const char* stem, std::uint64_t k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%010llu.csv", stem, static_cast<unsigned long long>(k));
  return buf;
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("slope needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  save_config(out / "config.json", cfg);
  const Provenance prov = provenance(cfg);
  const CrystalStart start = prepare_crystal(cfg);
  const auto beams = cfg.lasers ? standard_setup(cfg.cooling, cfg.trap.rotation_frequency)
                                : std::vector<BeamConfig>{};
  const CoolingTrace tr = run_cooling(cfg, beams, start, [&](const IonState& s, std::uint64_t k) {
    write_snapshot(out / "snapshots" / numbered("snapshot", k), s, k, prov);
  });
  Provenance p = prov;
  p.extra["equilibrium_energy_J"] = start.energy;
  p.extra["reference_energy_J"] = tr.reference_energy;
  p.extra["dt_s"] = cfg.step.dt;
  p.extra["n_steps"] = cfg.n_steps;
  write_csv(out / "diagnostics.csv", diagnostics_table(tr.rows), p);
}

void cmd_equilibrium(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const TrapConfig& trap = cfg.trap;
  const MinimizeReport rep = find_equilibrium(cfg.init.ions, trap, cfg.init.restarts, cfg.init.nudge, cfg.seed);
  Provenance p = provenance(cfg);
  p.extra["energy_J"] = rep.energy;
  p.extra["gradient_norm_N"] = rep.gradient_norm;
  p.extra["iterations"] = rep.iterations;
  p.extra["converged"] = rep.converged;
  p.extra["beta"] = beta(trap);
  write_positions(out / "equilibrium.csv", rep.x, p);

  const EllipsoidShape predicted = fit_ellipsoid_scale(rep.x, predicted_shape(trap));
  const EllipsoidShape moments = fit_ellipsoid_moments(rep.x);
  Table shape;
  shape.columns = {"axis", "predicted_m", "moments_m", "predicted_ratio", "moments_ratio"};
  const char* names[3] = {"x", "y", "z"};
  const int a1 = predicted.order[0];
  for (int a = 0; a < 3; ++a)
    shape.add_row({std::string(names[a]), predicted.axes[a], moments.axes[a], predicted.axes[a] / predicted.axes[a1],
                   moments.axes[a] / moments.axes[a1]});
  write_csv(out / "shape.csv", shape, provenance(cfg));
  if (!rep.converged)
    throw NumericalFailure("equilibrium search stopped before convergence",
                           {{"gradient_norm_N", rep.gradient_norm}, {"iterations", rep.iterations}});
}

void cmd_modes(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const TrapConfig& trap = cfg.trap;
  Positions seed;
  if (!cfg.init.equilibrium_file.empty()) {
    seed = read_positions(cfg.init.equilibrium_file);
  } else {
    seed = find_equilibrium(cfg.init.ions, trap, cfg.init.restarts, cfg.init.nudge, cfg.seed).x;
  }
  const MinimizeReport rep = refine_minimum(seed, trap);
  if (!rep.converged)
    throw NumericalFailure("no stable minimum near the starting configuration",
                           {{"gradient_norm_N", rep.gradient_norm}, {"energy_J", rep.energy}});
  ModeSpectrum s;
  try {
    s = normal_modes(rep.x, trap);
  } catch (const UnstableEquilibrium& e) {
    json ev = json::array();
    for (const auto& z : e.eigenvalues) ev.push_back({z.real(), z.imag()});
    throw NumericalFailure(e.what(), {{"growing_eigenvalues", ev}});
  }
  Table t;
  t.columns = {"index", "omega_rad_s", "R_n", "f_z", "branch"};
  for (Eigen::Index k = 0; k < s.size(); ++k)
    t.add_row({std::int64_t(k), s.omega[k], s.energy_ratio[k], s.axial_fraction[k],
               std::string(branch_name(s.branch[std::size_t(k)]))});
  Provenance p = provenance(cfg);
  p.extra["energy_J"] = rep.energy;
  p.extra["zero_modes"] = s.zero_modes;
  p.extra["branch_separation"] = s.branch_separation;
  p.extra["branches_resolved"] = s.branches_resolved;
  write_csv(out / "modes.csv", t, p);
}

void cmd_coolscan(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  save_config(out / "config.json", cfg);
  const CrystalStart start = prepare_crystal(cfg);
  const ScanResult res = cooling_scan(cfg, start);
  const Provenance prov = provenance(cfg);

  Table md, theory;
  md.columns = {"w_y_um", "delta_perp_MHz", "T_perp_mK", "T_ax_mK", "T_pe_mK", "settled"};
  theory.columns = {"w_y_um", "delta_perp_MHz", "T_perp_mK"};
  for (std::size_t i = 0; i < res.theory.waists.size(); ++i)
    for (std::size_t j = 0; j < res.theory.detunings.size(); ++j) {
      const ScanCell& c = res.cell(i, j);
      const double w = 1e6 * c.waist, d = c.detuning / kMHz;
      md.add_row({w, d, 1e3 * c.planar, 1e3 * c.axial, 1e3 * c.potential, std::int64_t(c.settled)});
      const auto& v = res.theory.value(i, j);
      theory.add_row({w, d, v ? Cell(1e3 * *v) : Cell(std::string("none"))});
      write_csv(out / "scan" / ("cell_" + std::to_string(i) + "_" + std::to_string(j) + ".csv"),
                diagnostics_table(c.rows), prov);
    }
  Provenance p = prov;
  p.extra["reference_energy_J"] = res.reference_energy;
  write_csv(out / "cool_scan.csv", md, p);
  write_csv(out / "theory_map.csv", theory, prov);
}

void cmd_bench(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const auto rows = coulomb_bench(cfg.bench, cfg.trap, cfg.seed, cfg.step.coulomb.deterministic);
  Table t;
  t.columns = {"N", "method", "epsilon", "wall_time_s", "error_pot"};
  std::vector<double> nd, td, nf, tf;
  for (const auto& r : rows) {
    t.add_row({std::int64_t(r.n), r.method, r.epsilon, r.wall_time, r.error_pot});
    (r.method == "fmm" ? nf : nd).push_back(r.n);
    (r.method == "fmm" ? tf : td).push_back(r.wall_time);
  }
  Provenance p = provenance(cfg);
  if (nf.size() >= 2) p.extra["fmm_slope"] = loglog_slope(nf, tf);
  if (nd.size() >= 2) p.extra["direct_slope"] = loglog_slope(nd, td);
  write_csv(out / "bench.csv", t, p);
}

void cmd_fmmcheck(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const auto rows = fmm_check(cfg.fmm_check, cfg.trap, cfg.seed, cfg.step.coulomb.deterministic);
  Table t;
  t.columns = {"epsilon", "order", "error_pot", "error_field", "wall_time_s"};
  for (const auto& r : rows) t.add_row({r.epsilon, std::int64_t(r.order), r.error_pot, r.error_field, r.wall_time});
  Provenance p = provenance(cfg);
  p.extra["ions"] = cfg.fmm_check.ions;
  write_csv(out / "fmm_check.csv", t, p);
}

void write_failure(const fs::path& out, const std::string& command, const std::exception& error,
                   const RunConfig* cfg) {
  json j;
  j["command"] = command;
  j["error"] = error.what();
  j["version"] = code_version();
  if (const auto* nf = dynamic_cast<const NumericalFailure*>(&error)) j["details"] = nf->details;
  if (cfg) {
    j["config_hash"] = cfg->hash;
    j["seed"] = cfg->seed;
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream f(out / "failure.json");
  f << j.dump(2) << '\n';
}

}  // namespace penning
