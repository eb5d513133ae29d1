#pragma once

#include "penning/config.hpp"

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace penning {

/// Each command writes its outputs under `out` and throws ConfigError or NumericalFailure.

/// diagnostics.csv, snapshots/snapshot_<step>.csv and the resolved config.json.
void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out);
/// equilibrium.csv (rotating-frame positions) and shape.csv (fitted vs predicted axes).
void cmd_equilibrium(const RunConfig& cfg, const std::filesystem::path& out);
/// modes.csv: index, omega_rad_s, R_n, f_z, branch.
void cmd_modes(const RunConfig& cfg, const std::filesystem::path& out);
/// cool_scan.csv (simulated), theory_map.csv and scan/ with per-cell diagnostics.
void cmd_coolscan(const RunConfig& cfg, const std::filesystem::path& out);
/// bench.csv: N, method, epsilon, wall_time_s, error_pot.
void cmd_bench(const RunConfig& cfg, const std::filesystem::path& out);
/// fmm_check.csv: epsilon, order, error_pot, error_field, wall_time_s.
void cmd_fmmcheck(const RunConfig& cfg, const std::filesystem::path& out);

/// Writes failure.json describing an aborted command.
void write_failure(const std::filesystem::path& out, const std::string& command, const std::exception& error,
                   const RunConfig* cfg);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace penning
