#pragma once

#include "penning/integrator.hpp"
#include "penning/lasers.hpp"
#include "penning/model.hpp"
#include "penning/thermal.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace penning {

/// Schema violation; the message starts with the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct InitConfig {
  int ions = 200;
  std::filesystem::path equilibrium_file;  // empty: find one
  int restarts = 3;
  double nudge = 1e-7;  // m
  std::optional<ThermalInitConfig> thermal;
  /// Velocity temperature of the Maxwell-Boltzmann draw; defaults to the thermal temperature.
  double velocity_temperature = 0.0;  // K
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  std::uint64_t snapshot_stride = 0;       // steps; 0 writes the first and last state only
  std::uint64_t diagnostic_stride = 1000;  // steps per diagnostics row
  std::uint64_t sample_stride = 20;        // steps between temperature samples
};

struct ScanConfig {
  std::vector<double> waists;      // m
  std::vector<double> detunings;   // rad/s, as quoted
  double settle_tolerance = 0.1;   // relative change of T_perp over the last two quarters
};

struct BenchConfig {
  std::vector<int> sizes;
  double epsilon = 1e-7;
  int repeats = 3;
  int direct_max = 16384;  // largest N timed with direct summation
  int leaf_min = 64;
};

struct FmmCheckConfig {
  int ions = 10000;
  std::vector<double> epsilons{1e-3, 1e-5, 1e-7, 1e-9};
};

/// A complete run description in SI units, with the normalised document it came from.
struct RunConfig {
  TrapConfig trap;
  bool lasers = true;
  CoolingSetup cooling;
  StepConfig step;  // dt, Coulomb settings, seed
  std::uint64_t n_steps = 0;
  InitConfig init;
  OutputConfig output;
  ScanConfig scan;
  BenchConfig bench;
  FmmCheckConfig fmm_check;
  std::uint64_t seed = 0;

  /// The input with every default filled in, in file units (MHz, T, um, mK, ns).
  nlohmann::json document;
  /// FNV-1a of the canonical dump of `document`.
  std::string hash;
};

/// Parses, fills defaults, converts to SI and validates. Relative paths resolve against
/// base_dir. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// Writes the normalised document; loading it again gives the same hash.
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Re-parses with the seed and determinism flag replaced.
RunConfig with_overrides(const RunConfig& cfg, std::optional<std::uint64_t> seed, bool deterministic,
                         const std::filesystem::path& base_dir = {});

}  // namespace penning
