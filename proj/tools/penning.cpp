// Command-line front end: penning <command> --config <path> [--out <dir>] [--seed <u64>] [--deterministic]

#include "penning/commands.hpp"
#include "penning/config.hpp"
#include "penning/simulation.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

// PENNING_THREADS overrides the OpenMP default of one thread per available core.
bool apply_thread_count() {
  const char* env = std::getenv("PENNING_THREADS");
  if (!env || !*env) return true;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    std::cerr << "PENNING_THREADS: expected a positive integer, got '" << env << "'\n";
    return false;
  }
#ifdef _OPENMP
  omp_set_num_threads(int(n));
#endif
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  using Command = std::function<void(const penning::RunConfig&, const std::filesystem::path&)>;
  const std::map<std::string, std::pair<Command, const char*>> commands = {
      {"simulate", {penning::cmd_simulate, "Integrate the crystal with cooling lasers and write diagnostics"}},
      {"equilibrium", {penning::cmd_equilibrium, "Find a minimum-energy crystal and compare its shape"}},
      {"modes", {penning::cmd_modes, "Normal-mode spectrum of a refined equilibrium"}},
      {"cool-scan", {penning::cmd_coolscan, "Cooling simulations and theory over a (w_y, detuning) grid"}},
      {"bench", {penning::cmd_bench, "Time direct and FMM Coulomb solves over a range of N"}},
      {"fmm-check", {penning::cmd_fmmcheck, "FMM potential error against direct summation for several epsilon"}},
  };

  CLI::App app{"Penning trap ion crystal simulator"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory (default: output.directory)");
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_flag("--deterministic", deterministic, "Require bit-reproducible Coulomb sums");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (!apply_thread_count()) return kConfigError;

  const std::string name = app.get_subcommands().front()->get_name();
  std::optional<penning::RunConfig> cfg;
  std::filesystem::path out;
  try {
    const std::filesystem::path path = config_path;
    cfg = penning::with_overrides(penning::load_config(path), seed, deterministic, path.parent_path());
    out = out_dir.empty() ? cfg->output.directory : std::filesystem::path(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    commands.at(name).first(*cfg, out);
  } catch (const penning::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    penning::write_failure(out, name, e, &*cfg);
    std::cerr << name << " failed: " << e.what() << " (see " << (out / "failure.json").string() << ")\n";
    return kNumericalFailure;
  }
  return 0;
}
