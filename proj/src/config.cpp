#include "penning/config.hpp"

#include "penning/constants.hpp"
#include "penning/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace penning {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMHz = constants::two_pi * 1e6;
constexpr double kUm = 1e-6;

// Reads one JSON object, records which keys were consumed and the filled-in values.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(where(key) + ": " + what);
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const std::string& key, double fallback) {
    const double v = has(key) ? get_number(key) : fallback;
    mark(key, v);
    return v;
  }

  std::optional<double> optional_number(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    const double v = get_number(key);
    out_[key] = v;
    return v;
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t min = 0) {
    std::int64_t v = fallback;
    if (has(key)) {
      const json& x = j_.at(key);
      if (!x.is_number_integer()) fail(key, "expected an integer");
      v = x.get<std::int64_t>();
    }
    if (v < min) fail(key, "must be at least " + std::to_string(min));
    mark(key, v);
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    std::uint64_t v = fallback;
    if (has(key)) {
      const json& x = j_.at(key);
      if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<std::int64_t>() >= 0))
        fail(key, "expected a non-negative integer");
      v = x.get<std::uint64_t>();
    }
    mark(key, v);
    return v;
  }

  bool boolean(const std::string& key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
      if (!j_.at(key).is_boolean()) fail(key, "expected true or false");
      v = j_.at(key).get<bool>();
    }
    mark(key, v);
    return v;
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    std::string v = fallback;
    if (has(key)) {
      if (!j_.at(key).is_string()) fail(key, "expected a string");
      v = j_.at(key).get<std::string>();
    }
    for (const char* a : allowed)
      if (v == a) {
        mark(key, v);
        return v;
      }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    fail(key, "'" + v + "' is not one of " + list);
  }

  std::optional<std::string> optional_string(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    const auto v = j_.at(key).get<std::string>();
    out_[key] = v;
    return v;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (has(key)) {
      const json& x = j_.at(key);
      if (!x.is_array()) fail(key, "expected an array of numbers");
      fallback.clear();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!x[i].is_number()) fail(key + "[" + std::to_string(i) + "]", "expected a number");
        fallback.push_back(x[i].get<double>());
      }
    }
    mark(key, fallback);
    return fallback;
  }

  /// Nested section; absent sections read as empty objects.
  Section child(const std::string& key) {
    used_.insert(key);
    return Section(has(key) ? j_.at(key) : empty_, where(key));
  }

  bool present(const std::string& key) const { return has(key); }

  void put(const std::string& key, json value) { out_[key] = std::move(value); }

  /// Rejects keys that were never read and returns the filled object.
  json finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
    return out_;
  }

 private:
  double get_number(const std::string& key) const {
    const json& x = j_.at(key);
    if (!x.is_number()) fail(key, "expected a number");
    const double v = x.get<double>();
    if (!std::isfinite(v)) fail(key, "must be finite");
    return v;
  }

  template <class T>
  void mark(const std::string& key, const T& v) {
    used_.insert(key);
    out_[key] = v;
  }

  inline static const json empty_ = json::object();
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
  json out_ = json::object();
};

TrapConfig parse_trap(Section& s) {
  IonSpecies species = IonSpecies::beryllium9();
  species.mass = s.positive("mass_u", species.mass / constants::atomic_mass_unit) * constants::atomic_mass_unit;
  species.charge = s.number("charge_e", 1.0) * constants::elementary_charge;
  if (species.charge == 0.0) s.fail("charge_e", "must be non-zero");
  const double field = s.positive("magnetic_field_T", 4.4588);
  const double wz = kMHz * s.positive("axial_frequency_MHz", 1.58);
  const double wall = s.number("wall_strength", 0.01);
  if (wall < 0.0) s.fail("wall_strength", "must be non-negative");

  TrapConfig cfg = TrapConfig::from_axial_frequency(species, field, wz, wall, 0.0);
  const bool by_rate = s.present("rotation_frequency_MHz");
  if (by_rate && s.present("beta")) s.fail("beta", "give either beta or rotation_frequency_MHz, not both");
  if (by_rate) {
    cfg.rotation_frequency = kMHz * s.positive("rotation_frequency_MHz", 0.0);
  } else {
    const double b = s.positive("beta", 1.0);
    const auto branch = s.choice("rotation_branch", "low", {"low", "high"});
    try {
      cfg.rotation_frequency =
          rotation_for_beta(cfg, b, branch == "low" ? RotationBranch::Low : RotationBranch::High);
    } catch (const Error& e) {
      s.fail("beta", e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    s.fail("", e.what());
  }
  return cfg;
}

void parse_beams(Section& s, RunConfig& r) {
  r.lasers = s.boolean("enabled", true);
  CoolingSetup& c = r.cooling;
  c.planar_detuning = kMHz * s.number("planar_detuning_MHz", 13.6);
  c.convention = s.choice("detuning_convention", "lab", {"lab", "comoving"}) == "lab"
                     ? DetuningConvention::Lab
                     : DetuningConvention::Comoving;
  c.waist_y = kUm * s.positive("waist_y_um", 2.48);
  c.waist_z = kUm * s.positive("waist_z_um", 1e6);
  c.offset = kUm * s.number("offset_um", 5.0);
  c.planar_saturation = s.number("planar_saturation", 0.5);
  c.axial_saturation = s.number("axial_saturation", 5e-3);
  if (c.planar_saturation < 0.0) s.fail("planar_saturation", "must be non-negative");
  if (c.axial_saturation < 0.0) s.fail("axial_saturation", "must be non-negative");
}

void parse_integration(Section& s, RunConfig& r) {
  StepConfig& st = r.step;
  const auto dt = s.optional_number("dt_ns");
  st.dt = dt ? *dt * 1e-9 : default_time_step(r.trap);
  r.n_steps = s.unsigned_integer("n_steps", 0);
  st.coulomb.method = s.choice("coulomb", "fmm", {"fmm", "direct"}) == "fmm" ? CoulombMethod::Fmm
                                                                            : CoulombMethod::Direct;
  st.coulomb.epsilon = s.positive("epsilon", 1e-7);
  if (st.coulomb.epsilon >= 1.0) s.fail("epsilon", "must be below 1");
  st.coulomb.leaf_min = int(s.integer("leaf_min", 64, 1));
  st.coulomb.max_depth = int(s.integer("max_depth", 10, 1));
  st.coulomb.deterministic = s.boolean("deterministic", false);
  st.force_time = s.choice("force_time", "midpoint", {"midpoint", "start"}) == "midpoint"
                      ? ForceTime::Midpoint
                      : ForceTime::Start;
  try {
    st.validate(r.trap);
  } catch (const Error& e) {
    s.fail("dt_ns", e.what());
  }
}

void parse_init(Section& s, RunConfig& r, const fs::path& base) {
  InitConfig& in = r.init;
  in.ions = int(s.integer("ions", 200, 1));
  if (const auto file = s.optional_string("equilibrium_file")) {
    fs::path p = *file;
    if (p.is_relative() && !base.empty()) p = base / p;
    if (!fs::exists(p)) s.fail("equilibrium_file", "no such file: " + p.string());
    in.equilibrium_file = p;
  }
  in.restarts = int(s.integer("restarts", 3, 1));
  in.nudge = kUm * s.number("nudge_um", 0.1);
  if (s.present("thermal")) {
    Section t = s.child("thermal");
    ThermalInitConfig th;
    th.temperature = 1e-3 * t.number("temperature_mK", 10.0);
    th.step = kUm * t.positive("step_um", 1.0);
    th.scans = int(t.integer("scans", 2000, 0));
    th.seed = r.seed;
    in.velocity_temperature = 1e-3 * t.number("velocity_temperature_mK", th.temperature * 1e3);
    if (in.velocity_temperature < 0.0) t.fail("velocity_temperature_mK", "must be non-negative");
    try {
      th.validate();
    } catch (const Error& e) {
      t.fail("", e.what());
    }
    in.thermal = th;
    s.put("thermal", t.finish());
  } else {
    s.child("thermal");
  }
}

void parse_output(Section& s, RunConfig& r, const fs::path& base) {
  OutputConfig& o = r.output;
  fs::path dir = s.optional_string("directory").value_or("out");
  s.put("directory", dir.string());
  if (dir.is_relative() && !base.empty()) dir = base / dir;
  o.directory = dir;
  o.snapshot_stride = s.unsigned_integer("snapshot_stride", 0);
  o.diagnostic_stride = s.unsigned_integer("diagnostic_stride", 1000);
  o.sample_stride = s.unsigned_integer("sample_stride", 20);
  if (o.diagnostic_stride == 0) s.fail("diagnostic_stride", "must be positive");
  if (o.sample_stride == 0) s.fail("sample_stride", "must be positive");
  if (o.diagnostic_stride % o.sample_stride != 0)
    s.fail("diagnostic_stride", "must be a multiple of sample_stride");
}

void parse_scan(Section& s, RunConfig& r) {
  ScanConfig& c = r.scan;
  for (double w : s.numbers("waists_um", {1.5, 2.5, 4.0, 6.0})) {
    if (!(w > 0.0)) s.fail("waists_um", "waists must be positive");
    c.waists.push_back(kUm * w);
  }
  for (double d : s.numbers("detunings_MHz", {0.0, 15.0, 30.0, 45.0})) c.detunings.push_back(kMHz * d);
  c.settle_tolerance = s.positive("settle_tolerance", 0.1);
}

void parse_bench(Section& s, RunConfig& r) {
  BenchConfig& b = r.bench;
  for (double n : s.numbers("sizes", {256, 512, 1024, 2048, 4096, 8192, 16384, 32768})) {
    if (n < 2 || n != std::floor(n)) s.fail("sizes", "sizes must be integers >= 2");
    b.sizes.push_back(int(n));
  }
  b.epsilon = s.positive("epsilon", 1e-7);
  b.repeats = int(s.integer("repeats", 3, 1));
  b.direct_max = int(s.integer("direct_max", 16384, 0));
  b.leaf_min = int(s.integer("leaf_min", 64, 1));
}

void parse_fmm_check(Section& s, RunConfig& r) {
  FmmCheckConfig& f = r.fmm_check;
  f.ions = int(s.integer("ions", 10000, 2));
  f.epsilons = s.numbers("epsilons", {1e-3, 1e-5, 1e-7, 1e-9});
  for (double e : f.epsilons)
    if (!(e > 0.0 && e < 1.0)) s.fail("epsilons", "each epsilon must lie in (0, 1)");
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  RunConfig r;
  Section root(doc, "");
  r.seed = root.unsigned_integer("seed", 1);

  auto section = [&](const char* key, auto&& parse) {
    Section s = root.child(key);
    parse(s);
    root.put(key, s.finish());
  };
  section("trap", [&](Section& s) { r.trap = parse_trap(s); });
  section("beams", [&](Section& s) { parse_beams(s, r); });
  section("integration", [&](Section& s) { parse_integration(s, r); });
  section("init", [&](Section& s) { parse_init(s, r, base_dir); });
  section("output", [&](Section& s) { parse_output(s, r, base_dir); });
  section("scan", [&](Section& s) { parse_scan(s, r); });
  section("bench", [&](Section& s) { parse_bench(s, r); });
  section("fmm_check", [&](Section& s) { parse_fmm_check(s, r); });

  r.step.seed = r.seed;
  r.document = root.finish();
  r.hash = fnv1a_hex(r.document.dump());
  return r;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void save_config(const fs::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << cfg.document.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

RunConfig with_overrides(const RunConfig& cfg, std::optional<std::uint64_t> seed, bool deterministic,
                         const fs::path& base_dir) {
  json doc = cfg.document;
  if (seed) doc["seed"] = *seed;
  if (deterministic) doc["integration"]["deterministic"] = true;
  return parse_config(doc, base_dir);
}

}  // namespace penning
