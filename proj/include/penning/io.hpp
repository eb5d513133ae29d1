#pragma once

#include "penning/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace penning {

/// Code version written into every output sidecar.
const char* code_version();

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

using Cell = std::variant<double, std::int64_t, std::string>;

/// A CSV table. Written numbers are exact: reading the file back recovers every bit.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
  std::size_t column(const std::string& name) const;
  /// Numeric column; integers are widened and "none" or empty cells read as NaN.
  std::vector<double> numbers(const std::string& name) const;
  std::vector<std::string> strings(const std::string& name) const;
};

/// Who made a file: config hash, seed and code version, plus free-form fields.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();
};

/// Writes path and the sidecar path + ".json".
void write_csv(const std::filesystem::path& path, const Table& table, const Provenance& prov);
/// Cells come back as strings; use Table::numbers for numeric columns.
Table read_csv(const std::filesystem::path& path);
nlohmann::json read_sidecar(const std::filesystem::path& csv_path);

/// Per-ion x, y, z, vx, vy, vz (SI, lab frame) with t and step in the sidecar.
void write_snapshot(const std::filesystem::path& path, const IonState& state, std::uint64_t step,
                    const Provenance& prov);
IonState read_snapshot(const std::filesystem::path& path);

/// Rotating-frame equilibrium positions, columns x_m, y_m, z_m.
void write_positions(const std::filesystem::path& path, const Positions& x, const Provenance& prov);
Positions read_positions(const std::filesystem::path& path);

}  // namespace penning
