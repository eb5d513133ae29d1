#include "penning/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#ifndef PENNING_VERSION
#define PENNING_VERSION "unknown"
#endif

namespace penning {

namespace fs = std::filesystem;
using nlohmann::json;

const char* code_version() { return PENNING_VERSION; }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  if (s.empty() || s == "none" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error("not a number: '" + s + "'");
  return v;
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw Error("row has " + std::to_string(row.size()) +
                                                " cells, table has " + std::to_string(columns.size()) + " columns");
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw Error("no column '" + name + "'");
}

namespace {

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<double> Table::numbers(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const Cell& cell = row[c];
    if (const auto* d = std::get_if<double>(&cell)) out.push_back(*d);
    else if (const auto* i = std::get_if<std::int64_t>(&cell)) out.push_back(double(*i));
    else out.push_back(parse_double(std::get<std::string>(cell)));
  }
  return out;
}

std::vector<std::string> Table::strings(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<std::string> out;
  for (const auto& row : rows) out.push_back(cell_text(row[c]));
  return out;
}

void write_csv(const fs::path& path, const Table& table, const Provenance& prov) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell_text(row[i]);
      out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
  }
  json side = prov.extra;
  side["config_hash"] = prov.config_hash;
  side["seed"] = prov.seed;
  side["version"] = code_version();
  side["columns"] = table.columns;
  side["rows"] = table.rows.size();
  std::ofstream out(path.string() + ".json");
  out << side.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string() + ".json");
}

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  t.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != t.columns.size()) throw Error(path.string() + ": ragged row");
    std::vector<Cell> row(fields.begin(), fields.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

json read_sidecar(const fs::path& csv_path) {
  std::ifstream in(csv_path.string() + ".json");
  if (!in) throw Error("cannot read " + csv_path.string() + ".json");
  return json::parse(in);
}

void write_snapshot(const fs::path& path, const IonState& state, std::uint64_t step,
                    const Provenance& prov) {
  Table t;
  t.columns = {"x", "y", "z", "vx", "vy", "vz"};
  for (Eigen::Index i = 0; i < state.size(); ++i)
    t.add_row({state.x(0, i), state.x(1, i), state.x(2, i), state.v(0, i), state.v(1, i), state.v(2, i)});
  Provenance p = prov;
  p.extra["t"] = state.t;
  p.extra["step"] = step;
  write_csv(path, t, p);
}

IonState read_snapshot(const fs::path& path) {
  const Table t = read_csv(path);
  const json side = read_sidecar(path);
  const char* names[6] = {"x", "y", "z", "vx", "vy", "vz"};
  IonState s;
  const Eigen::Index n = Eigen::Index(t.rows.size());
  s.x.resize(3, n);
  s.v.resize(3, n);
  for (int c = 0; c < 6; ++c) {
    const auto col = t.numbers(names[c]);
    for (Eigen::Index i = 0; i < n; ++i) (c < 3 ? s.x(c, i) : s.v(c - 3, i)) = col[std::size_t(i)];
  }
  s.t = side.at("t").get<double>();
  return s;
}

void write_positions(const fs::path& path, const Positions& x, const Provenance& prov) {
  Table t;
  t.columns = {"x_m", "y_m", "z_m"};
  for (Eigen::Index i = 0; i < x.cols(); ++i) t.add_row({x(0, i), x(1, i), x(2, i)});
  write_csv(path, t, prov);
}

Positions read_positions(const fs::path& path) {
  const Table t = read_csv(path);
  Positions x(3, Eigen::Index(t.rows.size()));
  const char* names[3] = {"x_m", "y_m", "z_m"};
  for (int c = 0; c < 3; ++c) {
    const auto col = t.numbers(names[c]);
    for (std::size_t i = 0; i < col.size(); ++i) x(c, Eigen::Index(i)) = col[i];
  }
  return x;
}

}  // namespace penning
