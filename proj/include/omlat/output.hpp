#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "omlat/error.hpp"

#ifndef OMLAT_VERSION
#define OMLAT_VERSION "0.1.0"
#endif

namespace omlat::output {

using json = nlohmann::json;

inline constexpr const char* kVersion = OMLAT_VERSION;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;  // extra "# ..." lines

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw NumericalError("table row width mismatch");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw ValidationError("no column '" + name + "'");
  }
};

inline std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Header comments, one column-name line, then rows. Nothing run-dependent
// (wall time, paths) goes here, so equal configs give equal bytes.
inline std::string render_csv(const Table& t, const std::string& experiment, const std::string& hash) {
  std::ostringstream os;
  os << "# omlat " << kVersion << "\n";
  os << "# experiment: " << experiment << "\n";
  os << "# config_hash: " << hash << "\n";
  for (const auto& c : t.comments) os << "# " << c << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_value(r[i]);
    os << "\n";
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << content;
  f.close();
  if (!f) throw IoError("write failed for " + p.string());
}

// Reads a CSV written by render_csv back into a table (comments dropped).
inline Table read_csv(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot open " + p.string());
  Table t;
  std::string line;
  bool header = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(std::stod(c));
    t.add(std::move(row));
  }
  return t;
}

}  // namespace omlat::output
