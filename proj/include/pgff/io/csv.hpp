#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "pgff/error.hpp"
#include "pgff/plant/closed_loop.hpp"

namespace pgff::io {

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return {buf, res.ptr};
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Column table written with a header row; numbers in shortest round-trip form.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    require(cells.size() == header_.size(), "CsvTable: row width differs from header");
    rows_.push_back(std::move(cells));
  }

  [[nodiscard]] std::string str() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += cells[i];
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::filesystem::path metadata_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".meta.json");
  return p;
}

inline constexpr std::string_view kDataSetHeader = "k,t,r,uff,ufb,u,y,yf";

/// Writes the record as CSV plus a metadata sidecar (schema version and the
/// record's provenance).
inline void write_dataset(const plant::DataSet& ds, const std::filesystem::path& path) {
  ds.validate();
  std::string s;
  s.reserve(ds.size() * 160);
  s += kDataSetHeader;
  s += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    s += std::to_string(ds.k[i]);
    for (const Sequence* c : ds.columns()) {
      s += ',';
      s += format_double((*c)[i]);
    }
    s += '\n';
  }
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << s;
  }
  nlohmann::json meta = ds.metadata;
  meta["schema_version"] = kSchemaVersion;
  meta["columns"] = kDataSetHeader;
  meta["rows"] = ds.size();
  write_json(metadata_path(path), meta);
}

inline plant::DataSet read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  std::string_view rest(text);
  auto next_line = [&](std::string_view& line) {
    if (rest.empty()) return false;
    const std::size_t nl = rest.find('\n');
    line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    return true;
  };
  std::string_view line;
  if (!next_line(line) || line != kDataSetHeader)
    throw ConfigError(path.string() + ": expected header " + std::string(kDataSetHeader));
  plant::DataSet ds;
  while (next_line(line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 8) throw ConfigError(path.string() + ": row with " + std::to_string(cells.size()) + " cells");
    ds.k.push_back(parse_int(cells[0]));
    std::size_t c = 1;
    for (Sequence* col : ds.columns()) col->push_back(parse_double(cells[c++]));
  }
  const auto meta_file = metadata_path(path);
  if (std::filesystem::exists(meta_file)) {
    ds.metadata = read_json(meta_file);
    if (ds.metadata.value("schema_version", 0) != kSchemaVersion)
      throw ConfigError(meta_file.string() + ": unsupported schema version");
    for (const char* key : {"schema_version", "columns", "rows"}) ds.metadata.erase(key);
  }
  ds.validate();
  return ds;
}

}  // namespace pgff::io
