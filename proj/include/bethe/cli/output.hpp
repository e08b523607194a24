#pragma once

// CSV tables and the JSON run manifest. Files are written to a sibling temp
// path and renamed into place, so a failed run never leaves a partial file.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace bethe::cli {

inline constexpr const char* kVersion = "bethe 0.1.0";

/// %.17g, with inf/nan spelled the same on every platform.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }

/// Quotes fields containing a comma, quote, CR or LF; quotes are doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::logic_error(name + ": row width does not match header");
    rows.push_back(std::move(row));
  }

  [[nodiscard]] std::string render() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += csv_field(r[i]);
      }
      out += "\r\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

struct Manifest {
  std::string subcommand;
  std::string argument;
  std::map<std::string, std::string> config;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  /// Stream path description for each top-level task.
  std::vector<std::pair<std::string, std::string>> task_seeds;
  double wall_clock_seconds = 0.0;
  int exit_code = 0;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["code_version"] = kVersion;
    j["subcommand"] = subcommand;
    if (!argument.empty()) j["argument"] = argument;
    j["config"] = config;
    j["outputs"] = outputs;
    j["warnings"] = warnings;
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    for (const auto& [k, v] : task_seeds) seeds[k] = v;
    j["task_seeds"] = seeds;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["exit_code"] = exit_code;
    return j;
  }
};

}  // namespace bethe::cli
