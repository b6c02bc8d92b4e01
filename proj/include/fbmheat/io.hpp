#pragma once

#include "fbmheat/fbm.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fbmheat {

using Json = nlohmann::ordered_json;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);
/// FNV-1a of a file's bytes; throws std::runtime_error when unreadable.
std::uint64_t file_hash(const std::filesystem::path& path);

/// Shortest round-trip formatting ("%.17g").
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// Numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string to_csv(const CsvTable& t);
void write_csv(const std::filesystem::path& path, const CsvTable& t);

/// Long format: path, index, t, x0..x{d-1}.
void write_paths_csv(const std::filesystem::path& path, const FbmPathSet& set);

/// "FBM1" binary: magic, u32 version, u64 n_paths, u64 n_steps, u32 dim,
/// f64 horizon, f64 H, u64 seed, u32 sampler, then the path-major values,
/// all little-endian.
void write_paths_binary(const std::filesystem::path& path, const FbmPathSet& set);
FbmPathSet read_paths_binary(const std::filesystem::path& path);

struct ChartSeries {
  std::string name;
  std::vector<double> x, y;
  bool markers = false;  // points instead of a polyline
};

/// Standalone SVG line chart with linear axes.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series);

}  // namespace fbmheat
