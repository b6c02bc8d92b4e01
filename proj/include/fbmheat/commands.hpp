#pragma once

#include "fbmheat/config.hpp"
#include "fbmheat/io.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace fbmheat {

inline constexpr const char* kToolVersion = "1.0.0";

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3 };

std::vector<std::string> command_names();

/// Collects artifacts of one run and writes manifest.json.
class RunRecorder {
 public:
  RunRecorder(std::filesystem::path out_dir, std::string command, const ExperimentConfig& cfg);

  const std::filesystem::path& dir() const { return dir_; }
  void text(const std::string& name, const std::string& content);
  void json(const std::string& name, const Json& j);
  void csv(const std::string& name, const CsvTable& t);
  void binary_paths(const std::string& name, const FbmPathSet& set);
  void csv_paths(const std::string& name, const FbmPathSet& set);
  /// Derived seed for a named stage, recorded in the manifest.
  std::uint64_t stage_seed(const std::string& stage, std::uint64_t index);
  /// Writes manifest.json; status "ok" or the error message.
  void finish(const std::string& status, double wall_seconds);

 private:
  void record(const std::string& name);

  std::filesystem::path dir_;
  std::string command_;
  const ExperimentConfig* cfg_;
  Json outputs_ = Json::array();
  Json lineage_ = Json::object();
};

/// Runs one subcommand; artifacts go to out_dir. Exceptions propagate after
/// a manifest with status "failed" has been written.
Json run_command(const std::string& name, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct VerifyReport {
  std::size_t checked = 0;
  std::vector<std::string> mismatches;
  bool ok() const { return mismatches.empty(); }
};

/// Re-hashes the outputs listed in a manifest (paths relative to its directory).
VerifyReport verify_manifest(const std::filesystem::path& manifest);

}  // namespace fbmheat
