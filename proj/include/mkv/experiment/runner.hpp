#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mkv/experiment/config.hpp"

namespace mkv::exp {

struct RunManifest {
  std::string experiment;
  std::string config_hash;  // SHA-256 of the canonical config (threads excluded)
  std::string code_version;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> checksums;  // file name → SHA-256
  double wall_clock_seconds = 0.0;                // excluded from every checksum
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string code_version();

/// Writes manifest.json through a temporary file and a rename.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir);
RunManifest read_manifest(const std::filesystem::path& dir);

/// Runs the experiment, writes its CSVs and the manifest into out_dir.
/// Library errors propagate.
RunManifest run_experiment(const RunConfig& config, const std::filesystem::path& out_dir);

/// Exit-code wrapper: 0 on success, 1 on a runtime failure (failure.json is
/// written into out_dir), 2 on a configuration error (nothing is written).
int run_and_report(const nlohmann::json& config_json, const std::filesystem::path& out_dir,
                   std::string* message = nullptr);

}  // namespace mkv::exp
