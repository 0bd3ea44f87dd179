#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "shgl/config.hpp"

namespace shgl {

std::string version_string();
std::string utc_timestamp();

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  /// Hex SHA-256 of each output file, keyed like `outputs`.
  std::map<std::string, std::string> digests;
  std::map<std::string, std::string> config;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

std::string sha256_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// Configuration recorded in a manifest, checked against its hash.
Config config_from_manifest(const RunManifest& m);

}  // namespace shgl
