#include "shgl/manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#ifndef SHGL_VERSION
#define SHGL_VERSION "0.0.0"
#endif

namespace shgl {

std::string version_string() { return SHGL_VERSION; }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(secs)));
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command}, {"config_hash", m.config_hash}, {"seed", m.seed},
          {"version", m.version}, {"started", m.started},         {"finished", m.finished},
          {"outputs", m.outputs}, {"digests", m.digests}, {"config", m.config}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.value("version", "");
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.digests = j.value("digests", std::map<std::string, std::string>{});
    m.config = j.at("config").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return sha256_hex(buf.str());
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << to_json(m).dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

Config config_from_manifest(const RunManifest& m) {
  Config c = Config::defaults();
  for (const auto& [key, value] : m.config) c.set(key, value);
  if (c.hash() != m.config_hash) throw ConfigError("manifest config does not match its recorded hash");
  return c;
}

}  // namespace shgl
