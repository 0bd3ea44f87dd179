#pragma once

// Flat "section.key" configuration with INI files, flag overrides and a
// canonical form whose SHA-256 identifies a run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shgl/solvers.hpp"
#include "shgl/validation.hpp"

namespace shgl {

class Config {
 public:
  /// Built-in defaults for every known key.
  static Config defaults();

  /// Merges an INI file ([section] / key = value). Unknown keys are rejected.
  void load_file(const std::filesystem::path& path);
  /// Sets one "section.key"; unknown keys are rejected.
  void set(const std::string& key, const std::string& value);
  /// Parses "section.key=value".
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Sorted "key=value" lines of every result-affecting key, with numbers in
  /// shortest round-trip form.
  std::string canonical() const;
  /// Hex SHA-256 of canonical().
  std::string hash() const;
  /// Writes the full configuration as INI.
  void save(const std::filesystem::path& path) const;

  static bool known_key(const std::string& key);
  /// Keys that never change results (output location, thread count).
  static bool is_operational(const std::string& key);

 private:
  std::map<std::string, std::string> entries_;
};

std::string sha256_hex(const std::string& data);

SolverConfig solver_config_from(const Config& c);
ExperimentPlan experiment_plan_from(const Config& c);
/// "K1[,K2,...]:re[:im]" entries separated by ';'.
std::vector<AmplitudeMode> parse_amplitude_modes(const std::string& text);
/// alpha profile for a fine lattice: named profile or CSV table (k_1..k_d, alpha).
Eigen::ArrayXd alpha_from_config(const Config& c, const LatticeSpec& fine);

/// Validation checks accepted by `validate`.
const std::set<std::string>& known_checks();

}  // namespace shgl
