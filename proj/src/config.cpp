#include "shgl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

namespace shgl {

namespace {

const std::map<std::string, std::string>& default_entries() {
  static const std::map<std::string, std::string> table{
      {"run.model", "sh"},
      {"run.d", "1"},
      {"run.eps", ""},
      {"run.t0", "1"},
      {"run.h", "0.05"},
      {"run.seed", "1"},
      {"run.threads", "1"},
      {"noise.beta", "1.5"},
      {"noise.alpha", "default"},
      {"noise.alpha_table", ""},
      {"noise.band", "all"},
      {"noise.scale", "1"},
      {"solver.integrator", "etdrk2"},
      {"solver.dealias", "true"},
      {"solver.nonlinear", "true"},
      {"solver.dispersion", "standard"},
      {"solver.theta", "1"},
      {"solver.sh_cutoff", ""},
      {"solver.gl_cutoff", ""},
      {"solver.escape_norm", "1e6"},
      {"init.b0", "0:0.5773502691896257:0"},
      {"output.dir", ""},
      {"output.snapshot_stride", "10"},
      {"validate.eps_list", "0.2,0.1"},
      {"validate.n_samples", "20"},
      {"validate.quantile", "0.95"},
      {"validate.c1", "2"},
      {"validate.delta_prime", "0.1"},
      {"validate.delta", "0.1"},
      {"validate.error_stride", "1"},
      {"validate.oversample", "2"},
      {"validate.checks", "t0,probability,conditioned,decomposition"},
      {"validate.min_conditioned", "0.95"},
      {"validate.slope_min", "1.6"},
      {"validate.slope_max", "2.4"},
      {"validate.s_ratio_max", "3"},
      {"validate.rz_growth_max", "1.1"},
      {"residual.stationary", "true"},
      {"residual.tolerance", "1e-8"},
      {"ou.n_paths", "10000"},
      {"ou.k_list", "0,1,3"},
      {"ou.t_list", "0.1,1"},
      {"ou.alpha_a", "1"},
      {"ou.z_max", "4"},
  };
  return table;
}

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

std::vector<std::string> split_list(const std::string& text, const char* sep = ",") {
  std::vector<std::string> parts;
  if (trim(text).empty()) return parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(sep));
  for (auto& p : parts) p = trim(p);
  return parts;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string canonical_value(const std::string& raw) {
  const auto parts = split_list(raw);
  if (parts.empty()) return "";
  std::vector<std::string> out;
  for (const auto& p : parts) {
    double v;
    out.push_back(parse_double(p, v) ? fmt::format("{}", v) : p);
  }
  return boost::algorithm::join(out, ",");
}

}  // namespace

Config Config::defaults() {
  Config c;
  c.entries_ = default_entries();
  return c;
}

bool Config::known_key(const std::string& key) { return default_entries().count(key) > 0; }

bool Config::is_operational(const std::string& key) { return key == "output.dir" || key == "run.threads"; }

void Config::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown configuration key '" + key + "'");
  entries_[key] = trim(value);
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void Config::load_file(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must sit inside a [section]");
    for (const auto& [key, value] : body) set(section + "." + key, value.get_value<std::string>());
  }
}

bool Config::has(const std::string& key) const {
  const auto it = entries_.find(key);
  return it != entries_.end() && !it->second.empty();
}

std::string Config::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  double v;
  if (!parse_double(get(key), v)) throw ConfigError("'" + key + "' must be a number, got '" + get(key) + "'");
  return v;
}

int Config::get_int(const std::string& key) const {
  const auto s = get(key);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("'" + key + "' must be an integer, got '" + s + "'");
  return v;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const auto s = get(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("'" + key + "' must be an unsigned integer, got '" + s + "'");
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const auto s = boost::algorithm::to_lower_copy(get(key));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + key + "' must be a boolean, got '" + get(key) + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& p : split_list(get(key))) {
    double v;
    if (!parse_double(p, v)) throw ConfigError("'" + key + "' must be a list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<int> Config::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& p : split_list(get(key))) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || ptr != p.data() + p.size()) throw ConfigError("'" + key + "' must be a list of integers");
    out.push_back(v);
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [key, value] : entries_) {
    if (is_operational(key)) continue;
    out += key + "=" + canonical_value(value) + "\n";
  }
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string Config::hash() const { return sha256_hex(canonical()); }

void Config::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  std::string section;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << value << "\n";
  }
}

std::vector<AmplitudeMode> parse_amplitude_modes(const std::string& text) {
  std::vector<AmplitudeMode> modes;
  for (const auto& entry : split_list(text, ";")) {
    if (entry.empty()) continue;
    const auto fields = split_list(entry, ":");
    if (fields.size() < 2 || fields.size() > 3) throw ConfigError("amplitude mode must be 'K1[,K2..]:re[:im]'");
    AmplitudeMode m;
    for (const auto& k : split_list(fields[0])) {
      int v = 0;
      const auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), v);
      if (ec != std::errc() || ptr != k.data() + k.size()) throw ConfigError("amplitude mode index must be integer");
      m.K.push_back(v);
    }
    double re = 0, im = 0;
    if (!parse_double(fields[1], re) || (fields.size() == 3 && !parse_double(fields[2], im)))
      throw ConfigError("amplitude mode value must be numeric");
    m.value = cplx(re, im);
    modes.push_back(std::move(m));
  }
  return modes;
}

namespace {

std::vector<std::vector<double>> read_alpha_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open alpha table " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto& p : split_list(line)) {
      double v;
      if (!parse_double(p, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw ConfigError("alpha table row is not numeric: " + line);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

NoiseBand parse_band(const std::string& s) {
  if (s == "all") return NoiseBand::all;
  if (s == "critical") return NoiseBand::critical;
  if (s == "stable") return NoiseBand::stable;
  throw ConfigError("noise.band must be all, critical or stable");
}

std::vector<int> cutoff_list(const Config& c, const std::string& key, int d) {
  auto v = c.get_ints(key);
  if (v.empty()) return v;
  if (v.size() == 1) v.assign(d, v[0]);
  if (static_cast<int>(v.size()) != d) throw ConfigError("'" + key + "' needs 1 or d entries");
  return v;
}

}  // namespace

Eigen::ArrayXd alpha_from_config(const Config& c, const LatticeSpec& fine) {
  Eigen::ArrayXd alpha;
  try {
    alpha = c.has("noise.alpha_table") ? tabulated_alpha(fine, read_alpha_table(c.get("noise.alpha_table")))
                                       : named_alpha(fine, c.get("noise.alpha"));
  } catch (const NoiseError& e) {
    throw ConfigError(e.what());
  }
  return restrict_alpha(fine, std::move(alpha), parse_band(c.get("noise.band"))) * c.get_double("noise.scale");
}

SolverConfig solver_config_from(const Config& c) {
  SolverConfig cfg;
  cfg.d = c.get_int("run.d");
  if (c.has("run.eps")) cfg.eps = c.get_double("run.eps");
  cfg.T0 = c.get_double("run.t0");
  cfg.h = c.get_double("run.h");
  cfg.sh_cutoff = cutoff_list(c, "solver.sh_cutoff", cfg.d);
  cfg.gl_cutoff = cutoff_list(c, "solver.gl_cutoff", cfg.d);
  const auto disp = c.get("solver.dispersion");
  if (disp == "standard")
    cfg.dispersion = Dispersion::standard();
  else if (disp == "fractional")
    cfg.dispersion = Dispersion::fractional(c.get_double("solver.theta"));
  else
    throw ConfigError("solver.dispersion must be standard or fractional");
  cfg.integrator = parse_integrator(c.get("solver.integrator"));
  cfg.dealias = c.get_bool("solver.dealias");
  cfg.nonlinear = c.get_bool("solver.nonlinear");
  cfg.snapshot_stride = c.get_int("output.snapshot_stride");
  cfg.escape_norm = c.get_double("solver.escape_norm");
  return cfg;
}

ExperimentPlan experiment_plan_from(const Config& c) {
  ExperimentPlan plan;
  plan.solver = solver_config_from(c);
  plan.eps_list = c.get_doubles("validate.eps_list");
  plan.beta = c.get_double("noise.beta");
  plan.n_samples = c.get_int("validate.n_samples");
  plan.T0 = c.get_double("run.t0");
  plan.alpha_profile = c.get("noise.alpha");
  if (c.has("noise.alpha_table")) plan.alpha_table = read_alpha_table(c.get("noise.alpha_table"));
  plan.noise_band = parse_band(c.get("noise.band"));
  plan.noise_scale = c.get_double("noise.scale");
  plan.B0 = parse_amplitude_modes(c.get("init.b0"));
  plan.base_seed = c.get_u64("run.seed");
  plan.calibration_quantile = c.get_double("validate.quantile");
  plan.delta = c.get_double("validate.delta");
  plan.C1 = c.get_double("validate.c1");
  plan.delta_prime = c.get_double("validate.delta_prime");
  plan.error_stride = c.get_int("validate.error_stride");
  plan.oversample = c.get_int("validate.oversample");
  return plan;
}

const std::set<std::string>& known_checks() {
  static const std::set<std::string> checks{"t0", "probability", "conditioned", "decomposition", "fit"};
  return checks;
}

}  // namespace shgl
