// shgl: command-line driver for the Swift-Hohenberg / Ginzburg-Landau pipelines.
//
//   shgl simulate --model gl --eps 0.1 --t0 1 --seed 7 --out runs/gl
//   shgl validate --config plan.ini --threads 4
//   shgl residual-check --stationary --eps 0.1
//   shgl ou-stats --n-paths 10000
//   shgl sweep --eps-list 0.2,0.1,0.05 --n-samples 10
//   shgl --manifest runs/gl/manifest.json --out runs/replay
//
// Settings resolve as defaults < --config file < --set key=value < dedicated flags.
// Exit codes: 0 ok, 2 config error, 3 numerical escape, 4 acceptance failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "shgl/config.hpp"
#include "shgl/field_io.hpp"
#include "shgl/manifest.hpp"
#include "shgl/residual.hpp"
#include "shgl/validation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace shgl;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kEscape = 3;
constexpr int kAcceptanceFailure = 4;

struct FlagKey {
  std::string flag;
  std::string key;
  std::string help;
};

const std::vector<FlagKey> kPhysicsFlags{
    {"--t0", "run.t0", "slow-time horizon T0"},
    {"--dt", "run.h", "SH time step h"},
    {"--seed", "run.seed", "base seed"},
    {"--d", "run.d", "spatial dimension"},
    {"--beta", "noise.beta", "stable-band noise exponent (> 1)"},
    {"--alpha", "noise.alpha", "noise profile: default, flat, zero"},
    {"--alpha-table", "noise.alpha_table", "CSV table k_1..k_d,alpha"},
    {"--noise-band", "noise.band", "all, critical or stable"},
    {"--noise-scale", "noise.scale", "multiplier on alpha"},
    {"--dispersion", "solver.dispersion", "standard or fractional"},
    {"--theta", "solver.theta", "fractional dispersion exponent"},
    {"--integrator", "solver.integrator", "etd1 or etdrk2"},
    {"--sh-cutoff", "solver.sh_cutoff", "fine lattice cutoff per axis"},
    {"--gl-cutoff", "solver.gl_cutoff", "amplitude lattice cutoff per axis"},
    {"--b0", "init.b0", "initial amplitude modes K:re[:im];..."},
};

const std::vector<FlagKey> kSimulateFlags{
    {"--eps", "run.eps", "scale parameter, 1/n"},
    {"--model", "run.model", "sh, gl or coupled"},
    {"--snapshot-stride", "output.snapshot_stride", "steps between stored snapshots"},
};

const std::vector<FlagKey> kPlanFlags{
    {"--eps-list", "validate.eps_list", "comma-separated eps values"},
    {"--n-samples", "validate.n_samples", "Monte-Carlo samples per eps"},
    {"--quantile", "validate.quantile", "calibration quantile"},
    {"--error-stride", "validate.error_stride", "steps between error evaluations"},
};

const std::vector<FlagKey> kResidualFlags{
    {"--eps", "run.eps", "scale parameter, 1/n"},
    {"--tolerance", "residual.tolerance", "closed form vs direct tolerance"},
};

const std::vector<FlagKey> kOuFlags{
    {"--eps", "run.eps", "scale parameter, 1/n (needed for --alpha-a coupled)"},
    {"--n-paths", "ou.n_paths", "independent OU paths"},
    {"--k-list", "ou.k_list", "K_1 values"},
    {"--t-list", "ou.t_list", "slow times"},
    {"--alpha-a", "ou.alpha_a", "constant alpha_A or 'coupled'"},
    {"--seed", "run.seed", "seed"},
    {"--d", "run.d", "dimension"},
};

struct Options {
  std::string config_file;
  std::vector<std::string> assignments;
  std::string manifest;
  std::string out;
  int threads = 0;
  std::map<std::string, std::string> flags;  // config key -> value
  std::optional<bool> stationary;
  std::string checks;
};

void add_flags(CLI::App* cmd, const std::vector<FlagKey>& table, Options& opt) {
  for (const auto& f : table) {
    cmd->add_option_function<std::string>(
        f.flag, [&opt, key = f.key](const std::string& v) { opt.flags[key] = v; }, f.help);
  }
}

fs::path output_dir(const Config& c, const std::string& fallback_name) {
  if (c.has("output.dir")) return c.get("output.dir");
  if (const char* env = std::getenv("SHGL_OUTPUT_DIR"); env && *env) return fs::path(env) / fallback_name;
  return fs::path("shgl_output") / fallback_name;
}

class Run {
 public:
  Run(std::string command, Config config) : config_(std::move(config)) {
    manifest_.command = std::move(command);
    manifest_.config_hash = config_.hash();
    manifest_.seed = config_.get_u64("run.seed");
    manifest_.version = version_string();
    manifest_.started = utc_timestamp();
    for (const auto& [k, v] : config_.entries())
      if (!Config::is_operational(k)) manifest_.config[k] = v;
    dir_ = output_dir(config_, manifest_.command);
    fs::create_directories(dir_);
    Config recorded = config_;
    recorded.set("output.dir", "");
    recorded.set("run.threads", "1");
    recorded.save(dir_ / "config.ini");
    add_output(dir_ / "config.ini");
  }

  const fs::path& dir() const { return dir_; }
  const Config& config() const { return config_; }

  void add_output(const fs::path& p) { outputs_.push_back(p); }

  fs::path finish() {
    manifest_.finished = utc_timestamp();
    for (const auto& p : outputs_) {
      const auto rel = fs::relative(p, dir_).generic_string();
      manifest_.outputs.push_back(rel);
      manifest_.digests[rel] = sha256_file(p);
    }
    const auto path = dir_ / "manifest.json";
    write_manifest(path, manifest_);
    return path;
  }

 private:
  Config config_;
  RunManifest manifest_;
  fs::path dir_;
  std::vector<fs::path> outputs_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

void require_eps(const Config& c) {
  if (!c.has("run.eps")) throw ConfigError("--eps (run.eps) is required");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_simulate(const Config& c) {
  require_eps(c);
  const auto model_name = c.get("run.model");
  if (model_name != "sh" && model_name != "gl" && model_name != "coupled")
    throw ConfigError("run.model must be sh, gl or coupled");
  const auto t_start = std::chrono::steady_clock::now();
  const SolverConfig cfg = solver_config_from(c);
  cfg.validate();
  const ExperimentPlan plan = experiment_plan_from(c);
  const auto fine = cfg.fine_lattice();
  const auto amp = cfg.amplitude_lattice();
  const NoiseModel model = make_plan_noise(plan, fine, plan.base_seed);
  const int total = cfg.n_steps();
  const Field B0 = make_initial_amplitude(amp, plan.B0);
  const bool run_sh = model_name != "gl";
  const bool run_gl = model_name != "sh";

  std::optional<WienerIncrements> incr;
  std::optional<AmplitudeNoise> gl_noise;
  if ((model.alpha > 0).any()) {
    incr = sample_increments(model, cfg.h, total);
    gl_noise = gl_noise_from_sh(model, *incr, cfg.H(), amp);
  }

  Run run("simulate", c);
  std::optional<ShStepper> sh;
  std::optional<GlSplitStepper> gl;
  std::optional<TrajectoryWriter> u_out, B_out, Z_out;
  if (run_sh) {
    sh.emplace(cfg, build_approximation(B0, fine), &model, incr);
    u_out.emplace(run.dir(), "u");
  }
  if (run_gl) {
    gl.emplace(cfg, B0, gl_noise, cfg.H());
    B_out.emplace(run.dir(), "B");
    Z_out.emplace(run.dir(), "Z");
  }
  std::ofstream err_csv;
  const auto grid = oversampled_grid(fine, plan.oversample);
  if (run_sh && run_gl) {
    err_csv.open(run.dir() / "error.csv");
    err_csv << "step,t,sup_error\n";
  }

  auto emit = [&](int s) {
    if (sh) u_out->push(s, sh->time(), sh->u());
    if (gl) {
      B_out->push(s, gl->time(), gl->B());
      Z_out->push(s, gl->time(), gl->Z());
    }
    if (sh && gl) {
      const double err = sup_norm_physical(sh->u() - build_approximation(gl->A(), fine), grid);
      fmt::print(err_csv, "{},{},{}\n", s, sh->time(), err);
    }
  };

  int code = kOk;
  std::string status = "ok";
  try {
    emit(0);
    for (int s = 1; s <= total; ++s) {
      if (sh) sh->step();
      if (gl) gl->step();
      if (s % cfg.snapshot_stride == 0 || s == total) emit(s);
    }
  } catch (const NumericalEscape& e) {
    fmt::print(stderr, "{}\n", e.what());
    code = kEscape;
    status = "escaped";
  }

  for (auto* w : {u_out ? &*u_out : nullptr, B_out ? &*B_out : nullptr, Z_out ? &*Z_out : nullptr}) {
    if (!w) continue;
    w->close();
    for (const auto& f : w->files()) run.add_output(f);
    run.add_output(w->index_path());
  }
  if (err_csv.is_open()) {
    err_csv.close();
    run.add_output(run.dir() / "error.csv");
  }
  json summary{{"status", status}, {"model", model_name}, {"eps", cfg.eps}, {"steps", total}};
  std::string norms;
  if (sh) {
    summary["u_wiener"] = wiener_norm(sh->u());
    norms += fmt::format(" |u|_W={:.6e}", wiener_norm(sh->u()));
  }
  if (gl) {
    summary["B_wiener"] = wiener_norm(gl->B());
    summary["Z_wiener"] = wiener_norm(gl->Z());
    norms += fmt::format(" |B|_W={:.6e} |Z|_W={:.6e}", wiener_norm(gl->B()), wiener_norm(gl->Z()));
  }
  write_json(run.dir() / "summary.json", summary);
  run.add_output(run.dir() / "summary.json");
  const auto manifest = run.finish();
  fmt::print("simulate {} eps={} steps={}{} wall={:.2f}s status={} manifest={}\n", model_name, cfg.eps, total, norms,
             seconds_since(t_start), status, manifest.string());
  return code;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<std::string> parse_checks(const Config& c) {
  std::vector<std::string> checks;
  std::stringstream ss(c.get("validate.checks"));
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (!known_checks().count(item)) throw ConfigError("unknown check '" + item + "'");
    checks.push_back(item);
  }
  return checks;
}

CheckResult evaluate_check(const std::string& name, const ValidationReport& report, const Config& c) {
  CheckResult r{name, true, ""};
  if (name == "t0") {
    double worst = 0;
    for (const auto& p : report.points)
      for (const auto& rec : p.records)
        if (!rec.escaped) worst = std::max(worst, rec.error_at_t0);
    r.passed = worst < 1e-12;
    r.detail = fmt::format("max error at t=0 {:.3e}", worst);
  } else if (name == "probability" || name == "conditioned") {
    const bool cond = name == "conditioned";
    const double need = cond ? c.get_double("validate.min_conditioned") : 1.0 - report.plan.delta;
    for (const auto& p : report.points) {
      const auto& est = cond ? p.probability_conditioned : p.probability;
      const bool ok = est.defined && est.p_hat >= need;
      r.passed = r.passed && ok;
      r.detail += fmt::format("{}eps={} p={:.3f} [{:.3f},{:.3f}] n={}", r.detail.empty() ? "" : "; ", p.eps,
                              est.p_hat, est.wilson.low, est.wilson.high, est.n);
    }
    r.detail += fmt::format(" (need >= {})", need);
  } else if (name == "decomposition") {
    const double s_max = c.get_double("validate.s_ratio_max");
    const double g_max = c.get_double("validate.rz_growth_max");
    r.passed = report.sup_S_ratio < s_max;
    double growth = 0;
    for (const auto& p : report.points)
      if (p.rz_q99_third_quarter > 0) growth = std::max(growth, p.rz_q99_fourth_quarter / p.rz_q99_third_quarter);
    r.passed = r.passed && growth <= g_max;
    r.detail = fmt::format("sup S ratio {:.3f} (< {}), R_Z q99 growth {:.3f} (<= {})", report.sup_S_ratio, s_max,
                           growth, g_max);
  } else if (name == "fit") {
    if (!report.fit) {
      r.passed = false;
      r.detail = "needs at least three eps values";
    } else {
      const double lo = c.get_double("validate.slope_min"), hi = c.get_double("validate.slope_max");
      r.passed = report.fit->slope >= lo && report.fit->slope <= hi;
      r.detail = fmt::format("slope {:.3f} [{:.3f},{:.3f}] (need in [{}, {}])", report.fit->slope,
                             report.fit->ci_low, report.fit->ci_high, lo, hi);
    }
  }
  return r;
}

void print_plan_table(const ValidationReport& report) {
  fmt::print("C = {:.6g}\n", report.C);
  fmt::print("{:>10} {:>6} {:>14} {:>8} {:>8} {:>8}\n", "eps", "n", "median_sup", "p_hat", "p_cond", "escaped");
  for (const auto& p : report.points)
    fmt::print("{:>10.6g} {:>6} {:>14.6e} {:>8.3f} {:>8.3f} {:>8}\n", p.eps, p.records.size(), p.median_sup_error,
               p.probability.p_hat, p.probability_conditioned.p_hat, p.probability.escaped);
  if (report.fit)
    fmt::print("fit slope {:.4f} +- {:.4f} (95% CI [{:.4f}, {:.4f}])\n", report.fit->slope, report.fit->slope_stderr,
               report.fit->ci_low, report.fit->ci_high);
}

int run_plan_command(const std::string& command, const Config& c, bool with_checks) {
  const auto checks = with_checks ? parse_checks(c) : std::vector<std::string>{};
  const ExperimentPlan plan = experiment_plan_from(c);
  plan.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const ValidationReport report = run_plan(plan, c.get_int("run.threads"));
  Run run(command, c);

  json j = to_json(report);
  bool all = true;
  if (with_checks) {
    json jc = json::array();
    for (const auto& name : checks) {
      const auto r = evaluate_check(name, report, c);
      all = all && r.passed;
      jc.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
      fmt::print("{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    }
    j["checks"] = jc;
    j["passed"] = all;
  }
  write_json(run.dir() / "report.json", j);
  run.add_output(run.dir() / "report.json");
  {
    std::ofstream csv(run.dir() / "records.csv");
    write_records_csv(csv, report);
  }
  run.add_output(run.dir() / "records.csv");
  const auto manifest = run.finish();
  print_plan_table(report);
  fmt::print("{} wall={:.2f}s manifest={}\n", command, seconds_since(t_start), manifest.string());
  return all ? kOk : kAcceptanceFailure;
}

int cmd_residual(const Config& c) {
  require_eps(c);
  const SolverConfig base = solver_config_from(c);
  const int d = base.d;
  const double eps = base.eps;
  const bool stationary = c.get_bool("residual.stationary");
  std::vector<AmplitudeMode> modes;
  if (stationary)
    modes.push_back({std::vector<int>(d, 0), cplx(1.0 / std::sqrt(3.0), 0.0)});
  else
    modes = parse_amplitude_modes(c.get("init.b0"));

  std::vector<int> M(d, 1);
  for (const auto& m : modes) {
    if (static_cast<int>(m.K.size()) != d) throw ConfigError("init.b0 mode dimension does not match run.d");
    for (int a = 0; a < d; ++a) M[a] = std::max(M[a], std::abs(m.K[a]));
  }
  std::vector<int> box(d), fine_cut(d);
  for (int a = 0; a < d; ++a) box[a] = 3 * M[a];
  const int n = commensurate_denominator(eps);
  fine_cut[0] = std::max(4 * n, 3 * n + 3 * box[0]);
  for (int a = 1; a < d; ++a) fine_cut[a] = 3 * box[a];
  const auto amp = make_lattice(d, eps, box, LatticeKind::amplitude);
  const auto fine = make_lattice(d, eps, fine_cut, LatticeKind::fine);
  const Field A1 = make_initial_amplitude(amp, modes);

  const auto t_start = std::chrono::steady_clock::now();
  const ResidualReport rep = residual_report(A1, fine);
  const double tolerance = c.get_double("residual.tolerance");

  SolverConfig cfg = base;
  cfg.gl_cutoff = box;
  cfg.sh_cutoff = fine_cut;
  cfg.snapshot_stride = std::max(1, cfg.n_steps() / 400);
  cfg.validate();
  const auto traj = solve_gl_split(A1, std::optional<AmplitudeNoise>{}, cfg);
  const auto res_c = res_convolved(traj.B, ResidualBand::c, fine, cfg.dispersion);
  const auto res_s = res_convolved(traj.B, ResidualBand::s, fine, cfg.dispersion);

  Run run("residual-check", c);
  json ledger = json::array();
  for (const auto& t : rep.ledger) ledger.push_back({{"name", t.name}, {"order", t.order}, {"norm", t.norm}});
  const bool passed = rep.discrepancy < tolerance;
  json j{{"eps", eps},
         {"stationary", stationary},
         {"discrepancy", rep.discrepancy},
         {"relative_discrepancy", rep.relative_discrepancy},
         {"tolerance", tolerance},
         {"passed", passed},
         {"ledger", ledger},
         {"order1_sum", rep.order1_sum},
         {"order2_sum", rep.order2_sum},
         {"order3_carrier_sum", rep.order3_carrier_sum},
         {"ledger_total_defect", rep.ledger_total_defect},
         {"star_defect", rep.star_defect},
         {"closed_form_wiener", wiener_norm(rep.closed_form)},
         {"RES_c_sup", res_c.sup},
         {"RES_s_sup", res_s.sup}};
  write_json(run.dir() / "residual.json", j);
  run.add_output(run.dir() / "residual.json");
  {
    std::ofstream csv(run.dir() / "res_series.csv");
    csv << "t,RES_c,RES_s\n";
    for (std::size_t i = 0; i < res_c.t.size(); ++i) fmt::print(csv, "{},{},{}\n", res_c.t[i], res_c.norm[i], res_s.norm[i]);
  }
  run.add_output(run.dir() / "res_series.csv");
  const auto manifest = run.finish();
  fmt::print("{} residual eps={} discrepancy={:.3e} (tol {}) |Res|_W={:.6e} RES_c={:.3e} RES_s={:.3e} wall={:.2f}s "
             "manifest={}\n",
             passed ? "PASS" : "FAIL", eps, rep.discrepancy, tolerance, wiener_norm(rep.closed_form), res_c.sup,
             res_s.sup, seconds_since(t_start), manifest.string());
  return passed ? kOk : kAcceptanceFailure;
}

int cmd_ou_stats(const Config& c) {
  const int d = c.get_int("run.d");
  const auto k1 = c.get_ints("ou.k_list");
  const auto T_list = c.get_doubles("ou.t_list");
  const int n_paths = c.get_int("ou.n_paths");
  const auto seed = c.get_u64("run.seed");
  if (k1.empty() || T_list.empty()) throw ConfigError("ou.k_list and ou.t_list must be non-empty");
  if (n_paths < 2) throw ConfigError("ou.n_paths must be >= 2");
  std::vector<std::vector<int>> K_list;
  int reach = 1;
  for (int k : k1) {
    std::vector<int> K(d, 0);
    K[0] = k;
    K_list.push_back(K);
    reach = std::max(reach, std::abs(k));
  }

  const auto t_start = std::chrono::steady_clock::now();
  std::vector<OuMomentRow> rows;
  const auto alpha_a = c.get("ou.alpha_a");
  if (alpha_a == "coupled") {
    require_eps(c);
    SolverConfig cfg = solver_config_from(c);
    cfg.validate();
    const ExperimentPlan plan = experiment_plan_from(c);
    const NoiseModel model = make_plan_noise(plan, cfg.fine_lattice(), seed);
    rows = ou_moment_check(model, cfg.amplitude_lattice(), K_list, T_list, n_paths, seed);
  } else {
    const double a = c.get_double("ou.alpha_a");
    const double eps = c.has("run.eps") ? c.get_double("run.eps") : 0.1;
    const auto amp = make_lattice(d, eps, reach, LatticeKind::amplitude);
    rows = ou_moment_check(amp, Eigen::ArrayXd::Constant(amp.size(), a), K_list, T_list, n_paths, seed);
  }

  Run run("ou-stats", c);
  const double z_max = c.get_double("ou.z_max");
  bool passed = true;
  json jr = json::array();
  std::ofstream csv(run.dir() / "ou_stats.csv");
  csv << "K1,T,empirical,analytic,std_error,z\n";
  fmt::print("{:>4} {:>8} {:>14} {:>14} {:>12} {:>8}\n", "K1", "T", "empirical", "analytic", "std_error", "z");
  for (const auto& r : rows) {
    passed = passed && std::abs(r.z) < z_max;
    fmt::print(csv, "{},{},{},{},{},{}\n", r.K[0], r.T, r.empirical, r.analytic, r.std_error, r.z);
    fmt::print("{:>4} {:>8.4g} {:>14.6e} {:>14.6e} {:>12.4e} {:>8.3f}\n", r.K[0], r.T, r.empirical, r.analytic,
               r.std_error, r.z);
    jr.push_back({{"K", r.K}, {"T", r.T}, {"empirical", r.empirical}, {"analytic", r.analytic},
                  {"std_error", r.std_error}, {"z", r.z}});
  }
  csv.close();
  run.add_output(run.dir() / "ou_stats.csv");
  write_json(run.dir() / "ou_stats.json", {{"n_paths", n_paths}, {"z_max", z_max}, {"passed", passed}, {"rows", jr}});
  run.add_output(run.dir() / "ou_stats.json");
  const auto manifest = run.finish();
  fmt::print("{} ou-stats: {} rows, |z| < {} wall={:.2f}s manifest={}\n", passed ? "PASS" : "FAIL", rows.size(), z_max,
             seconds_since(t_start), manifest.string());
  return passed ? kOk : kAcceptanceFailure;
}

int dispatch(const std::string& command, const Config& c) {
  if (command == "simulate") return cmd_simulate(c);
  if (command == "validate") return run_plan_command("validate", c, true);
  if (command == "sweep") return run_plan_command("sweep", c, false);
  if (command == "residual-check") return cmd_residual(c);
  if (command == "ou-stats") return cmd_ou_stats(c);
  throw ConfigError("unknown command '" + command + "'");
}

Config build_config(const Options& opt) {
  Config c = Config::defaults();
  if (!opt.config_file.empty()) c.load_file(opt.config_file);
  for (const auto& a : opt.assignments) c.set_assignment(a);
  for (const auto& [key, value] : opt.flags) c.set(key, value);
  if (opt.stationary) c.set("residual.stationary", *opt.stationary ? "true" : "false");
  if (!opt.checks.empty()) c.set("validate.checks", opt.checks);
  return c;
}

void apply_operational(Config& c, const Options& opt) {
  if (!opt.out.empty()) c.set("output.dir", opt.out);
  if (opt.threads > 0) c.set("run.threads", std::to_string(opt.threads));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swift-Hohenberg / Ginzburg-Landau approximation pipelines", "shgl"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_file, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", opt.assignments, "override one key, section.key=value (repeatable)");
  app.add_option("--manifest", opt.manifest, "replay the run recorded in a manifest")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "output directory (default $SHGL_OUTPUT_DIR/<command>)");
  app.add_option("--threads", opt.threads, "worker threads")->check(CLI::NonNegativeNumber);

  auto* simulate = app.add_subcommand("simulate", "integrate SH, GL or both and stream trajectories");
  add_flags(simulate, kSimulateFlags, opt);
  add_flags(simulate, kPhysicsFlags, opt);

  auto* validate = app.add_subcommand("validate", "Monte-Carlo approximation plan with acceptance checks");
  add_flags(validate, kPlanFlags, opt);
  add_flags(validate, kPhysicsFlags, opt);
  validate->add_option("--checks", opt.checks, "comma-separated: t0,probability,conditioned,decomposition,fit");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo plan over an eps list, report only");
  add_flags(sweep, kPlanFlags, opt);
  add_flags(sweep, kPhysicsFlags, opt);

  auto* residual = app.add_subcommand("residual-check", "closed-form residual ledger and convolved residuals");
  residual->alias("residual");
  add_flags(residual, kResidualFlags, opt);
  add_flags(residual, kPhysicsFlags, opt);
  residual->add_flag_function(
      "--stationary,!--modulated", [&opt](std::int64_t count) { opt.stationary = count > 0; },
      "stationary amplitude 1/sqrt(3), or the init.b0 modes");

  auto* ou = app.add_subcommand("ou-stats", "second moments of the amplitude OU modes against closed form");
  add_flags(ou, kOuFlags, opt);

  if (argc <= 1) {
    std::cerr << app.help();
    return kConfigError;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    std::string command;
    Config config;
    if (!opt.manifest.empty()) {
      if (!app.get_subcommands().empty()) throw ConfigError("--manifest replays a run; do not give a subcommand");
      const RunManifest m = read_manifest(opt.manifest);
      command = m.command;
      config = config_from_manifest(m);
    } else {
      if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return kConfigError;
      }
      command = app.get_subcommands().front()->get_name();
      config = build_config(opt);
    }
    apply_operational(config, opt);
    return dispatch(command, config);
  } catch (const NumericalEscape& e) {
    fmt::print(stderr, "numerical escape: {}\n", e.what());
    return kEscape;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const LatticeError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const NoiseError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
