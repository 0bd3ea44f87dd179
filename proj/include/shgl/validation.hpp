#pragma once

// Monte-Carlo harness for the coupled SH / amplitude runs: per-sample sup
// errors, the R = R_c + R_B + R_Z error split, exponent fits and exceedance
// probabilities.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "shgl/noise.hpp"
#include "shgl/solvers.hpp"

namespace shgl {

struct AmplitudeMode {
  std::vector<int> K;
  cplx value;
};

struct ExperimentPlan {
  std::vector<double> eps_list{0.2, 0.1};
  double beta = 1.5;
  int n_samples = 20;
  double T0 = 1.0;
  /// Template; eps and T0 are overwritten per sweep point.
  SolverConfig solver;
  std::string alpha_profile = "default";
  /// Rows (k_1..k_d, alpha); overrides alpha_profile when non-empty.
  std::vector<std::vector<double>> alpha_table;
  NoiseBand noise_band = NoiseBand::all;
  double noise_scale = 1.0;
  /// Initial B on the amplitude lattice (Z_A(0) = 0); default stationary 1/sqrt(3).
  std::vector<AmplitudeMode> B0{{{0}, cplx(1.0 / std::sqrt(3.0), 0.0)}};
  std::uint64_t base_seed = 1;
  double calibration_quantile = 0.95;
  double delta = 0.1;
  /// Bound and regularity loss of the conditioning event
  /// sup ||Z_A||_{W^1} + sup ||B||_{W^{3-delta'}} <= C1.
  double C1 = 2.0;
  double delta_prime = 0.1;
  /// Steps between error evaluations.
  int error_stride = 1;
  int oversample = 2;
  bool decompose = true;

  void validate() const;
  SolverConfig config_for(double eps) const;
  std::uint64_t sample_seed(int i) const;
};

/// Error-split series at the evaluation times (SH time t).
struct ErrorSplit {
  std::vector<double> t;
  std::vector<double> Rc, RB, RZ, S;
};

struct SampleRecord {
  double eps = 0;
  std::uint64_t seed = 0;
  double sup_error = 0;
  double sup_error_wiener = 0;
  double t_at_max = 0;
  double error_at_t0 = 0;
  bool escaped = false;
  std::string escape_message;
  double ass3 = 0;
  ErrorSplit split;
  double sup_S = 0;
};

Field make_initial_amplitude(const LatticeSpec& amplitude, const std::vector<AmplitudeMode>& modes);
NoiseModel make_plan_noise(const ExperimentPlan& plan, const LatticeSpec& fine, std::uint64_t seed);

/// Tracks R_Z (exact OU on the stable band, rate lambda(k), amplitude alpha(k))
/// and evaluates the R_c / R_B / R_Z split of R = (u - eps Psi) / eps^beta.
class ErrorDecomposer {
 public:
  ErrorDecomposer(const NoiseModel& model, const SolverConfig& cfg);

  /// Advances R_Z over one SH step with that step's increments.
  void advance(const StepIncrement& incr);
  void advance_deterministic();

  struct Row {
    double Rc, RB, RZ, S;
  };
  Row evaluate(const Field& u, const Field& approximation);

  const Field& RZ() const { return RZ_; }

 private:
  const NoiseModel* model_;
  double eps_beta_;
  Eigen::ArrayXd decay_, gain_, sd_;
  Field RZ_;
  double sup_Rc_ = 0, sup_RB_ = 0;
};

/// Coupled SH + amplitude run from one Brownian source; escapes are recorded, not thrown.
SampleRecord run_coupled_sample(double eps, std::uint64_t seed, const ExperimentPlan& plan);

/// The same split computed from stored trajectories (snapshot steps must match).
ErrorSplit error_decomposition(const Trajectory& u, const Trajectory& B, const Trajectory& Z, const NoiseModel& model,
                               const SolverConfig& cfg);

struct FitResult {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
  double ci_low = 0, ci_high = 0;
  int n_used = 0;
  std::vector<std::string> warnings;
};

/// Least squares of log(error) on log(eps) with a 95% t-interval on the slope.
FitResult fit_exponent(const std::vector<std::pair<double, double>>& pairs);

struct Interval {
  double low = 0, high = 0;
};
Interval wilson_interval(int successes, int n, double z = 1.959964);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

struct ProbabilityEstimate {
  bool defined = false;
  int n = 0;
  int successes = 0;
  int escaped = 0;
  double p_hat = 0;
  Interval wilson;
};

/// Fraction of records with sup_error <= C eps^beta; escaped records fail.
ProbabilityEstimate estimate_probability(const std::vector<SampleRecord>& records, double C, double beta);
/// Same, restricted to records inside the conditioning event ass3 <= C1.
ProbabilityEstimate estimate_probability_conditioned(const std::vector<SampleRecord>& records, double C, double beta,
                                                     double C1);
/// Quantile of sup_error / eps^beta (escaped records excluded).
double calibrate_constant(const std::vector<SampleRecord>& records, double beta, double q);

struct OuMomentRow {
  std::vector<int> K;
  double T = 0;
  double empirical = 0;
  double analytic = 0;
  double std_error = 0;
  double z = 0;
};

/// Empirical E|Z_A(K,T)|^2 from exact OU paths versus
/// alpha_A(K)^2 (1 - e^{-2 (1+4|K|^2) T}) / (1 + 4|K|^2).
std::vector<OuMomentRow> ou_moment_check(const LatticeSpec& amplitude, const Eigen::ArrayXd& alpha_A,
                                         const std::vector<std::vector<int>>& K_list, const std::vector<double>& T_list,
                                         int n_paths, std::uint64_t seed, int steps_per_unit = 100);
/// alpha_A taken from the model's coupling alpha_A(K) = eps^d alpha(e1 + eps K).
std::vector<OuMomentRow> ou_moment_check(const NoiseModel& model, const LatticeSpec& amplitude,
                                         const std::vector<std::vector<int>>& K_list, const std::vector<double>& T_list,
                                         int n_paths, std::uint64_t seed);

struct EpsSummary {
  double eps = 0;
  std::vector<SampleRecord> records;
  ProbabilityEstimate probability;
  ProbabilityEstimate probability_conditioned;
  double median_sup_error = 0;
  double median_sup_S = 0;
  /// Mean 99th percentile of ||R_Z|| over the third and fourth quarter of the run.
  double rz_q99_third_quarter = 0;
  double rz_q99_fourth_quarter = 0;
};

struct ValidationReport {
  ExperimentPlan plan;
  double C = 0;
  std::vector<EpsSummary> points;
  std::optional<FitResult> fit;
  double sup_S_ratio = 0;  // max over eps / min over eps of the median sup S
};

/// Runs every (eps, sample) pair on up to `threads` workers. Results do not
/// depend on the thread count.
ValidationReport run_plan(const ExperimentPlan& plan, int threads = 1);

/// Applies `fn(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const FitResult& fit);
void write_records_csv(std::ostream& os, const ValidationReport& report);

}  // namespace shgl
