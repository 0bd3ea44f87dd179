#pragma once

// Exponential integrators for the stochastic Swift-Hohenberg equation on the
// fine lattice and the split Ginzburg-Landau system (B, Z_A) on the amplitude
// lattice. Both can be driven by one Brownian source and stepped in lockstep:
// SH step i covers t in [i h, (i+1) h], GL step i covers T = eps^2 t.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shgl/lattice.hpp"
#include "shgl/noise.hpp"
#include "shgl/pseudospectral.hpp"

namespace shgl {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a trajectory produces NaN/Inf or exceeds the escape norm.
class NumericalEscape : public std::runtime_error {
 public:
  NumericalEscape(const std::string& what, int step, double time, double norm)
      : std::runtime_error(what), step(step), time(time), norm(norm) {}
  int step;
  double time;
  double norm;
};

class Dispersion {
 public:
  enum class Variant { standard, fractional };

  static Dispersion standard() { return Dispersion(Variant::standard, 1.0); }
  /// lambda(k) = -|1 - k1^2|^{2 theta} - 4 |k_perp|^2, theta > 1/4.
  static Dispersion fractional(double theta);

  Variant variant() const { return variant_; }
  double theta() const { return theta_; }
  std::string name() const;

  double operator()(std::span<const double> k) const;
  /// lambda on every point of a fine lattice, with exact integer arithmetic
  /// for the standard variant.
  Eigen::ArrayXd on(const LatticeSpec& fine) const;

  friend bool operator==(const Dispersion& a, const Dispersion& b) {
    return a.variant_ == b.variant_ && a.theta_ == b.theta_;
  }

 private:
  Dispersion(Variant v, double theta) : variant_(v), theta_(theta) {}
  Variant variant_ = Variant::standard;
  double theta_ = 1.0;
};

enum class Integrator { etd1, etdrk2 };
std::string to_string(Integrator integrator);
Integrator parse_integrator(const std::string& name);

struct SolverConfig {
  int d = 1;
  double eps = 0.1;
  double T0 = 1.0;
  double h = 0.05;
  /// Empty means the defaults below.
  std::vector<int> sh_cutoff;
  std::vector<int> gl_cutoff;
  Dispersion dispersion = Dispersion::standard();
  Integrator integrator = Integrator::etdrk2;
  bool dealias = true;
  bool nonlinear = true;
  int snapshot_stride = 1;
  double escape_norm = 1e6;

  int n() const { return commensurate_denominator(eps); }
  /// ceil(n/10) per axis, the support of alpha_A.
  std::vector<int> default_gl_cutoff() const;
  /// Axis 0: max(4n, 3n + 3 M_gl,0); other axes: 3 M_gl,a.
  std::vector<int> default_sh_cutoff() const;
  std::vector<int> resolved_gl_cutoff() const;
  std::vector<int> resolved_sh_cutoff() const;

  LatticeSpec fine_lattice() const;
  LatticeSpec amplitude_lattice() const;

  /// Number of SH steps covering [0, T0 / eps^2]; throws unless T0/(eps^2 h) is an integer.
  int n_steps() const;
  double H() const { return eps * eps * h; }

  void validate() const;
};

enum class Component { u, B, Z_A, A };
std::string to_string(Component c);

/// Snapshots of one field component. `times` are in the component's natural
/// time: t for u, T = eps^2 t for amplitude components.
struct Trajectory {
  Component component = Component::u;
  LatticeSpec lattice;
  std::vector<int> steps;
  std::vector<double> times;
  std::vector<Field> fields;

  void push(int step, double time, Field f);
  std::size_t size() const { return fields.size(); }
};

/// -4|K|^2 A + A - 3 (|A|^2 A)^ with the cubic evaluated exactly (dealiased).
Field gl_rhs_deterministic(const Field& A);

/// Advances (B, Z_A) on the amplitude lattice:
///   dZ = -(1 + 4|K|^2) Z dT + alpha_A dW_A          (exact OU step)
///   dB = [(1 - 4|K|^2) B + 2 Z - 3 |B+Z|^2 (B+Z)] dT  (ETD on B, Z frozen per stage)
class GlSplitStepper {
 public:
  GlSplitStepper(const SolverConfig& cfg, Field B0, std::optional<AmplitudeNoise> noise, double H);

  void step();
  int step_index() const { return step_; }
  double time() const { return step_ * H_; }
  const Field& B() const { return B_; }
  const Field& Z() const { return Z_; }
  Field A() const { return B_ + Z_; }

 private:
  Field nonlinear(const Field& B, const Field& Z);
  void check(const char* what) const;

  LatticeSpec lattice_;
  Integrator integrator_;
  bool nonlinear_on_;
  double H_;
  double escape_;
  std::optional<AmplitudeNoise> noise_;
  CubicEvaluator<double> cubic_;
  Eigen::ArrayXd decay_B_, phi1_B_, phi2_B_;
  std::vector<StochasticConvolution> ou_;
  Field B_, Z_;
  int step_ = 0;
};

/// Advances u on the fine lattice with linear symbol lambda(k) + eps^2, the
/// cubic -u^3 by ETD, and the additive noise by its exact stochastic convolution
/// (conditioned on the step's increments).
class ShStepper {
 public:
  ShStepper(const SolverConfig& cfg, Field u0, const NoiseModel* model, std::optional<WienerIncrements> incr);

  void step();
  int step_index() const { return step_; }
  double time() const { return step_ * h_; }
  const Field& u() const { return u_; }
  /// The step's increments (valid after step(); empty without noise).
  const std::optional<StepIncrement>& last_increment() const { return last_; }

 private:
  Field nonlinear(const Field& u);

  LatticeSpec lattice_;
  Integrator integrator_;
  bool nonlinear_on_;
  double h_;
  double escape_;
  std::optional<WienerIncrements> incr_;
  CubicEvaluator<double> cubic_;
  Eigen::ArrayXd decay_, phi1_, phi2_;
  Eigen::ArrayXd noise_gain_, noise_sd_;
  Field u_;
  std::optional<StepIncrement> last_;
  int step_ = 0;
};

struct GlTrajectories {
  Trajectory B;
  Trajectory Z;
};

/// GL run coupled to the model's Brownian paths (alpha_A from the model).
GlTrajectories solve_gl_split(const Field& B0, const NoiseModel& model, const SolverConfig& cfg);
/// GL run with an explicit amplitude noise, or none.
GlTrajectories solve_gl_split(const Field& B0, const std::optional<AmplitudeNoise>& noise, const SolverConfig& cfg);

Trajectory solve_sh(const Field& u0, const NoiseModel& model, const SolverConfig& cfg);

/// eps^{1-d} (B + Z)(K) at fine index n e1 + K plus the conjugate mirror.
Field build_approximation(const Field& B, const Field& Z_A, const LatticeSpec& fine);
Field build_approximation(const Field& A, const LatticeSpec& fine);

}  // namespace shgl
