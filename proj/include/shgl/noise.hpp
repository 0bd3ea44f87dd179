#pragma once

// Additive space-time noise on the fine lattice, its critical/stable split,
// the coupled amplitude-equation noise, and exact Ornstein-Uhlenbeck stepping.
//
// Complex Wiener convention: W = W_r + i W_i with independent standard real
// components, so E|dW|^2 = 2h. The k = 0 mode is kept real (dW_i = 0) and
// dW(-k) = conj(dW(k)), which makes the physical noise real.

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "shgl/lattice.hpp"

namespace shgl {

using Field = SpectralField<double>;
using cplx = std::complex<double>;

class NoiseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NoiseModel {
  LatticeSpec lattice;
  Eigen::ArrayXd alpha;
  double beta = 1.5;
  std::uint64_t seed = 0;
  ProjectionMask p1, pm1, pc, ps;

  double eps() const { return lattice.eps(); }
};

/// Validates alpha (nonnegative, finite, alpha(-k) = alpha(k)) and beta > 1.
NoiseModel make_noise_model(const LatticeSpec& fine, Eigen::ArrayXd alpha, double beta, std::uint64_t seed);

/// alpha(k) = c / (1 + |k|^2) with c chosen so that eps^d sum_k alpha(k) = 1.
Eigen::ArrayXd lorentzian_alpha(const LatticeSpec& fine);

/// Constant profile with eps^d sum_k alpha(k) = 1.
Eigen::ArrayXd flat_alpha(const LatticeSpec& fine);

/// Profile tabulated as rows (k_1, ..., k_d, alpha); unlisted points get 0.
/// Rows must sit on lattice points; their mirrors are filled in.
Eigen::ArrayXd tabulated_alpha(const LatticeSpec& fine, const std::vector<std::vector<double>>& rows);

/// Named profiles: "default"/"lorentzian", "flat", "zero".
Eigen::ArrayXd named_alpha(const LatticeSpec& fine, const std::string& name);

enum class NoiseBand { all, critical, stable };
Eigen::ArrayXd restrict_alpha(const LatticeSpec& fine, Eigen::ArrayXd alpha, NoiseBand band);

/// eps^2 alpha(k) on S_1 u S_-1, eps^beta alpha(k) on S_s.
double sh_noise_amplitude(const NoiseModel& model, Eigen::Index k);
Eigen::ArrayXd sh_noise_amplitudes(const NoiseModel& model);

/// One mode, one step: the Wiener increment and an independent standard
/// complex normal used to complete exact OU sampling.
struct ModeIncrement {
  cplx dW;
  cplx aux;
};

struct StepIncrement {
  Field dW;
  Field aux;
};

/// Keyed increment source: every (seed, lattice point, step) maps to a fixed
/// draw, so paths are reproducible and modes/samples can be generated in any
/// order or concurrently.
class WienerIncrements {
 public:
  WienerIncrements(LatticeSpec lattice, std::uint64_t seed, double h, int n_steps, bool hermitian,
                   std::uint32_t stream = 0);

  const LatticeSpec& lattice() const { return lattice_; }
  double h() const { return h_; }
  int n_steps() const { return n_steps_; }
  std::uint64_t seed() const { return seed_; }
  bool hermitian() const { return hermitian_; }

  ModeIncrement mode(Eigen::Index flat, int step) const;
  StepIncrement step(int step) const;

 private:
  ModeIncrement draw(std::span<const int> j, int step) const;

  LatticeSpec lattice_;
  std::uint64_t seed_;
  double h_;
  int n_steps_;
  bool hermitian_;
  std::uint32_t stream_;
  double sqrt_h_;
};

/// Increments for the model's fine lattice with SH step h.
WienerIncrements sample_increments(const NoiseModel& model, double h, int n_steps);

/// Noise driving Z_A on the amplitude lattice: profile alpha_A(K) and
/// increments of standard Wiener processes in slow time T with step H.
class AmplitudeNoise {
 public:
  /// Independent GL-native noise (no SH counterpart).
  static AmplitudeNoise standalone(const LatticeSpec& amplitude, Eigen::ArrayXd alpha_A, std::uint64_t seed,
                                   double H, int n_steps);

  const LatticeSpec& lattice() const { return lattice_; }
  const Eigen::ArrayXd& alpha() const { return alpha_; }
  double H() const { return H_; }
  int n_steps() const { return source_.n_steps(); }
  bool coupled() const { return coupled_; }

  ModeIncrement mode(Eigen::Index K, int step) const;
  StepIncrement step(int step) const;

  /// Fine-lattice index that feeds amplitude mode K (coupled noise), or -1.
  Eigen::Index source_index(Eigen::Index K) const { return coupled_ ? sh_index_[K] : -1; }

 private:
  friend AmplitudeNoise gl_noise_from_sh(const NoiseModel&, const WienerIncrements&, double,
                                         const LatticeSpec&);
  AmplitudeNoise(LatticeSpec lattice, Eigen::ArrayXd alpha, double H, WienerIncrements source, bool coupled)
      : lattice_(std::move(lattice)), alpha_(std::move(alpha)), H_(H), source_(std::move(source)),
        coupled_(coupled) {}

  LatticeSpec lattice_;
  Eigen::ArrayXd alpha_;
  double H_;
  WienerIncrements source_;
  bool coupled_;
  double scale_ = 1.0;
  std::vector<Eigen::Index> sh_index_;
};

/// GL noise driven by the same Brownian paths as the SH run:
///   W_A(K, T) = eps W(e1 + eps K, T / eps^2),  so dW_A = eps dW(k) over H = eps^2 h,
///   alpha_A(K) = eps^d alpha(e1 + eps K) for |eps K| <= 1/10, else 0.
/// Throws on H != eps^2 h.
AmplitudeNoise gl_noise_from_sh(const NoiseModel& model, const WienerIncrements& incr, double H,
                                const LatticeSpec& amplitude);

/// alpha_A(K) = eps^d alpha(e1 + eps K) for |eps K| <= 1/10, else 0.
Eigen::ArrayXd coupled_alpha_A(const NoiseModel& model, const LatticeSpec& amplitude);

/// Exact one-step weights for dz = a z dt + dW over [0, h] with the stochastic
/// convolution X = int_0^h e^{a(h-s)} dW(s) sampled conditionally on dW:
///   X = gain dW + residual_sd aux,  gain = Cov(X, dW)/h = phi1(a h),
///   residual_sd^2 = Var X - Cov^2/h = h (phi1(2 a h) - phi1(a h)^2).
/// Any sign of a is allowed.
struct StochasticConvolution {
  double decay = 1.0;
  double gain = 1.0;
  double residual_sd = 0.0;
};
StochasticConvolution stochastic_convolution(double rate, double h);

/// z' = e^{-lambda' h} z + amp int_0^h e^{-lambda'(h-s)} dW(s). Requires lambda' > 0.
cplx ou_exact_step(cplx z, double lambda_prime, double amp, cplx dW, cplx aux, double h);

}  // namespace shgl
