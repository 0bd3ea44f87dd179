#include "shgl/noise.hpp"

#include <cmath>
#include <sstream>

#include "shgl/phi.hpp"
#include "shgl/rng.hpp"

namespace shgl {

namespace {

constexpr int kModeBits = 21;
constexpr std::int64_t kModeOffset = std::int64_t(1) << 20;

std::uint64_t pack_mode(std::span<const int> j) {
  std::uint64_t key = 0;
  for (int v : j) {
    if (v <= -kModeOffset || v >= kModeOffset) throw NoiseError("lattice index too large for the mode key");
    key = (key << kModeBits) | static_cast<std::uint64_t>(v + kModeOffset);
  }
  return key;
}

// +1 if the first nonzero component is positive, -1 if negative, 0 at the origin.
int half_sign(std::span<const int> j) {
  for (int v : j)
    if (v != 0) return v > 0 ? 1 : -1;
  return 0;
}

Eigen::ArrayXd normalize_l1(const Eigen::ArrayXd& a, const LatticeSpec& fine) {
  const double total = fine.weight() * a.sum();
  if (!(total > 0)) throw NoiseError("alpha profile has zero mass");
  return a / total;
}

// Fine index of e1 + eps K if |eps K| <= 1/10 and it is stored, else -1.
Eigen::Index coupled_source(const LatticeSpec& fine, const LatticeSpec& amplitude, Eigen::Index i) {
  const int n = fine.n();
  std::vector<int> K = amplitude.multi_index(i);
  long long k2 = 0;
  for (int v : K) k2 += static_cast<long long>(v) * v;
  if (100 * k2 > static_cast<long long>(n) * n) return -1;
  K[0] += n;
  return fine.index(K);
}

}  // namespace

NoiseModel make_noise_model(const LatticeSpec& fine, Eigen::ArrayXd alpha, double beta, std::uint64_t seed) {
  if (fine.kind() != LatticeKind::fine) throw NoiseError("noise model requires a fine lattice");
  if (alpha.size() != fine.size()) throw NoiseError("alpha profile size does not match the lattice");
  if (!alpha.isFinite().all() || (alpha < 0).any()) throw NoiseError("alpha must be finite and nonnegative");
  if (!(beta > 1.0)) throw NoiseError("beta must exceed 1");
  const double scale = std::max(1.0, alpha.abs().maxCoeff());
  if (((alpha - alpha.reverse()).abs() > 1e-12 * scale).any())
    throw NoiseError("alpha must satisfy alpha(-k) = alpha(k)");
  NoiseModel m;
  m.lattice = fine;
  m.alpha = std::move(alpha);
  m.beta = beta;
  m.seed = seed;
  m.p1 = projection_mask(fine, ProjectionKind::P1);
  m.pm1 = projection_mask(fine, ProjectionKind::Pm1);
  m.pc = projection_mask(fine, ProjectionKind::Pc);
  m.ps = projection_mask(fine, ProjectionKind::Ps);
  return m;
}

Eigen::ArrayXd lorentzian_alpha(const LatticeSpec& fine) {
  return normalize_l1((1.0 + fine.k_squared()).inverse(), fine);
}

Eigen::ArrayXd flat_alpha(const LatticeSpec& fine) {
  return normalize_l1(Eigen::ArrayXd::Ones(fine.size()), fine);
}

Eigen::ArrayXd tabulated_alpha(const LatticeSpec& fine, const std::vector<std::vector<double>>& rows) {
  const int d = fine.dim();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(fine.size());
  std::vector<int> j(d);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != d + 1) throw NoiseError("alpha table rows need d wavenumbers and a value");
    for (int a = 0; a < d; ++a) {
      const double x = row[a] / fine.spacing();
      j[a] = static_cast<int>(std::lround(x));
      if (std::abs(x - j[a]) > 1e-9 * std::max(1.0, std::abs(x)))
        throw NoiseError("alpha table wavenumber is not a lattice point");
    }
    const double value = row[d];
    if (!std::isfinite(value) || value < 0) throw NoiseError("alpha table values must be finite and nonnegative");
    const auto i = fine.index(j);
    if (i < 0) continue;
    out[i] = value;
    out[fine.mirror(i)] = value;
  }
  return out;
}

Eigen::ArrayXd named_alpha(const LatticeSpec& fine, const std::string& name) {
  if (name == "default" || name == "lorentzian") return lorentzian_alpha(fine);
  if (name == "flat") return flat_alpha(fine);
  if (name == "zero") return Eigen::ArrayXd::Zero(fine.size());
  throw NoiseError("unknown alpha profile '" + name + "'");
}

Eigen::ArrayXd restrict_alpha(const LatticeSpec& fine, Eigen::ArrayXd alpha, NoiseBand band) {
  if (band == NoiseBand::all) return alpha;
  const auto mask = projection_mask(fine, band == NoiseBand::critical ? ProjectionKind::Pc : ProjectionKind::Ps);
  return alpha * mask.values;
}

double sh_noise_amplitude(const NoiseModel& model, Eigen::Index k) {
  const double eps = model.eps();
  const double factor = model.pc.values[k] > 0 ? eps * eps : std::pow(eps, model.beta);
  return factor * model.alpha[k];
}

Eigen::ArrayXd sh_noise_amplitudes(const NoiseModel& model) {
  const double eps = model.eps();
  const double stable = std::pow(eps, model.beta);
  return model.alpha * (model.pc.values * (eps * eps) + model.ps.values * stable);
}

WienerIncrements::WienerIncrements(LatticeSpec lattice, std::uint64_t seed, double h, int n_steps, bool hermitian,
                                   std::uint32_t stream)
    : lattice_(std::move(lattice)), seed_(seed), h_(h), n_steps_(n_steps), hermitian_(hermitian),
      stream_(stream) {
  if (!(h > 0) || !std::isfinite(h)) throw NoiseError("time step must be positive");
  if (n_steps < 1) throw NoiseError("n_steps must be at least 1");
  sqrt_h_ = std::sqrt(h);
}

ModeIncrement WienerIncrements::draw(std::span<const int> j, int step) const {
  const auto key = pack_mode(j);
  const auto s = static_cast<std::uint32_t>(step);
  const auto [a, b] = keyed_normal_pair(seed_, key, s, 2 * stream_);
  const auto [c, e] = keyed_normal_pair(seed_, key, s, 2 * stream_ + 1);
  return {cplx(sqrt_h_ * a, sqrt_h_ * b), cplx(c, e)};
}

ModeIncrement WienerIncrements::mode(Eigen::Index flat, int step) const {
  if (step < 0 || step >= n_steps_) throw NoiseError("step index out of range");
  std::vector<int> j(lattice_.dim());
  lattice_.multi_index(flat, j);
  if (!hermitian_) return draw(j, step);
  const int sign = half_sign(j);
  if (sign == 0) {
    auto m = draw(j, step);
    return {cplx(m.dW.real(), 0.0), cplx(m.aux.real(), 0.0)};
  }
  if (sign > 0) return draw(j, step);
  for (int& v : j) v = -v;
  const auto m = draw(j, step);
  return {std::conj(m.dW), std::conj(m.aux)};
}

StepIncrement WienerIncrements::step(int step) const {
  if (step < 0 || step >= n_steps_) throw NoiseError("step index out of range");
  StepIncrement out{Field(lattice_, hermitian_), Field(lattice_, hermitian_)};
  const Eigen::Index n = lattice_.size();
  std::vector<int> j(lattice_.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (hermitian_ && i < lattice_.origin()) continue;
    lattice_.multi_index(i, j);
    auto m = draw(j, step);
    if (hermitian_ && i == lattice_.origin()) m = {cplx(m.dW.real(), 0.0), cplx(m.aux.real(), 0.0)};
    out.dW[i] = m.dW;
    out.aux[i] = m.aux;
    if (hermitian_ && i != lattice_.origin()) {
      out.dW[lattice_.mirror(i)] = std::conj(m.dW);
      out.aux[lattice_.mirror(i)] = std::conj(m.aux);
    }
  }
  return out;
}

WienerIncrements sample_increments(const NoiseModel& model, double h, int n_steps) {
  return WienerIncrements(model.lattice, model.seed, h, n_steps, true, 0);
}

AmplitudeNoise AmplitudeNoise::standalone(const LatticeSpec& amplitude, Eigen::ArrayXd alpha_A, std::uint64_t seed,
                                          double H, int n_steps) {
  if (amplitude.kind() != LatticeKind::amplitude) throw NoiseError("amplitude noise requires an amplitude lattice");
  if (alpha_A.size() != amplitude.size()) throw NoiseError("alpha_A size does not match the lattice");
  if (!alpha_A.isFinite().all() || (alpha_A < 0).any()) throw NoiseError("alpha_A must be finite and nonnegative");
  WienerIncrements source(amplitude, seed, H, n_steps, false, 1);
  return AmplitudeNoise(amplitude, std::move(alpha_A), H, std::move(source), false);
}

ModeIncrement AmplitudeNoise::mode(Eigen::Index K, int step) const {
  if (!coupled_) return source_.mode(K, step);
  const auto src = sh_index_[K];
  if (src < 0) return {cplx(0.0), cplx(0.0)};
  const auto m = source_.mode(src, step);
  return {scale_ * m.dW, m.aux};
}

StepIncrement AmplitudeNoise::step(int step) const {
  if (!coupled_) return source_.step(step);
  StepIncrement out{Field(lattice_), Field(lattice_)};
  for (Eigen::Index K = 0; K < lattice_.size(); ++K) {
    const auto m = mode(K, step);
    out.dW[K] = m.dW;
    out.aux[K] = m.aux;
  }
  return out;
}

AmplitudeNoise gl_noise_from_sh(const NoiseModel& model, const WienerIncrements& incr, double H,
                                const LatticeSpec& amplitude) {
  if (amplitude.kind() != LatticeKind::amplitude) throw NoiseError("GL noise requires an amplitude lattice");
  require_same_lattice(model.lattice, incr.lattice(), "gl_noise_from_sh");
  if (amplitude.dim() != model.lattice.dim() || amplitude.n() != model.lattice.n())
    throw NoiseError("amplitude lattice does not match the fine lattice's dimension or eps");
  const double eps = model.eps();
  const double expected = eps * eps * incr.h();
  if (std::abs(H - expected) > 1e-12 * expected) {
    std::ostringstream msg;
    msg << "GL step " << H << " does not equal eps^2 h = " << expected;
    throw NoiseError(msg.str());
  }
  Eigen::ArrayXd alpha_A = coupled_alpha_A(model, amplitude);
  std::vector<Eigen::Index> sh_index(amplitude.size(), -1);
  for (Eigen::Index i = 0; i < amplitude.size(); ++i) sh_index[i] = coupled_source(model.lattice, amplitude, i);
  AmplitudeNoise out(amplitude, std::move(alpha_A), H, incr, true);
  out.scale_ = eps;
  out.sh_index_ = std::move(sh_index);
  return out;
}

Eigen::ArrayXd coupled_alpha_A(const NoiseModel& model, const LatticeSpec& amplitude) {
  if (amplitude.dim() != model.lattice.dim() || amplitude.n() != model.lattice.n())
    throw NoiseError("amplitude lattice does not match the fine lattice's dimension or eps");
  Eigen::ArrayXd alpha_A = Eigen::ArrayXd::Zero(amplitude.size());
  const double w = model.lattice.weight();
  for (Eigen::Index i = 0; i < amplitude.size(); ++i) {
    const auto f = coupled_source(model.lattice, amplitude, i);
    if (f >= 0) alpha_A[i] = w * model.alpha[f];
  }
  return alpha_A;
}

StochasticConvolution stochastic_convolution(double rate, double h) {
  if (!(h > 0)) throw NoiseError("time step must be positive");
  const double x = rate * h;
  StochasticConvolution c;
  c.decay = std::exp(x);
  c.gain = phi1(x);
  double var;
  if (std::abs(x) < 1e-3)
    var = h * x * x * (1.0 / 12.0 + x / 12.0 + 17.0 * x * x / 360.0);
  else
    var = h * (phi1(2.0 * x) - c.gain * c.gain);
  c.residual_sd = std::sqrt(std::max(var, 0.0));
  return c;
}

cplx ou_exact_step(cplx z, double lambda_prime, double amp, cplx dW, cplx aux, double h) {
  if (!(lambda_prime > 0)) throw NoiseError("OU damping rate must be positive");
  const auto c = stochastic_convolution(-lambda_prime, h);
  return c.decay * z + amp * (c.gain * dW + c.residual_sd * aux);
}

}  // namespace shgl
