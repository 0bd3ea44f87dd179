#include "shgl/solvers.hpp"

#include <cmath>
#include <sstream>

#include "shgl/phi.hpp"

namespace shgl {

Dispersion Dispersion::fractional(double theta) {
  if (!(theta > 0.25) || !std::isfinite(theta))
    throw ConfigError("fractional dispersion requires theta > 1/4");
  return Dispersion(Variant::fractional, theta);
}

std::string Dispersion::name() const {
  if (variant_ == Variant::standard) return "standard";
  std::ostringstream s;
  s.precision(17);
  s << "fractional(" << theta_ << ")";
  return s.str();
}

double Dispersion::operator()(std::span<const double> k) const {
  double perp = 0;
  for (std::size_t a = 1; a < k.size(); ++a) perp += k[a] * k[a];
  const double m = 1.0 - k[0] * k[0];
  const double parallel = variant_ == Variant::standard ? m * m : std::pow(std::abs(m), 2.0 * theta_);
  return -parallel - 4.0 * perp;
}

Eigen::ArrayXd Dispersion::on(const LatticeSpec& fine) const {
  const double s = fine.spacing();
  const double s2 = s * s;
  Eigen::ArrayXd out(fine.size());
  std::vector<int> j(fine.dim());
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    fine.multi_index(i, j);
    long long perp = 0;
    for (int a = 1; a < fine.dim(); ++a) perp += static_cast<long long>(j[a]) * j[a];
    double parallel;
    if (fine.kind() == LatticeKind::fine) {
      const long long n = fine.n();
      const double m = static_cast<double>(n * n - static_cast<long long>(j[0]) * j[0]) / static_cast<double>(n * n);
      parallel = variant_ == Variant::standard ? m * m : std::pow(std::abs(m), 2.0 * theta_);
    } else {
      const double m = 1.0 - s2 * j[0] * j[0];
      parallel = variant_ == Variant::standard ? m * m : std::pow(std::abs(m), 2.0 * theta_);
    }
    out[i] = -parallel - 4.0 * s2 * static_cast<double>(perp);
  }
  return out;
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::etd1 ? "etd1" : "etdrk2";
}

Integrator parse_integrator(const std::string& name) {
  if (name == "etd1") return Integrator::etd1;
  if (name == "etdrk2") return Integrator::etdrk2;
  throw ConfigError("unknown integrator '" + name + "'");
}

std::vector<int> SolverConfig::default_gl_cutoff() const {
  const int n = this->n();
  return std::vector<int>(d, (n + 9) / 10);
}

std::vector<int> SolverConfig::default_sh_cutoff() const {
  const int n = this->n();
  const auto gl = resolved_gl_cutoff();
  std::vector<int> out(d);
  out[0] = std::max(4 * n, 3 * n + 3 * gl[0]);
  for (int a = 1; a < d; ++a) out[a] = 3 * gl[a];
  return out;
}

std::vector<int> SolverConfig::resolved_gl_cutoff() const {
  return gl_cutoff.empty() ? default_gl_cutoff() : gl_cutoff;
}

std::vector<int> SolverConfig::resolved_sh_cutoff() const {
  return sh_cutoff.empty() ? default_sh_cutoff() : sh_cutoff;
}

LatticeSpec SolverConfig::fine_lattice() const {
  return make_lattice(d, eps, resolved_sh_cutoff(), LatticeKind::fine);
}

LatticeSpec SolverConfig::amplitude_lattice() const {
  return make_lattice(d, eps, resolved_gl_cutoff(), LatticeKind::amplitude);
}

int SolverConfig::n_steps() const {
  const double steps = T0 / (eps * eps * h);
  const double rounded = std::round(steps);
  if (rounded < 1 || std::abs(steps - rounded) > 1e-9 * rounded)
    throw ConfigError("T0 / (eps^2 h) must be a positive integer number of steps");
  return static_cast<int>(rounded);
}

void SolverConfig::validate() const {
  if (d < 1 || d > 3) throw ConfigError("dimension must be 1, 2 or 3");
  int n;
  try {
    n = this->n();
  } catch (const LatticeError& e) {
    throw ConfigError(e.what());
  }
  if (!(T0 > 0) || !std::isfinite(T0)) throw ConfigError("T0 must be positive");
  if (!(h > 0) || h > 0.1) throw ConfigError("SH step h must lie in (0, 0.1]");
  if (snapshot_stride < 1) throw ConfigError("snapshot stride must be >= 1");
  if (!(escape_norm > 0)) throw ConfigError("escape norm must be positive");
  const auto gl = resolved_gl_cutoff();
  const auto sh = resolved_sh_cutoff();
  if (static_cast<int>(gl.size()) != d || static_cast<int>(sh.size()) != d)
    throw ConfigError("cutoff vectors must have one entry per axis");
  const int need = (n + 9) / 10;
  for (int a = 0; a < d; ++a) {
    if (gl[a] < std::max(need, 1))
      throw ConfigError("gl_cutoff must be >= ceil(n/10) on every axis (support of alpha_A)");
    if (sh[a] < gl[a]) throw ConfigError("sh_cutoff must cover the amplitude modes on every axis");
  }
  if (sh[0] < 3 * n + gl[0]) throw ConfigError("sh_cutoff along axis 0 must resolve the 3 e1 harmonic band");
  n_steps();
}

std::string to_string(Component c) {
  switch (c) {
    case Component::u: return "u";
    case Component::B: return "B";
    case Component::Z_A: return "Z_A";
    case Component::A: return "A";
  }
  return "?";
}

void Trajectory::push(int step, double time, Field f) {
  if (fields.empty())
    lattice = f.lattice();
  else {
    require_same_lattice(lattice, f.lattice(), "Trajectory::push");
    if (!(time > times.back())) throw std::logic_error("trajectory times must increase strictly");
  }
  steps.push_back(step);
  times.push_back(time);
  fields.push_back(std::move(f));
}

namespace {

Eigen::ArrayXd gl_symbol(const LatticeSpec& amp) { return 1.0 - 4.0 * amp.k_squared(); }

}  // namespace

Field gl_rhs_deterministic(const Field& A) {
  const auto& lat = A.lattice();
  if (lat.kind() != LatticeKind::amplitude) throw LatticeError("GL right-hand side needs an amplitude lattice");
  CubicEvaluator<double> cubic(lat, true);
  Field out(lat);
  out.coeffs() = gl_symbol(lat).cast<cplx>() * A.coeffs() - 3.0 * cubic.abs2_times(A).coeffs();
  return out;
}

GlSplitStepper::GlSplitStepper(const SolverConfig& cfg, Field B0, std::optional<AmplitudeNoise> noise, double H)
    : lattice_(B0.lattice()), integrator_(cfg.integrator), nonlinear_on_(cfg.nonlinear), H_(H),
      escape_(cfg.escape_norm), noise_(std::move(noise)), cubic_(lattice_, cfg.dealias), B_(std::move(B0)),
      Z_(lattice_) {
  if (lattice_.kind() != LatticeKind::amplitude) throw LatticeError("GL stepper needs an amplitude lattice");
  if (noise_) require_same_lattice(lattice_, noise_->lattice(), "GL noise");
  B_.set_hermitian(false);
  const Eigen::ArrayXd L = gl_symbol(lattice_);
  decay_B_.resize(L.size());
  phi1_B_.resize(L.size());
  phi2_B_.resize(L.size());
  ou_.resize(L.size());
  const Eigen::ArrayXd k2 = lattice_.k_squared();
  for (Eigen::Index i = 0; i < L.size(); ++i) {
    const double z = L[i] * H_;
    decay_B_[i] = std::exp(z);
    phi1_B_[i] = H_ * phi1(z);
    phi2_B_[i] = H_ * phi2(z);
    ou_[i] = stochastic_convolution(-(1.0 + 4.0 * k2[i]), H_);
  }
}

Field GlSplitStepper::nonlinear(const Field& B, const Field& Z) {
  Field out(lattice_);
  out.coeffs() = 2.0 * Z.coeffs();
  if (nonlinear_on_) out.coeffs() -= 3.0 * cubic_.abs2_times(B + Z).coeffs();
  return out;
}

void GlSplitStepper::check(const char* what) const {
  const double norm = wiener_norm(B_) + wiener_norm(Z_);
  if (!B_.all_finite() || !Z_.all_finite() || !(norm <= escape_)) {
    std::ostringstream msg;
    msg << what << ": GL solution escaped at step " << step_ << " (T = " << time() << ", norm " << norm << ")";
    throw NumericalEscape(msg.str(), step_, time(), norm);
  }
}

void GlSplitStepper::step() {
  Field Z_next(lattice_);
  if (noise_) {
    const auto inc = noise_->step(step_);
    const auto& alpha = noise_->alpha();
    for (Eigen::Index i = 0; i < lattice_.size(); ++i) {
      const auto& c = ou_[i];
      Z_next[i] = c.decay * Z_[i] + alpha[i] * (c.gain * inc.dW[i] + c.residual_sd * inc.aux[i]);
    }
  }
  const Field Nn = nonlinear(B_, Z_);
  Field a(lattice_);
  a.coeffs() = decay_B_.cast<cplx>() * B_.coeffs() + phi1_B_.cast<cplx>() * Nn.coeffs();
  if (integrator_ == Integrator::etdrk2) {
    const Field Na = nonlinear(a, Z_next);
    a.coeffs() += phi2_B_.cast<cplx>() * (Na.coeffs() - Nn.coeffs());
  }
  B_ = std::move(a);
  Z_ = std::move(Z_next);
  ++step_;
  check("GlSplitStepper");
}

ShStepper::ShStepper(const SolverConfig& cfg, Field u0, const NoiseModel* model,
                     std::optional<WienerIncrements> incr)
    : lattice_(u0.lattice()), integrator_(cfg.integrator), nonlinear_on_(cfg.nonlinear), h_(cfg.h),
      escape_(cfg.escape_norm), incr_(std::move(incr)), cubic_(lattice_, cfg.dealias), u_(std::move(u0)) {
  if (lattice_.kind() != LatticeKind::fine) throw LatticeError("SH stepper needs a fine lattice");
  if (u_.hermitian_defect() > 1e-8) throw LatticeError("SH initial data must be Hermitian");
  symmetrize(u_);
  const double eps = lattice_.eps();
  const Eigen::ArrayXd L = cfg.dispersion.on(lattice_) + eps * eps;
  const Eigen::Index N = L.size();
  decay_.resize(N);
  phi1_.resize(N);
  phi2_.resize(N);
  noise_gain_ = Eigen::ArrayXd::Zero(N);
  noise_sd_ = Eigen::ArrayXd::Zero(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double z = L[i] * h_;
    decay_[i] = std::exp(z);
    phi1_[i] = h_ * phi1(z);
    phi2_[i] = h_ * phi2(z);
  }
  if (incr_) {
    if (!model) throw std::logic_error("SH increments supplied without a noise model");
    require_same_lattice(lattice_, model->lattice, "SH noise model");
    require_same_lattice(lattice_, incr_->lattice(), "SH increments");
    if (std::abs(incr_->h() - h_) > 1e-15 * h_) throw NoiseError("SH increments were drawn for a different step");
    const Eigen::ArrayXd amp = sh_noise_amplitudes(*model);
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto c = stochastic_convolution(L[i], h_);
      noise_gain_[i] = amp[i] * c.gain;
      noise_sd_[i] = amp[i] * c.residual_sd;
    }
  }
}

Field ShStepper::nonlinear(const Field& u) {
  if (!nonlinear_on_) return Field(lattice_, true);
  Field c = cubic_.cube(u);
  c *= -1.0;
  return c;
}

void ShStepper::step() {
  const Field Nn = nonlinear(u_);
  Field a(lattice_, true);
  a.coeffs() = decay_.cast<cplx>() * u_.coeffs() + phi1_.cast<cplx>() * Nn.coeffs();
  if (incr_) {
    last_ = incr_->step(step_);
    a.coeffs() += noise_gain_.cast<cplx>() * last_->dW.coeffs() + noise_sd_.cast<cplx>() * last_->aux.coeffs();
  }
  if (integrator_ == Integrator::etdrk2 && nonlinear_on_) {
    const Field Na = nonlinear(a);
    a.coeffs() += phi2_.cast<cplx>() * (Na.coeffs() - Nn.coeffs());
  }
  ++step_;
  const double defect = a.hermitian_defect();
  const double norm = wiener_norm(a);
  if (!a.all_finite() || !(norm <= escape_)) {
    std::ostringstream msg;
    msg << "ShStepper: SH solution escaped at step " << step_ << " (t = " << time() << ", norm " << norm << ")";
    throw NumericalEscape(msg.str(), step_, time(), norm);
  }
  if (defect > 1e-8) {
    std::ostringstream msg;
    msg << "ShStepper: Hermitian symmetry lost at step " << step_ << " (defect " << defect << ")";
    throw NumericalEscape(msg.str(), step_, time(), norm);
  }
  symmetrize(a);
  u_ = std::move(a);
}

namespace {

bool should_snapshot(int step, int stride, int total) { return step % stride == 0 || step == total; }

}  // namespace

GlTrajectories solve_gl_split(const Field& B0, const std::optional<AmplitudeNoise>& noise, const SolverConfig& cfg) {
  cfg.validate();
  require_same_lattice(cfg.amplitude_lattice(), B0.lattice(), "solve_gl_split initial data");
  const int total = cfg.n_steps();
  const double H = cfg.H();
  if (noise && std::abs(noise->H() - H) > 1e-12 * H) throw NoiseError("amplitude noise step does not match eps^2 h");
  GlSplitStepper stepper(cfg, B0, noise, H);
  GlTrajectories out;
  out.B.component = Component::B;
  out.Z.component = Component::Z_A;
  out.B.push(0, 0.0, stepper.B());
  out.Z.push(0, 0.0, stepper.Z());
  for (int s = 1; s <= total; ++s) {
    stepper.step();
    if (should_snapshot(s, cfg.snapshot_stride, total)) {
      out.B.push(s, stepper.time(), stepper.B());
      out.Z.push(s, stepper.time(), stepper.Z());
    }
  }
  return out;
}

GlTrajectories solve_gl_split(const Field& B0, const NoiseModel& model, const SolverConfig& cfg) {
  cfg.validate();
  const int total = cfg.n_steps();
  std::optional<AmplitudeNoise> noise;
  if ((model.alpha > 0).any()) {
    const auto incr = sample_increments(model, cfg.h, total);
    noise = gl_noise_from_sh(model, incr, cfg.H(), cfg.amplitude_lattice());
  }
  return solve_gl_split(B0, noise, cfg);
}

Trajectory solve_sh(const Field& u0, const NoiseModel& model, const SolverConfig& cfg) {
  cfg.validate();
  require_same_lattice(cfg.fine_lattice(), u0.lattice(), "solve_sh initial data");
  const int total = cfg.n_steps();
  std::optional<WienerIncrements> incr;
  if ((model.alpha > 0).any()) incr = sample_increments(model, cfg.h, total);
  ShStepper stepper(cfg, u0, &model, std::move(incr));
  Trajectory out;
  out.component = Component::u;
  out.push(0, 0.0, stepper.u());
  for (int s = 1; s <= total; ++s) {
    stepper.step();
    if (should_snapshot(s, cfg.snapshot_stride, total)) out.push(s, stepper.time(), stepper.u());
  }
  return out;
}

Field build_approximation(const Field& A, const LatticeSpec& fine) {
  const auto& amp = A.lattice();
  if (amp.kind() != LatticeKind::amplitude || fine.kind() != LatticeKind::fine)
    throw LatticeError("build_approximation maps an amplitude field onto a fine lattice");
  if (amp.dim() != fine.dim() || amp.n() != fine.n())
    throw LatticeError("amplitude and fine lattices disagree on dimension or eps");
  const int n = fine.n();
  const double scale = std::pow(fine.eps(), 1 - fine.dim());
  Field out(fine, true);
  std::vector<int> K(amp.dim());
  for (Eigen::Index i = 0; i < amp.size(); ++i) {
    if (A[i] == cplx(0)) continue;
    amp.multi_index(i, K);
    K[0] += n;
    const auto j = fine.index(K);
    if (j < 0) throw LatticeError("amplitude mode falls outside the fine lattice cutoff");
    out[j] += scale * A[i];
    out[fine.mirror(j)] += scale * std::conj(A[i]);
  }
  return out;
}

Field build_approximation(const Field& B, const Field& Z_A, const LatticeSpec& fine) {
  return build_approximation(B + Z_A, fine);
}

}  // namespace shgl
