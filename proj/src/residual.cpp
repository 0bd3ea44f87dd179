#include "shgl/residual.hpp"

#include <cmath>

#include "shgl/phi.hpp"
#include "shgl/pseudospectral.hpp"

namespace shgl {

namespace {

void require_pair(const Field& A, const LatticeSpec& fine) {
  const auto& amp = A.lattice();
  if (amp.kind() != LatticeKind::amplitude || fine.kind() != LatticeKind::fine)
    throw LatticeError("residual: expected an amplitude field and a fine lattice");
  if (amp.dim() != fine.dim() || amp.n() != fine.n())
    throw LatticeError("residual: amplitude and fine lattices disagree on dimension or eps");
}

std::vector<int> scaled_cutoff(const LatticeSpec& lat, int factor) {
  auto c = lat.cutoff();
  for (int& m : c) m *= factor;
  return c;
}

/// Places scale * C(K) at carrier * n e1 + K and conj at the mirror.
Field place_band(const Field& C, double scale, int carrier, const LatticeSpec& fine, bool require_fit) {
  const auto& amp = C.lattice();
  Field out(fine, true);
  std::vector<int> K(amp.dim());
  for (Eigen::Index i = 0; i < amp.size(); ++i) {
    if (C[i] == cplx(0)) continue;
    amp.multi_index(i, K);
    K[0] += carrier * fine.n();
    const auto j = fine.index(K);
    if (j < 0) {
      if (require_fit) throw LatticeError("fine lattice cutoff insufficient for the residual harmonics");
      continue;
    }
    out[j] += scale * C[i];
    out[fine.mirror(j)] += scale * std::conj(C[i]);
  }
  return out;
}

Field exact_cube(const Field& A) {
  const Field padded = pad_amplitude(A, scaled_cutoff(A.lattice(), 3));
  CubicEvaluator<double> cubic(padded.lattice(), true);
  return cubic.product(padded, padded, padded);
}

Field exact_abs2_times(const Field& A) {
  const Field padded = pad_amplitude(A, scaled_cutoff(A.lattice(), 3));
  CubicEvaluator<double> cubic(padded.lattice(), true);
  return cubic.abs2_times(padded);
}

void require_box(const LatticeSpec& amp, const LatticeSpec& fine) {
  if (fine.cutoff(0) < 3 * fine.n() + 3 * amp.cutoff(0))
    throw LatticeError("fine lattice cutoff insufficient for the 3 e1 residual band");
  for (int a = 1; a < fine.dim(); ++a)
    if (fine.cutoff(a) < 3 * amp.cutoff(a)) throw LatticeError("fine lattice cutoff insufficient for the residual band");
}

}  // namespace

Field pad_amplitude(const Field& A, std::vector<int> cutoff) {
  const auto& src = A.lattice();
  if (static_cast<int>(cutoff.size()) != src.dim()) throw LatticeError("pad_amplitude: cutoff dimension mismatch");
  for (int a = 0; a < src.dim(); ++a)
    if (cutoff[a] < src.cutoff(a)) throw LatticeError("pad_amplitude: target box smaller than source");
  LatticeSpec dst(src.n(), std::move(cutoff), src.kind());
  Field out(dst, A.hermitian());
  std::vector<int> K(src.dim());
  for (Eigen::Index i = 0; i < src.size(); ++i) {
    src.multi_index(i, K);
    out[dst.index(K)] = A[i];
  }
  return out;
}

Field carrier_band(const Field& A, const Eigen::ArrayXd& multiplier, const LatticeSpec& fine) {
  require_pair(A, fine);
  Field scaled(A.lattice(), A.coeffs() * multiplier.cast<cplx>());
  return place_band(scaled, std::pow(fine.eps(), 1 - fine.dim()), 1, fine, true);
}

Field residual_derivative_group(const Field& A1, const LatticeSpec& fine) {
  require_pair(A1, fine);
  const double eps = fine.eps();
  const Eigen::ArrayXd K1 = A1.lattice().k_component(0);
  const Eigen::ArrayXd m = -4.0 * std::pow(eps, 3) * K1.cube() - std::pow(eps, 4) * K1.square().square();
  return carrier_band(A1, m, fine);
}

Field residual_cubic_group(const Field& A1, const LatticeSpec& fine) {
  require_pair(A1, fine);
  require_box(A1.lattice(), fine);
  const double eps = fine.eps();
  return place_band(exact_cube(A1), -std::pow(eps, 3 - fine.dim()), 3, fine, true);
}

Field residual_closed_form(const Field& A1, const LatticeSpec& fine) {
  return residual_derivative_group(A1, fine) + residual_cubic_group(A1, fine);
}

Field residual_direct(const Field& A1, const Field& dA1_dT, const LatticeSpec& fine, const Dispersion& dispersion) {
  require_pair(A1, fine);
  require_same_lattice(A1.lattice(), dA1_dT.lattice(), "residual_direct");
  require_box(A1.lattice(), fine);
  const double eps = fine.eps();
  const Field uA = build_approximation(A1, fine);
  Field dudt = build_approximation(dA1_dT, fine);
  dudt *= eps * eps;
  const Eigen::ArrayXd L = dispersion.on(fine) + eps * eps;
  CubicEvaluator<double> cubic(fine, true);
  Field out(fine, true);
  out.coeffs() = -dudt.coeffs() + L.cast<cplx>() * uA.coeffs() - cubic.cube(uA).coeffs();
  return out;
}

double star_identity_defect(const LatticeSpec& fine) {
  const double eps = fine.eps();
  const auto lambda = Dispersion::standard().on(fine);
  const auto pc = projection_mask(fine, ProjectionKind::Pc);
  std::vector<int> j(fine.dim());
  double worst = 0;
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    if (pc.values[i] == 0) continue;
    fine.multi_index(i, j);
    const int sign = j[0] > 0 ? 1 : -1;
    const double k1 = sign * eps * j[0];
    double perp = 0;
    for (int a = 1; a < fine.dim(); ++a) perp += eps * eps * double(j[a]) * j[a];
    const double K1 = (k1 - 1.0) / eps;
    const double lhs = -4.0 * std::pow(eps, 4) * K1 * K1 * K1 - std::pow(eps, 5) * K1 * K1 * K1 * K1;
    const double rhs = eps * (lambda[i] + 4.0 * (k1 - 1.0) * (k1 - 1.0) + 4.0 * perp);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

ResidualReport residual_report(const Field& A1, const LatticeSpec& fine) {
  return residual_report(A1, gl_rhs_deterministic(A1), fine);
}

ResidualReport residual_report(const Field& A1, const Field& dA1_dT, const LatticeSpec& fine) {
  require_pair(A1, fine);
  ResidualReport r;
  r.closed_form = residual_closed_form(A1, fine);
  r.direct = residual_direct(A1, dA1_dT, fine);
  r.discrepancy = wiener_norm(Field(r.direct - r.closed_form));
  r.relative_discrepancy = r.discrepancy / std::max(wiener_norm(r.closed_form), 1e-300);
  r.star_defect = star_identity_defect(fine);

  // Each s_i, expanded in powers of eps on the e^{+-i x1} carrier band.
  const double eps = fine.eps();
  const auto& amp = A1.lattice();
  const Eigen::ArrayXd K1 = amp.k_component(0);
  const Eigen::ArrayXd Kperp2 = amp.k_squared() - K1.square();
  const Eigen::ArrayXd one = Eigen::ArrayXd::Ones(amp.size());
  auto band = [&](const Eigen::ArrayXd& m) { return carrier_band(A1, m, fine); };

  Field s1 = build_approximation(dA1_dT, fine);
  s1 *= -eps * eps;
  const Field s2 = band(-one);
  const Field s3_1 = band(2.0 * one);
  const Field s3_2 = band(4.0 * eps * K1);
  const Field s3_3 = band(2.0 * eps * eps * K1.square());
  const Field s4_1 = band(-one);
  const Field s4_2 = band(-4.0 * eps * K1);
  const Field s4_3 = band(-6.0 * eps * eps * K1.square());
  const Field s4_4 = band(-4.0 * std::pow(eps, 3) * K1.cube());
  const Field s4_5 = band(-std::pow(eps, 4) * K1.square().square());
  const Field s5 = band(-4.0 * eps * eps * Kperp2);
  const Field s6 = band(eps * eps * one);
  CubicEvaluator<double> cubic(fine, true);
  Field s7 = cubic.cube(build_approximation(A1, fine));
  s7 *= -1.0;

  // The e^{+-i x1} part of s7 is -3 eps^3 |A|^2 A; the rest sits at +-3 e1.
  const Field s7_carrier = place_band(exact_abs2_times(A1), -3.0 * std::pow(eps, 3 - fine.dim()), 1, fine, true);
  const Field s7_harmonic = s7 - s7_carrier;

  auto term = [&](const char* name, int order, const Field& f) {
    r.ledger.push_back({name, order, wiener_norm(f)});
  };
  term("s1", 3, s1);
  term("s2", 1, s2);
  term("s3.eps1", 1, s3_1);
  term("s3.eps2", 2, s3_2);
  term("s3.eps3", 3, s3_3);
  term("s4.eps1", 1, s4_1);
  term("s4.eps2", 2, s4_2);
  term("s4.eps3", 3, s4_3);
  term("s4.eps4", 4, s4_4);
  term("s4.eps5", 5, s4_5);
  term("s5", 3, s5);
  term("s6", 3, s6);
  term("s7.carrier", 3, s7_carrier);
  term("s7.harmonic", 3, s7_harmonic);

  r.order1_sum = wiener_norm(Field(s2 + s3_1 + s4_1));
  r.order2_sum = wiener_norm(Field(s3_2 + s4_2));
  r.order3_carrier_sum = wiener_norm(Field(s1 + s3_3 + s4_3 + s5 + s6 + s7_carrier));
  Field total = s1 + s2 + s3_1 + s3_2 + s3_3 + s4_1 + s4_2 + s4_3 + s4_4 + s4_5 + s5 + s6 + s7;
  r.ledger_total_defect = wiener_norm(Field(total - r.direct));
  return r;
}

ResidualSeries convolve_residual(const std::vector<double>& times, const std::function<Field(std::size_t)>& residual,
                                 ResidualBand band, const LatticeSpec& fine, const Dispersion& dispersion) {
  if (times.size() < kMinResidualSnapshots)
    throw std::invalid_argument("convolved residual needs at least 100 snapshots for the quadrature");
  const auto mask = projection_mask(fine, band == ResidualBand::c ? ProjectionKind::Pc : ProjectionKind::Ps);
  const Eigen::ArrayXd lambda = dispersion.on(fine);
  std::vector<Eigen::Index> modes;
  for (Eigen::Index i = 0; i < fine.size(); ++i)
    if (mask.values[i] > 0) modes.push_back(i);

  ResidualSeries out;
  Eigen::ArrayXcd state = Eigen::ArrayXcd::Zero(static_cast<Eigen::Index>(modes.size()));
  Eigen::ArrayXcd prev(state.size()), next(state.size());
  auto gather = [&](const Field& f, Eigen::ArrayXcd& dst) {
    require_same_lattice(fine, f.lattice(), "convolve_residual");
    for (std::size_t m = 0; m < modes.size(); ++m) dst[static_cast<Eigen::Index>(m)] = f[modes[m]];
  };
  gather(residual(0), prev);
  out.t.push_back(times[0]);
  out.norm.push_back(0.0);
  const double w = fine.weight();
  for (std::size_t s = 1; s < times.size(); ++s) {
    const double dt = times[s] - times[s - 1];
    if (!(dt > 0)) throw std::invalid_argument("convolved residual needs strictly increasing times");
    gather(residual(s), next);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const auto i = static_cast<Eigen::Index>(m);
      const double z = lambda[modes[m]] * dt;
      const double p1 = phi1(z), p2 = phi2(z);
      state[i] = std::exp(z) * state[i] + dt * ((p1 - p2) * prev[i] + p2 * next[i]);
    }
    prev.swap(next);
    const double norm = w * state.abs().sum();
    out.t.push_back(times[s]);
    out.norm.push_back(norm);
    out.sup = std::max(out.sup, norm);
  }
  return out;
}

namespace {

std::vector<double> sh_times(const Trajectory& traj, double eps) {
  std::vector<double> t(traj.times.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = traj.times[i] / (eps * eps);
  return t;
}

}  // namespace

ResidualSeries res_convolved(const Trajectory& A1, ResidualBand band, const LatticeSpec& fine,
                             const Dispersion& dispersion) {
  return convolve_residual(
      sh_times(A1, fine.eps()), [&](std::size_t m) { return residual_closed_form(A1.fields[m], fine); }, band, fine,
      dispersion);
}

ResidualParts res_convolved_parts(const Trajectory& B, const Trajectory& Z, ResidualBand band,
                                  const LatticeSpec& fine, const Dispersion& dispersion) {
  if (B.times != Z.times) throw std::invalid_argument("B and Z_A trajectories have different snapshot times");
  const auto t = sh_times(B, fine.eps());
  ResidualParts parts;
  parts.derivative_B = convolve_residual(
      t, [&](std::size_t m) { return residual_derivative_group(B.fields[m], fine); }, band, fine, dispersion);
  parts.cubic_A = convolve_residual(
      t, [&](std::size_t m) { return residual_cubic_group(Field(B.fields[m] + Z.fields[m]), fine); }, band, fine,
      dispersion);
  return parts;
}

Field stochastic_residual_increment(const NoiseModel& model, const StepIncrement& incr) {
  require_same_lattice(model.lattice, incr.dW.lattice(), "stochastic_residual_increment");
  Field out(model.lattice, true);
  out.coeffs() = (model.ps.values * sh_noise_amplitudes(model)).cast<cplx>() * incr.dW.coeffs();
  return out;
}

}  // namespace shgl
