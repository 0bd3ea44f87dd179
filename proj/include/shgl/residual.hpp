#pragma once

// Deterministic residual of the modulation ansatz
//   u_A = eps A(eps x, eps^2 t) e^{i x_1} + c.c.
// inserted into the Swift-Hohenberg operator, assembled on the fine lattice.

#include <functional>
#include <string>
#include <vector>

#include "shgl/lattice.hpp"
#include "shgl/solvers.hpp"

namespace shgl {

/// Copy of an amplitude field on a larger (or equal) amplitude box.
Field pad_amplitude(const Field& A, std::vector<int> cutoff);

/// Places eps^{1-d} m(K) A(K) at n e1 + K plus the conjugate mirror, for a
/// real multiplier m given per amplitude point.
Field carrier_band(const Field& A, const Eigen::ArrayXd& multiplier, const LatticeSpec& fine);

/// eps^{1-d} (-4 eps^3 K1^3 - eps^4 K1^4) A(K) at e1 + eps K, plus mirror.
Field residual_derivative_group(const Field& A1, const LatticeSpec& fine);
/// -eps^{3-d} (A*A*A)(K) at 3 e1 + eps K, plus mirror.
Field residual_cubic_group(const Field& A1, const LatticeSpec& fine);
/// Sum of both groups. Requires the fine box to reach 3n + 3M along axis 0.
Field residual_closed_form(const Field& A1, const LatticeSpec& fine);

/// -d/dt u_A + (lambda + eps^2) u_A - u_A^3 evaluated spectrally, with
/// d/dt u_A taken from the supplied dA1/dT.
Field residual_direct(const Field& A1, const Field& dA1_dT, const LatticeSpec& fine,
                      const Dispersion& dispersion = Dispersion::standard());

struct LedgerTerm {
  std::string name;
  int order = 0;  // power of eps of the group
  double norm = 0;
};

struct ResidualReport {
  Field closed_form;
  Field direct;
  double discrepancy = 0;           // wiener_norm(direct - closed_form)
  double relative_discrepancy = 0;  // discrepancy / max(wiener_norm(closed_form), tiny)
  std::vector<LedgerTerm> ledger;
  double order1_sum = 0;  // norm of the summed eps^1 terms
  double order2_sum = 0;  // norm of the summed eps^2 terms
  double order3_carrier_sum = 0;  // eps^3 e^{+-ix} terms; zero iff dA/dT solves GL
  double ledger_total_defect = 0;  // norm(sum s_i - direct)
  double star_defect = 0;
};

/// Full report; dA1_dT defaults to the deterministic GL right-hand side.
/// A1 must have its support within a third of its box so the GL cubic is exact.
ResidualReport residual_report(const Field& A1, const LatticeSpec& fine);
ResidualReport residual_report(const Field& A1, const Field& dA1_dT, const LatticeSpec& fine);

/// max over critical-band points of |(-4 eps^4 K1^3 - eps^5 K1^4) - eps(lambda(k) + 4(k1-1)^2 + 4|k_perp|^2)|
/// with K = (k -+ e1)/eps.
double star_identity_defect(const LatticeSpec& fine);

enum class ResidualBand { c, s };

struct ResidualSeries {
  std::vector<double> t;
  std::vector<double> norm;
  double sup = 0;
};

/// Minimum number of snapshots for the convolved-residual quadrature.
inline constexpr std::size_t kMinResidualSnapshots = 100;

/// ||RES_j(t)||_W at each snapshot, with
///   RES_j(t) = int_0^t e^{lambda (t - tau)} P_j Res(tau) dtau,
/// Res interpolated linearly in tau between snapshots and integrated exactly
/// per mode. `residual(m)` gives Res at snapshot m; `times` are SH times t.
ResidualSeries convolve_residual(const std::vector<double>& times, const std::function<Field(std::size_t)>& residual,
                                 ResidualBand band, const LatticeSpec& fine, const Dispersion& dispersion);

/// RES_j for the closed-form residual of an amplitude trajectory (times in T).
ResidualSeries res_convolved(const Trajectory& A1, ResidualBand band, const LatticeSpec& fine,
                             const Dispersion& dispersion = Dispersion::standard());

/// Split used for stochastic amplitudes A = B + Z_A: derivative groups on B
/// only, cubic group on the full A.
struct ResidualParts {
  ResidualSeries derivative_B;
  ResidualSeries cubic_A;
};
ResidualParts res_convolved_parts(const Trajectory& B, const Trajectory& Z, ResidualBand band,
                                  const LatticeSpec& fine, const Dispersion& dispersion = Dispersion::standard());

/// Res_stoch - Res_det = P_s zeta: the stable-band noise forcing eps^beta alpha dW over one step.
Field stochastic_residual_increment(const NoiseModel& model, const StepIncrement& incr);

}  // namespace shgl
