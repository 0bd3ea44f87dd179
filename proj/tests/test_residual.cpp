#include <cmath>
#include <random>

#include "doctest.h"
#include "shgl/residual.hpp"
#include "shgl/validation.hpp"
#include "support.hpp"

using namespace shgl;

namespace {

Field random_amplitude(const LatticeSpec& amp, int support, std::mt19937_64& rng, double scale = 0.3) {
  std::normal_distribution<double> g;
  Field A(amp);
  std::vector<int> K(amp.dim());
  for (Eigen::Index i = 0; i < amp.size(); ++i) {
    amp.multi_index(i, K);
    bool inside = true;
    for (int v : K) inside = inside && std::abs(v) <= support;
    if (inside) A[i] = scale * cplx(g(rng), g(rng));
  }
  return A;
}

Trajectory stationary_trajectory(double eps, double a) {
  SolverConfig cfg;
  cfg.eps = eps;
  cfg.h = 0.05;
  const auto amp = cfg.amplitude_lattice();
  Field B0(amp);
  B0.at(std::vector<int>{0}) = a;
  auto out = solve_gl_split(B0, std::nullopt, cfg);
  out.B.component = Component::A;
  return out.B;
}

}  // namespace

TEST_CASE("closed form for a constant amplitude") {
  const double eps = 0.1, a = 0.7;
  const auto fine = make_lattice(1, eps, 40, LatticeKind::fine);
  const auto amp = make_lattice(1, eps, 1, LatticeKind::amplitude);
  Field A(amp);
  A.at({0}) = a;
  const Field r = residual_closed_form(A, fine);
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    const int k = fine.multi_index(i)[0];
    if (std::abs(k) != 30) CHECK(std::abs(r[i]) < 1e-16);
  }
  CHECK(sup_norm_physical(r, 256) == doctest::Approx(2 * std::pow(eps * a, 3)).epsilon(1e-10));
  CHECK(wiener_norm(residual_closed_form(Field(amp), fine)) == 0.0);

  const auto small = make_lattice(1, eps, 32, LatticeKind::fine);
  CHECK_THROWS_AS(residual_closed_form(A, small), LatticeError);
}

TEST_CASE("star identity at critical-band points") {
  for (double eps : {0.2, 0.1, 0.05, 0.02}) {
    CHECK(star_identity_defect(make_lattice(1, eps, 4 * static_cast<int>(std::lround(1 / eps)), LatticeKind::fine)) <
          1e-12);
    CHECK(star_identity_defect(make_lattice(2, eps, std::vector<int>{static_cast<int>(std::lround(2 / eps)), 6},
                                            LatticeKind::fine)) < 1e-12);
  }
}

TEST_CASE("single-mode derivative group matches the dispersion") {
  const double eps = 0.1;
  const auto fine = make_lattice(1, eps, 40, LatticeKind::fine);
  const auto amp = make_lattice(1, eps, 3, LatticeKind::amplitude);
  Field A(amp);
  A.at({2}) = 1.0;
  const Field g = residual_derivative_group(A, fine);
  const double k = 1 + 2 * eps;
  const double lam[] = {k};
  const double rhs = eps * (Dispersion::standard()(lam) + 4 * (2 * eps) * (2 * eps));
  CHECK(std::abs(g.at({12}).real() * eps - rhs) < 1e-12);
  CHECK(g.at({12}).imag() == 0.0);
  CHECK(g.at({-12}) == std::conj(g.at({12})));
}

TEST_CASE("closed form and direct residual agree") {
  const double eps = 0.1;
  const auto amp = make_lattice(1, eps, 3, LatticeKind::amplitude);
  const auto fine = make_lattice(1, eps, 40, LatticeKind::fine);

  Field stat(amp);
  stat.at({0}) = 1 / std::sqrt(3.0);
  const auto rs = residual_report(stat, Field(amp), fine);
  CHECK(rs.relative_discrepancy < 1e-10);

  Field single(amp);
  single.at({1}) = 0.5;
  CHECK(residual_report(single, fine).discrepancy < 1e-8);

  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    const Field A = random_amplitude(amp, 1, rng);
    const auto r = residual_report(A, fine);
    CHECK(r.relative_discrepancy < 1e-8);
    CHECK(r.ledger_total_defect < 1e-10 * wiener_norm(r.direct) + 1e-14);
  }
}

TEST_CASE("closed form and direct residual agree in two dimensions") {
  const double eps = 0.2;
  const auto amp = make_lattice(2, eps, std::vector<int>{3, 3}, LatticeKind::amplitude);
  const auto fine = make_lattice(2, eps, std::vector<int>{24, 9}, LatticeKind::fine);
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 3; ++rep) {
    const auto r = residual_report(random_amplitude(amp, 1, rng), fine);
    CHECK(r.relative_discrepancy < 1e-8);
    CHECK(r.order1_sum < 1e-12);
    CHECK(r.order2_sum < 1e-12);
  }
}

TEST_CASE("wrong time derivative is detected") {
  const double eps = 0.1;
  const auto amp = make_lattice(1, eps, 3, LatticeKind::amplitude);
  const auto fine = make_lattice(1, eps, 40, LatticeKind::fine);
  Field A(amp);
  A.at({0}) = 0.3;
  A.at({1}) = cplx(0.1, 0.2);
  const Field rhs = gl_rhs_deterministic(A);
  const auto r = residual_report(A, Field(amp), fine);
  CHECK(r.discrepancy == doctest::Approx(2 * std::pow(eps, 3) * wiener_norm(rhs)).epsilon(1e-8));
  CHECK(r.order3_carrier_sum > 1e-4);
  CHECK(residual_report(A, fine).order3_carrier_sum < 1e-12);
}

TEST_CASE("ledger cancellation structure") {
  const double eps = 0.05;
  const auto amp = make_lattice(1, eps, 6, LatticeKind::amplitude);
  const auto fine = make_lattice(1, eps, 80, LatticeKind::fine);
  std::mt19937_64 rng(47);
  const auto r = residual_report(random_amplitude(amp, 2, rng), fine);
  REQUIRE(r.ledger.size() == 14);
  double order1 = 0;
  for (const auto& t : r.ledger)
    if (t.order == 1) order1 = std::max(order1, t.norm);
  CHECK(order1 > 0.01);
  CHECK(r.order1_sum < 1e-10);
  CHECK(r.order2_sum < 1e-10);
  CHECK(r.order3_carrier_sum < 1e-10);
}

TEST_CASE("convolved residual quadrature") {
  const auto fine = make_lattice(1, 0.5, 8, LatticeKind::fine);
  CHECK_THROWS_AS(convolve_residual(std::vector<double>(50, 0.0), [&](std::size_t) { return Field(fine); },
                                    ResidualBand::s, fine, Dispersion::standard()),
                  std::invalid_argument);

  // Res(tau) = cos(tau) at k = 0 only; lambda(0) = -1, so RES(t) = (cos t + sin t - e^{-t}) / 2
  const auto run = [&](int n) {
    std::vector<double> t(n + 1);
    for (int i = 0; i <= n; ++i) t[i] = 4.0 * i / n;
    return convolve_residual(
        t,
        [&](std::size_t m) {
          Field f(fine, true);
          f[fine.origin()] = std::cos(t[m]);
          return f;
        },
        ResidualBand::s, fine, Dispersion::standard());
  };
  const auto coarse = run(200), finer = run(400);
  double e1 = 0, e2 = 0;
  for (std::size_t i = 0; i < coarse.t.size(); ++i) {
    const double x = coarse.t[i];
    e1 = std::max(e1, std::abs(coarse.norm[i] - fine.weight() * std::abs(0.5 * (std::cos(x) + std::sin(x) - std::exp(-x)))));
  }
  for (std::size_t i = 0; i < finer.t.size(); ++i) {
    const double x = finer.t[i];
    e2 = std::max(e2, std::abs(finer.norm[i] - fine.weight() * std::abs(0.5 * (std::cos(x) + std::sin(x) - std::exp(-x)))));
  }
  CHECK(e1 < 1e-4);
  CHECK(e1 / e2 > 3.5);

  const auto crit = run(200);
  CHECK(crit.sup > 0);
}

TEST_CASE("stationary residual series") {
  const double a = 1 / std::sqrt(3.0);
  std::vector<double> sups;
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto traj = stationary_trajectory(eps, a);
    SolverConfig cfg;
    cfg.eps = eps;
    const auto fine = cfg.fine_lattice();
    const auto c = res_convolved(traj, ResidualBand::c, fine);
    CHECK(c.sup < 1e-16);
    const auto s = res_convolved(traj, ResidualBand::s, fine);
    CHECK(s.sup == doctest::Approx(2 * std::pow(eps * a, 3) / 64).epsilon(1e-6));
    sups.push_back(s.sup);
  }
  const auto fit = fit_exponent({{0.2, sups[0]}, {0.1, sups[1]}, {0.05, sups[2]}});
  CHECK(fit.slope >= 2.8);
}

TEST_CASE("zero amplitude gives zero convolved residual") {
  SolverConfig cfg;
  cfg.eps = 0.2;
  const auto traj = stationary_trajectory(0.2, 0.0);
  const auto fine = cfg.fine_lattice();
  CHECK(res_convolved(traj, ResidualBand::c, fine).sup == 0.0);
  CHECK(res_convolved(traj, ResidualBand::s, fine).sup == 0.0);
}

TEST_CASE("stochastic residual increment is the stable-band forcing") {
  SolverConfig cfg;
  cfg.eps = 0.1;
  const auto fine = cfg.fine_lattice();
  const auto m = make_noise_model(fine, lorentzian_alpha(fine), 1.5, 3);
  const auto incr = sample_increments(m, 0.05, 2).step(1);
  const Field z = stochastic_residual_increment(m, incr);
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    const cplx expect = m.ps.values[i] > 0 ? std::pow(0.1, 1.5) * m.alpha[i] * incr.dW[i] : cplx(0);
    CHECK(std::abs(z[i] - expect) <= 1e-15 * std::abs(expect));
  }
  CHECK(z.hermitian_defect() == 0.0);
}
