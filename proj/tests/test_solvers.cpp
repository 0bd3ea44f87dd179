#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "shgl/solvers.hpp"
#include "support.hpp"

using namespace shgl;
using shgl::testing::max_abs_diff;

namespace {

SolverConfig base_config(double eps, double h = 0.05) {
  SolverConfig cfg;
  cfg.eps = eps;
  cfg.h = h;
  cfg.T0 = 1.0;
  return cfg;
}

NoiseModel silent(const LatticeSpec& fine) {
  return make_noise_model(fine, Eigen::ArrayXd::Zero(fine.size()), 1.5, 0);
}

Field amplitude_mode(const LatticeSpec& amp, std::vector<int> K, cplx v) {
  Field f(amp);
  f.at(K) = v;
  return f;
}

}  // namespace

TEST_CASE("dispersion values") {
  const auto lam = Dispersion::standard();
  const double e1[] = {1.0, 0.0}, me1[] = {-1.0, 0.0}, zero[] = {0.0, 0.0}, diag[] = {1.0, 1.0};
  CHECK(lam(e1) == 0.0);
  CHECK(lam(me1) == 0.0);
  CHECK(lam(zero) == -1.0);
  CHECK(lam(diag) == -4.0);

  const auto fine = make_lattice(2, 0.1, std::vector<int>{40, 6}, LatticeKind::fine);
  const Eigen::ArrayXd on = lam.on(fine);
  CHECK(on[fine.index(std::vector<int>{10, 0})] == 0.0);
  CHECK(on[fine.index(std::vector<int>{-10, 0})] == 0.0);
  CHECK(on[fine.origin()] == -1.0);
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    const auto j = fine.multi_index(i);
    const double k[] = {0.1 * j[0], 0.1 * j[1]};
    CHECK(on[i] == doctest::Approx(lam(k)).epsilon(1e-12));
  }
  int positive = 0;
  for (Eigen::Index i = 0; i < fine.size(); ++i) positive += on[i] >= 0 && std::abs(on[i]) > 0;
  CHECK(positive == 0);
}

TEST_CASE("fractional dispersion") {
  CHECK_THROWS_AS(Dispersion::fractional(0.25), ConfigError);
  CHECK_NOTHROW(Dispersion::fractional(0.26));
  const auto lam = Dispersion::fractional(0.5);
  const double e1[] = {1.0}, half[] = {0.5}, three[] = {3.0};
  CHECK(lam(e1) == 0.0);
  CHECK(lam(half) == doctest::Approx(-0.75));
  CHECK(lam(three) == doctest::Approx(-8.0));

  const auto fine = make_lattice(2, 0.1, std::vector<int>{35, 5}, LatticeKind::fine);
  const Eigen::ArrayXd on = lam.on(fine);
  const auto ps = projection_mask(fine, ProjectionKind::Ps);
  CHECK(on[fine.index(std::vector<int>{10, 0})] == 0.0);
  CHECK(on[fine.index(std::vector<int>{-10, 0})] == 0.0);
  for (Eigen::Index i = 0; i < fine.size(); ++i)
    if (ps.values[i] > 0) CHECK(on[i] < 0.0);
}

TEST_CASE("solver config defaults and validation") {
  auto cfg = base_config(0.1);
  CHECK(cfg.resolved_gl_cutoff() == std::vector<int>{1});
  CHECK(cfg.resolved_sh_cutoff() == std::vector<int>{40});
  CHECK(cfg.n_steps() == 2000);
  CHECK_NOTHROW(cfg.validate());
  cfg.h = 0.2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config(0.1);
  cfg.sh_cutoff = {30};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config(0.05);
  cfg.gl_cutoff = {1};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config(0.1);
  cfg.T0 = 0.0123;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config(0.3);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  auto two = base_config(0.2);
  two.d = 2;
  CHECK(two.resolved_sh_cutoff() == std::vector<int>{20, 3});
}

TEST_CASE("gl right-hand side examples") {
  const auto amp = make_lattice(1, 0.1, 4, LatticeKind::amplitude);
  const Field stat = amplitude_mode(amp, {0}, 1 / std::sqrt(3.0));
  CHECK(wiener_norm(gl_rhs_deterministic(stat)) < 1e-15);
  CHECK(wiener_norm(gl_rhs_deterministic(Field(amp))) == 0.0);

  // cubic oracle: direct triple sum of A(k1) A(k2) conj A(-k3)
  std::mt19937_64 rng(8);
  auto small = make_lattice(1, 0.1, 6, LatticeKind::amplitude);
  Field A(small);
  std::normal_distribution<double> g;
  for (int k = -2; k <= 2; ++k) A.at({k}) = cplx(g(rng), g(rng));
  Field ref(small);
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b)
      for (int c = -2; c <= 2; ++c) {
        const int k = a + b - c;
        if (std::abs(k) <= 6) ref.at({k}) += A.at({a}) * A.at({b}) * std::conj(A.at({c}));
      }
  Field expect(small);
  for (Eigen::Index i = 0; i < small.size(); ++i) {
    const double K = small.multi_index(i)[0];
    expect[i] = (1 - 4 * K * K) * A[i] - 3.0 * ref[i];
  }
  CHECK(max_abs_diff(gl_rhs_deterministic(A), expect) < 1e-12);
}

TEST_CASE("gl stationary amplitude stays put") {
  auto cfg = base_config(0.1);
  const auto amp = cfg.amplitude_lattice();
  const Field B0 = amplitude_mode(amp, {0}, 1 / std::sqrt(3.0));
  const auto out = solve_gl_split(B0, std::nullopt, cfg);
  for (const auto& B : out.B.fields) CHECK(max_abs_diff(B, B0) < 1e-8);
  for (const auto& Z : out.Z.fields) CHECK(wiener_norm(Z) == 0.0);

  const auto fine = cfg.fine_lattice();
  const auto zero = solve_gl_split(B0, silent(fine), cfg);
  for (const auto& Z : zero.Z.fields) CHECK(wiener_norm(Z) == 0.0);
}

TEST_CASE("gl linearised growth") {
  auto cfg = base_config(0.1);
  cfg.T0 = 2.0;
  const auto amp = cfg.amplitude_lattice();
  const Field B0 = amplitude_mode(amp, {0}, 1e-3);
  const auto out = solve_gl_split(B0, std::nullopt, cfg);
  for (std::size_t i = 0; i < out.B.size(); ++i) {
    const double expect = 1e-3 * std::exp(out.B.times[i]);
    CHECK(std::abs(std::abs(out.B.fields[i].at({0})) - expect) < 0.01 * expect);
  }
}

TEST_CASE("linear exactness for both solvers") {
  for (auto integ : {Integrator::etd1, Integrator::etdrk2}) {
    auto cfg = base_config(0.1, 0.1);
    cfg.integrator = integ;
    cfg.nonlinear = false;
    cfg.gl_cutoff = {3};
    cfg.T0 = 0.5;
    const auto amp = cfg.amplitude_lattice();
    const Field B0 = amplitude_mode(amp, {2}, cplx(0.4, 0.1));
    GlSplitStepper gl(cfg, B0, std::nullopt, 0.37);
    for (int s = 0; s < 7; ++s) gl.step();
    const cplx expect = B0.at({2}) * std::exp((1 - 16.0) * 7 * 0.37);
    CHECK(std::abs(gl.B().at({2}) - expect) <= 1e-10 * std::abs(expect));

    const auto fine = cfg.fine_lattice();
    Field u0(fine, true);
    u0.at({7}) = cplx(0.3, 0.2);
    u0.at({-7}) = cplx(0.3, -0.2);
    const double k = 0.7;
    const double sym = -(1 - k * k) * (1 - k * k) + 0.01;
    CHECK(sym < 0);
    const auto model = silent(fine);
    const auto traj = solve_sh(u0, model, cfg);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const cplx e = u0.at({7}) * std::exp(sym * traj.times[i]);
      CHECK(std::abs(traj.fields[i].at({7}) - e) <= 1e-10 * std::abs(e));
    }
  }
}

TEST_CASE("etdrk2 temporal order on smooth GL data") {
  auto cfg = base_config(0.1);
  cfg.gl_cutoff = {4};
  const auto amp = cfg.amplitude_lattice();
  Field B0(amp);
  B0.at({0}) = 0.4;
  B0.at({1}) = cplx(0.2, 0.1);
  B0.at({-1}) = cplx(0.15, -0.05);
  const auto run = [&](int steps) {
    GlSplitStepper s(cfg, B0, std::nullopt, 1.0 / steps);
    for (int i = 0; i < steps; ++i) s.step();
    return s.B();
  };
  const Field a = run(20), b = run(40), c = run(80);
  const double order = std::log2(wiener_norm(a - b) / wiener_norm(b - c));
  CHECK(order >= 1.9);

  cfg.integrator = Integrator::etd1;
  const Field d = run(20), e = run(40), f = run(80);
  const double order1 = std::log2(wiener_norm(d - e) / wiener_norm(e - f));
  CHECK(order1 == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("sh trajectories stay hermitian with noise") {
  auto cfg = base_config(0.2);
  cfg.snapshot_stride = 5;
  const auto fine = cfg.fine_lattice();
  const auto model = make_noise_model(fine, lorentzian_alpha(fine), 1.5, 21);
  const auto amp = cfg.amplitude_lattice();
  const Field u0 = build_approximation(amplitude_mode(amp, {0}, 1 / std::sqrt(3.0)), fine);
  const auto traj = solve_sh(u0, model, cfg);
  CHECK(traj.size() == 101);
  for (const auto& u : traj.fields) {
    CHECK(u.hermitian_defect() < 1e-10);
    CHECK(u.hermitian());
  }
  const auto again = solve_sh(u0, model, cfg);
  CHECK((again.fields.back().coeffs() == traj.fields.back().coeffs()).all());
}

TEST_CASE("sh stays near the stationary pattern without noise") {
  std::vector<double> err;
  for (double eps : {0.2, 0.1}) {
    auto cfg = base_config(eps);
    cfg.snapshot_stride = 50;
    const auto fine = cfg.fine_lattice();
    const auto amp = cfg.amplitude_lattice();
    const Field A = amplitude_mode(amp, {0}, 1 / std::sqrt(3.0));
    const Field u0 = build_approximation(A, fine);
    const auto traj = solve_sh(u0, silent(fine), cfg);
    double e = 0;
    for (const auto& u : traj.fields) e = std::max(e, sup_norm_physical(u - u0, oversampled_grid(fine)));
    err.push_back(e);
  }
  CHECK(err[0] < 0.2 * 0.2 * 0.2);
  CHECK(err[1] < 0.1 * 0.1 * 0.1);
}

TEST_CASE("escape detection") {
  auto cfg = base_config(0.2);
  cfg.escape_norm = 1.0;
  const auto fine = cfg.fine_lattice();
  Field u0(fine, true);
  u0.at({0}) = 10.0;
  ShStepper s(cfg, u0, nullptr, std::nullopt);
  CHECK_THROWS_AS(s.step(), NumericalEscape);

  Field bad(fine);
  bad.at({1}) = 1.0;
  CHECK_THROWS_AS(ShStepper(cfg, bad, nullptr, std::nullopt), LatticeError);
}

TEST_CASE("build_approximation examples") {
  const double eps = 0.1;
  const auto fine = make_lattice(1, eps, 40, LatticeKind::fine);
  const auto amp = make_lattice(1, eps, 3, LatticeKind::amplitude);
  const Field one = amplitude_mode(amp, {0}, 1.0);
  const Field u = build_approximation(one, Field(amp), fine);
  CHECK(wiener_norm(u) == doctest::Approx(0.2));
  const auto phys = to_physical(u, 128);
  for (Eigen::Index m = 0; m < phys.values.size(); ++m)
    CHECK(std::abs(phys.values[m] - 0.2 * std::cos(phys.cell_length * m / 128)) < 1e-12);
  CHECK(wiener_norm(build_approximation(Field(amp), Field(amp), fine)) == 0.0);

  std::mt19937_64 rng(14);
  int violations = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Field B = shgl::testing::random_field(amp, rng), Z = shgl::testing::random_field(amp, rng);
    const Field v = build_approximation(B, Z, fine);
    if (wiener_norm(v) > 2 * eps * wiener_norm(B + Z) + 1e-12) ++violations;
    CHECK(v.hermitian_defect() == 0.0);
  }
  CHECK(violations == 0);

  const auto two_fine = make_lattice(2, 0.2, std::vector<int>{20, 3}, LatticeKind::fine);
  const auto two_amp = make_lattice(2, 0.2, 1, LatticeKind::amplitude);
  Field A2(two_amp);
  A2.at({1, -1}) = cplx(1, 2);
  const Field v2 = build_approximation(A2, two_fine);
  CHECK(v2.at({6, -1}) == cplx(5, 10));
  CHECK(v2.at({-6, 1}) == cplx(5, -10));

  const auto narrow = make_lattice(1, eps, 11, LatticeKind::fine);
  const auto wide = make_lattice(1, eps, 3, LatticeKind::amplitude);
  CHECK_THROWS_AS(build_approximation(amplitude_mode(wide, {3}, 1.0), narrow), LatticeError);
}

TEST_CASE("trajectory snapshots respect the stride") {
  auto cfg = base_config(0.2);
  cfg.snapshot_stride = 7;
  const auto amp = cfg.amplitude_lattice();
  const auto out = solve_gl_split(amplitude_mode(amp, {0}, 0.1), std::nullopt, cfg);
  CHECK(out.B.steps.front() == 0);
  CHECK(out.B.steps.back() == cfg.n_steps());
  CHECK(out.B.times.back() == doctest::Approx(1.0));
  for (std::size_t i = 1; i + 1 < out.B.steps.size(); ++i) CHECK(out.B.steps[i] % 7 == 0);
}
