#include <cmath>
#include <random>

#include "doctest.h"
#include "shgl/noise.hpp"
#include "shgl/rng.hpp"
#include "shgl/solvers.hpp"
#include "shgl/validation.hpp"
#include "support.hpp"

using namespace shgl;

namespace {

NoiseModel unit_alpha_model(double eps, int cutoff, double beta = 1.5) {
  const auto fine = make_lattice(1, eps, cutoff, LatticeKind::fine);
  return make_noise_model(fine, Eigen::ArrayXd::Ones(fine.size()), beta, 9);
}

}  // namespace

TEST_CASE("noise model validation") {
  const auto fine = make_lattice(1, 0.1, 30, LatticeKind::fine);
  Eigen::ArrayXd a = lorentzian_alpha(fine);
  CHECK(fine.weight() * a.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fine.weight() * flat_alpha(fine).sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_NOTHROW(make_noise_model(fine, a, 1.5, 1));
  CHECK_THROWS_AS(make_noise_model(fine, a, 1.0, 1), NoiseError);
  Eigen::ArrayXd neg = a;
  neg[3] = -1e-3;
  neg[fine.mirror(3)] = -1e-3;
  CHECK_THROWS_AS(make_noise_model(fine, neg, 1.5, 1), NoiseError);
  Eigen::ArrayXd asym = a;
  asym[3] *= 2;
  CHECK_THROWS_AS(make_noise_model(fine, asym, 1.5, 1), NoiseError);
  CHECK_THROWS_AS(named_alpha(fine, "pink"), NoiseError);
  CHECK((named_alpha(fine, "zero") == 0).all());
}

TEST_CASE("tabulated profiles fill mirrors and reject off-lattice rows") {
  const auto fine = make_lattice(1, 0.1, 30, LatticeKind::fine);
  const auto a = tabulated_alpha(fine, {{1.0, 2.0}, {0.0, 0.5}});
  CHECK(a[fine.index(std::vector<int>{10})] == 2.0);
  CHECK(a[fine.index(std::vector<int>{-10})] == 2.0);
  CHECK(a[fine.origin()] == 0.5);
  CHECK(a.sum() == 4.5);
  CHECK_THROWS_AS(tabulated_alpha(fine, {{0.15, 1.0}}), NoiseError);
}

TEST_CASE("noise amplitudes per band") {
  const auto m = unit_alpha_model(0.1, 30);
  const auto e1 = m.lattice.index(std::vector<int>{10});
  CHECK(sh_noise_amplitude(m, e1) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(sh_noise_amplitude(m, m.lattice.origin()) == doctest::Approx(std::pow(10.0, -1.5)).epsilon(1e-14));
  const Eigen::ArrayXd all = sh_noise_amplitudes(m);
  for (Eigen::Index i = 0; i < m.lattice.size(); ++i) CHECK(all[i] == doctest::Approx(sh_noise_amplitude(m, i)));

  const auto fine = m.lattice;
  const auto zero = make_noise_model(fine, restrict_alpha(fine, Eigen::ArrayXd::Ones(fine.size()), NoiseBand::stable),
                                     1.5, 1);
  CHECK(sh_noise_amplitude(zero, e1) == 0.0);
  CHECK(sh_noise_amplitude(zero, fine.origin()) > 0.0);
}

TEST_CASE("increments are keyed, mirrored and reproducible") {
  const auto fine = make_lattice(2, 0.25, std::vector<int>{12, 3}, LatticeKind::fine);
  CHECK_THROWS_AS(WienerIncrements(fine, 1, 0.01, 0, true), NoiseError);
  WienerIncrements inc(fine, 77, 0.01, 3, true);
  const auto s = inc.step(1);
  CHECK(s.dW.hermitian_defect() == 0.0);
  CHECK(s.aux.hermitian_defect() == 0.0);
  CHECK(s.dW[fine.origin()].imag() == 0.0);
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    const auto m = inc.mode(i, 1);
    CHECK(m.dW == s.dW[i]);
    CHECK(m.aux == s.aux[i]);
    CHECK(inc.mode(fine.mirror(i), 1).dW == std::conj(m.dW));
  }
  WienerIncrements again(fine, 77, 0.01, 3, true);
  CHECK((again.step(1).dW.coeffs() == s.dW.coeffs()).all());
  WienerIncrements other(fine, 78, 0.01, 3, true);
  CHECK((other.step(1).dW.coeffs() != s.dW.coeffs()).any());
  CHECK_THROWS_AS(inc.step(3), NoiseError);

  const auto u = to_physical(s.dW, oversampled_grid(fine));
  CHECK(u.real);
}

TEST_CASE("increment statistics") {
  const auto fine = make_lattice(1, 0.5, 4, LatticeKind::fine);
  const double h = 0.04;
  const int n = 100000;
  WienerIncrements inc(fine, 5, h, n, true);
  const auto k = fine.index(std::vector<int>{3});
  double mean = 0, m2 = 0, cross = 0, aux2 = 0;
  for (int s = 0; s < n; ++s) {
    const auto m = inc.mode(k, s);
    const double x = m.dW.real() / std::sqrt(h);
    mean += x;
    m2 += x * x;
    cross += m.dW.real() * m.dW.imag() / h;
    aux2 += std::norm(m.aux);
  }
  mean /= n;
  const double var = m2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var > 0.97);
  CHECK(var < 1.03);
  CHECK(std::abs(cross / n) < 0.02);
  CHECK(aux2 / n == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("coupled amplitude noise is a rescaling of the SH critical band") {
  const double eps = 0.05;
  const auto m = make_noise_model(make_lattice(1, eps, 66, LatticeKind::fine),
                                  lorentzian_alpha(make_lattice(1, eps, 66, LatticeKind::fine)), 1.5, 4);
  const double h = 0.02;
  const auto incr = sample_increments(m, h, 10);
  const auto amp = make_lattice(1, eps, 3, LatticeKind::amplitude);
  CHECK_THROWS_AS(gl_noise_from_sh(m, incr, 2 * eps * eps * h, amp), NoiseError);
  const auto gl = gl_noise_from_sh(m, incr, eps * eps * h, amp);
  CHECK(gl.coupled());
  CHECK(gl.source_index(amp.origin()) == m.lattice.index(std::vector<int>{20}));

  for (int s = 0; s < 10; ++s) {
    const auto sh = incr.step(s);
    const auto a = gl.step(s);
    for (Eigen::Index K = 0; K < amp.size(); ++K) {
      const int k = amp.multi_index(K)[0];
      if (std::abs(k) <= 2) {
        const auto src = m.lattice.index(std::vector<int>{20 + k});
        CHECK(std::abs(a.dW[K] / eps - sh.dW[src]) <= 1e-14 * std::abs(sh.dW[src]));
        CHECK(a.aux[K] == sh.aux[src]);
      } else {
        CHECK(a.dW[K] == cplx(0));
      }
    }
  }
  const auto alpha_A = gl.alpha();
  CHECK(alpha_A[amp.origin()] == doctest::Approx(eps * m.alpha[m.lattice.index(std::vector<int>{20})]));
  CHECK(alpha_A[amp.index(std::vector<int>{3})] == 0.0);
  CHECK(alpha_A[amp.index(std::vector<int>{2})] > 0.0);
}

TEST_CASE("coupled amplitude increments have variance H per component") {
  const double eps = 0.1, h = 0.05, H = eps * eps * h;
  const auto fine = make_lattice(1, eps, 40, LatticeKind::fine);
  const auto m = make_noise_model(fine, lorentzian_alpha(fine), 1.5, 12);
  const int n = 50000;
  const auto incr = sample_increments(m, h, n);
  const auto amp = make_lattice(1, eps, 1, LatticeKind::amplitude);
  const auto gl = gl_noise_from_sh(m, incr, H, amp);
  double s2 = 0;
  for (int s = 0; s < n; ++s) s2 += std::pow(gl.mode(amp.origin(), s).dW.real(), 2);
  CHECK(s2 / n / H == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("ou exact step") {
  const cplx z(0.3, -0.2);
  CHECK(std::abs(ou_exact_step(z, 2.0, 0.0, cplx(1, 1), cplx(1, 1), 0.1) - std::exp(-0.2) * z) < 1e-15);
  CHECK_THROWS_AS(ou_exact_step(z, 0.0, 1.0, {}, {}, 0.1), NoiseError);

  // one huge step from zero: variance per component amp^2 (1 - e^{-2 lambda h}) / (2 lambda) -> amp^2 / 2
  for (double h : {1e-4, 0.1, 1.0, 50.0}) {
    const auto c = stochastic_convolution(-1.0, h);
    CHECK(c.gain * c.gain * h + c.residual_sd * c.residual_sd ==
          doctest::Approx((1 - std::exp(-2 * h)) / 2).epsilon(1e-12));
  }
  const auto c = stochastic_convolution(-1.0, 50.0);
  CHECK(c.gain * c.gain * 50.0 + c.residual_sd * c.residual_sd == doctest::Approx(0.5).epsilon(1e-12));

  // growing modes use the same formula with a > 0, and a = 0 is a plain increment
  const auto g = stochastic_convolution(0.5, 0.2);
  CHECK(g.gain * g.gain * 0.2 + g.residual_sd * g.residual_sd ==
        doctest::Approx((std::exp(0.2) - 1) / 1.0).epsilon(1e-12));
  const auto flat = stochastic_convolution(0.0, 0.3);
  CHECK(flat.gain == 1.0);
  CHECK(flat.residual_sd == 0.0);
}

TEST_CASE("small-rate residual series joins the closed form") {
  for (double x : {9e-4, 1.1e-3}) {
    const double h = 0.5, a = x / h;
    const auto c = stochastic_convolution(-a, h);
    // long double reference of h (phi1(2x) - phi1(x)^2)
    const long double X = -x;
    const long double p1 = std::expm1(X) / X, p2 = std::expm1(2 * X) / (2 * X);
    const double ref = std::sqrt(static_cast<double>(h * (p2 - p1 * p1)));
    CHECK(c.residual_sd == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("conditional OU sampling matches a fine Euler-Maruyama path") {
  // Oracle: both the step increment and the stochastic convolution built from
  // 1000 Euler sub-steps of one Brownian path.
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g;
  const double lam = 3.0, h = 0.5, dt = h / 1000;
  const int paths = 4000;
  double cov = 0, var = 0;
  for (int p = 0; p < paths; ++p) {
    double W = 0, X = 0;
    for (int s = 0; s < 1000; ++s) {
      const double dw = std::sqrt(dt) * g(rng);
      X = X * std::exp(-lam * dt) + dw;
      W += dw;
    }
    cov += X * W;
    var += X * X;
  }
  cov /= paths;
  var /= paths;
  const auto c = stochastic_convolution(-lam, h);
  CHECK(cov / h == doctest::Approx(c.gain).epsilon(0.06));
  CHECK(var == doctest::Approx(c.gain * c.gain * h + c.residual_sd * c.residual_sd).epsilon(0.06));
}

TEST_CASE("ou stationary variance against Euler-Maruyama") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  const double lam = 1.0, amp = 0.8, dt = 1e-4, T = 3.0;
  const int paths = 1500, steps = static_cast<int>(T / dt);
  double em = 0;
  for (int p = 0; p < paths; ++p) {
    double x = 0;
    for (int s = 0; s < steps; ++s) x += -lam * x * dt + amp * std::sqrt(dt) * g(rng);
    em += x * x;
  }
  em /= paths;
  const double exact = amp * amp * (1 - std::exp(-2 * lam * T)) / (2 * lam);
  const double se = exact * std::sqrt(2.0 / paths);
  CHECK(std::abs(em - exact) < 4 * se);
}

TEST_CASE("ou second moments across damping rates") {
  const auto amp = make_lattice(1, 0.1, 3, LatticeKind::amplitude);
  Eigen::ArrayXd alpha = Eigen::ArrayXd::Constant(amp.size(), 0.7);
  const auto rows = ou_moment_check(amp, alpha, {{0}, {1}, {3}}, {0.1, 1.0, 10.0}, 10000, 2024, 20);
  REQUIRE(rows.size() == 9);
  for (const auto& r : rows) {
    CAPTURE(r.K[0]);
    CAPTURE(r.T);
    CHECK(std::abs(r.z) < 3.0);
    const double rate = 1 + 4.0 * r.K[0] * r.K[0];
    CHECK(r.analytic == doctest::Approx(0.49 * (1 - std::exp(-2 * rate * r.T)) / rate));
  }
  alpha.setZero();
  for (const auto& r : ou_moment_check(amp, alpha, {{1}}, {1.0}, 100, 1)) {
    CHECK(r.empirical == 0.0);
    CHECK(r.analytic == 0.0);
  }
}

TEST_CASE("ou long-time moment at K = 0 approaches one") {
  const auto amp = make_lattice(1, 0.1, 1, LatticeKind::amplitude);
  const auto rows = ou_moment_check(amp, Eigen::ArrayXd::Ones(amp.size()), {{0}}, {20.0}, 1000, 3, 5);
  CHECK(rows[0].analytic == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rows[0].z) < 4);
}

TEST_CASE("amplitude OU sup norm does not grow as eps decreases") {
  std::vector<double> q99;
  for (double eps : {0.2, 0.1, 0.05}) {
    SolverConfig cfg;
    cfg.eps = eps;
    cfg.h = 0.05;
    cfg.T0 = 1.0;
    const auto fine = cfg.fine_lattice();
    const auto amp = cfg.amplitude_lattice();
    std::vector<double> sups;
    for (int s = 0; s < 100; ++s) {
      const auto m = make_noise_model(fine, lorentzian_alpha(fine), 1.5, mix_seed(500 + s));
      const auto incr = sample_increments(m, cfg.h, cfg.n_steps());
      const auto noise = gl_noise_from_sh(m, incr, cfg.H(), amp);
      Field Z(amp);
      const Eigen::ArrayXd k2 = amp.k_squared();
      double sup = 0;
      for (int step = 0; step < cfg.n_steps(); ++step)
        for (Eigen::Index K = 0; K < amp.size(); ++K) {
          const auto inc = noise.mode(K, step);
          Z[K] = ou_exact_step(Z[K], 1 + 4 * k2[K], noise.alpha()[K], inc.dW, inc.aux, cfg.H());
          if (K == amp.size() - 1) sup = std::max(sup, wiener_norm(Z, 1.0));
        }
      sups.push_back(sup);
    }
    q99.push_back(quantile(sups, 0.99));
  }
  CHECK(q99[1] <= 1.5 * q99[0]);
  CHECK(q99[2] <= 1.5 * q99[1]);
}
