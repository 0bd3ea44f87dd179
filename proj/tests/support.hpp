#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "shgl/lattice.hpp"

namespace shgl::testing {

using Field = SpectralField<double>;
using cplx = std::complex<double>;

inline Field random_field(const LatticeSpec& lat, std::mt19937_64& rng, double density = 1.0) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  Field f(lat);
  for (Eigen::Index i = 0; i < lat.size(); ++i)
    if (u(rng) < density) f[i] = cplx(g(rng), g(rng));
  return f;
}

inline Field random_hermitian(const LatticeSpec& lat, std::mt19937_64& rng) {
  Field f = random_field(lat, rng);
  const Field r = conjugate_reflect(f);
  f.coeffs() = 0.5 * (f.coeffs() + r.coeffs());
  f.set_hermitian(true);
  return f;
}

/// Independent O(N^2) convolution over integer tuples, truncated to the box.
inline Field brute_convolution(const Field& f, const Field& g) {
  const auto& lat = f.lattice();
  const int d = lat.dim();
  std::map<std::vector<int>, cplx> acc;
  for (Eigen::Index a = 0; a < lat.size(); ++a)
    for (Eigen::Index b = 0; b < lat.size(); ++b) {
      auto ja = lat.multi_index(a), jb = lat.multi_index(b);
      std::vector<int> k(d);
      for (int x = 0; x < d; ++x) k[x] = ja[x] + jb[x];
      acc[k] += f[a] * g[b];
    }
  Field out(lat);
  for (const auto& [k, v] : acc) {
    bool inside = true;
    for (int x = 0; x < d; ++x) inside = inside && std::abs(k[x]) <= lat.cutoff(x);
    if (inside) out.at(k) = v * lat.weight();
  }
  return out;
}

/// u(x) = sum_k w f(k) e^{i k.x} evaluated term by term.
inline cplx evaluate_at(const Field& f, const std::vector<double>& x) {
  const auto& lat = f.lattice();
  cplx acc = 0;
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    const auto j = lat.multi_index(i);
    double phase = 0;
    for (int a = 0; a < lat.dim(); ++a) phase += lat.spacing() * j[a] * x[a];
    acc += f[i] * std::polar(1.0, phase);
  }
  return lat.weight() * acc;
}

inline double max_abs_diff(const Field& a, const Field& b) { return (a.coeffs() - b.coeffs()).abs().maxCoeff(); }

}  // namespace shgl::testing
