#pragma once

// Fourier lattices, spectral fields, weighted l1 (Wiener algebra) norms,
// discrete convolution and the critical/stable mode filters.
//
// Transform convention (identical on both lattice kinds, spacing s = eps for
// the fine lattice and s = 1 for the amplitude lattice, weight w = s^d):
//
//   u(x)  = sum_k w f(k) exp(i k.x),                 x in [0, 2 pi / s)^d
//   f(k)  = (2 pi)^{-d} int_cell u(x) exp(-i k.x) dx
//
// On a uniform grid of P points per axis this is u_m = w * IDFT_unscaled(f)
// and f = DFT_unscaled(u) / (w P^d), so the round trip is the identity.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shgl/fft.hpp"

namespace shgl {

class LatticeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LatticeKind : std::uint8_t { fine = 0, amplitude = 1 };

inline const char* to_string(LatticeKind kind) {
  return kind == LatticeKind::fine ? "fine" : "amplitude";
}

/// Truncated lattice {s j : j in Z^d, |j_i| <= cutoff_i} with point mass s^d.
/// eps is always stored as 1/n.
class LatticeSpec {
 public:
  LatticeSpec() = default;
  LatticeSpec(int n, std::vector<int> cutoff, LatticeKind kind)
      : n_(n), cutoff_(std::move(cutoff)), kind_(kind) {
    size_ = 1;
    for (int m : cutoff_) size_ *= 2 * m + 1;
  }

  int dim() const { return static_cast<int>(cutoff_.size()); }
  int n() const { return n_; }
  double eps() const { return 1.0 / n_; }
  LatticeKind kind() const { return kind_; }
  const std::vector<int>& cutoff() const { return cutoff_; }
  int cutoff(int axis) const { return cutoff_[axis]; }
  int extent(int axis) const { return 2 * cutoff_[axis] + 1; }
  Eigen::Index size() const { return size_; }

  double spacing() const { return kind_ == LatticeKind::fine ? eps() : 1.0; }
  double weight() const { return std::pow(spacing(), dim()); }

  /// Row-major flat index, axis 0 slowest. Returns -1 outside the box.
  Eigen::Index index(std::span<const int> j) const {
    Eigen::Index flat = 0;
    for (int a = 0; a < dim(); ++a) {
      if (j[a] < -cutoff_[a] || j[a] > cutoff_[a]) return -1;
      flat = flat * extent(a) + (j[a] + cutoff_[a]);
    }
    return flat;
  }

  void multi_index(Eigen::Index flat, std::span<int> j) const {
    for (int a = dim() - 1; a >= 0; --a) {
      const int e = extent(a);
      j[a] = static_cast<int>(flat % e) - cutoff_[a];
      flat /= e;
    }
  }

  std::vector<int> multi_index(Eigen::Index flat) const {
    std::vector<int> j(dim());
    multi_index(flat, j);
    return j;
  }

  /// Index of -j; the box is symmetric so this is a reversal.
  Eigen::Index mirror(Eigen::Index flat) const { return size_ - 1 - flat; }
  Eigen::Index origin() const { return (size_ - 1) / 2; }

  double wavenumber(Eigen::Index flat, int axis) const {
    return spacing() * multi_index(flat)[axis];
  }

  /// |k|^2 for every lattice point.
  Eigen::ArrayXd k_squared() const {
    Eigen::ArrayXd out(size_);
    std::vector<int> j(dim());
    const double s2 = spacing() * spacing();
    for (Eigen::Index i = 0; i < size_; ++i) {
      multi_index(i, j);
      double acc = 0;
      for (int v : j) acc += double(v) * v;
      out[i] = s2 * acc;
    }
    return out;
  }

  /// Wavenumber component along one axis for every lattice point.
  Eigen::ArrayXd k_component(int axis) const {
    Eigen::ArrayXd out(size_);
    std::vector<int> j(dim());
    for (Eigen::Index i = 0; i < size_; ++i) {
      multi_index(i, j);
      out[i] = spacing() * j[axis];
    }
    return out;
  }

  friend bool operator==(const LatticeSpec& a, const LatticeSpec& b) {
    return a.n_ == b.n_ && a.kind_ == b.kind_ && a.cutoff_ == b.cutoff_;
  }

 private:
  int n_ = 2;
  std::vector<int> cutoff_;
  LatticeKind kind_ = LatticeKind::fine;
  Eigen::Index size_ = 0;
};

/// Returns n with eps == 1/n, or throws.
inline int commensurate_denominator(double eps) {
  if (!(eps > 0.0) || !(eps < 1.0))
    throw LatticeError("eps must lie in (0,1), got " + std::to_string(eps));
  const double inv = 1.0 / eps;
  const double n = std::round(inv);
  if (n < 2 || std::abs(inv - n) > 1e-9 * n)
    throw LatticeError("eps must be 1/n for an integer n >= 2 (commensurability), got " +
                       std::to_string(eps));
  return static_cast<int>(n);
}

inline LatticeSpec make_lattice(int d, double eps, std::vector<int> cutoff, LatticeKind kind) {
  if (d < 1) throw LatticeError("lattice dimension must be >= 1");
  if (static_cast<int>(cutoff.size()) != d)
    throw LatticeError("cutoff vector length must equal the dimension");
  const int n = commensurate_denominator(eps);
  for (int m : cutoff)
    if (m < 1) throw LatticeError("cutoff must be >= 1");
  if (kind == LatticeKind::fine && cutoff[0] < n)
    throw LatticeError("fine lattice cutoff too small to contain the carrier wavenumber e1");
  return LatticeSpec(n, std::move(cutoff), kind);
}

inline LatticeSpec make_lattice(int d, double eps, int cutoff, LatticeKind kind) {
  return make_lattice(d, eps, std::vector<int>(std::max(d, 0), cutoff), kind);
}

inline void require_same_lattice(const LatticeSpec& a, const LatticeSpec& b, const char* what) {
  if (!(a == b)) throw LatticeError(std::string(what) + ": lattice mismatch");
}

/// Complex Fourier coefficients on a truncated lattice box.
template <typename Scalar = double>
class SpectralField {
 public:
  using Complex = std::complex<Scalar>;
  using Coeffs = Eigen::Array<Complex, Eigen::Dynamic, 1>;

  SpectralField() = default;
  explicit SpectralField(LatticeSpec lattice, bool hermitian = false)
      : lattice_(std::move(lattice)), coeffs_(Coeffs::Zero(lattice_.size())), hermitian_(hermitian) {}
  SpectralField(LatticeSpec lattice, Coeffs coeffs, bool hermitian = false)
      : lattice_(std::move(lattice)), coeffs_(std::move(coeffs)), hermitian_(hermitian) {
    if (coeffs_.size() != lattice_.size()) throw LatticeError("coefficient count does not match lattice");
  }

  const LatticeSpec& lattice() const { return lattice_; }
  const Coeffs& coeffs() const { return coeffs_; }
  Coeffs& coeffs() { return coeffs_; }
  Eigen::Index size() const { return coeffs_.size(); }

  bool hermitian() const { return hermitian_; }
  void set_hermitian(bool h) { hermitian_ = h; }

  Complex& operator[](Eigen::Index i) { return coeffs_[i]; }
  const Complex& operator[](Eigen::Index i) const { return coeffs_[i]; }

  Complex& at(std::span<const int> j) {
    const auto i = lattice_.index(j);
    if (i < 0) throw LatticeError("lattice point outside the truncated box");
    return coeffs_[i];
  }
  Complex at(std::span<const int> j) const {
    const auto i = lattice_.index(j);
    return i < 0 ? Complex(0) : coeffs_[i];
  }
  Complex& at(std::initializer_list<int> j) { return at(std::span<const int>(j.begin(), j.size())); }
  Complex at(std::initializer_list<int> j) const {
    return at(std::span<const int>(j.begin(), j.size()));
  }

  /// max_k |f(-k) - conj f(k)|.
  Scalar hermitian_defect() const {
    Scalar worst = 0;
    const auto n = coeffs_.size();
    for (Eigen::Index i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(coeffs_[n - 1 - i] - std::conj(coeffs_[i])));
    return worst;
  }

  bool all_finite() const { return coeffs_.isFinite().all(); }

  SpectralField& operator+=(const SpectralField& o) {
    require_same_lattice(lattice_, o.lattice_, "operator+=");
    coeffs_ += o.coeffs_;
    hermitian_ = hermitian_ && o.hermitian_;
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    require_same_lattice(lattice_, o.lattice_, "operator-=");
    coeffs_ -= o.coeffs_;
    hermitian_ = hermitian_ && o.hermitian_;
    return *this;
  }
  SpectralField& operator*=(Scalar s) {
    coeffs_ *= s;
    return *this;
  }

 private:
  LatticeSpec lattice_;
  Coeffs coeffs_;
  bool hermitian_ = false;
};

template <typename Scalar>
SpectralField<Scalar> operator+(SpectralField<Scalar> a, const SpectralField<Scalar>& b) {
  return a += b;
}
template <typename Scalar>
SpectralField<Scalar> operator-(SpectralField<Scalar> a, const SpectralField<Scalar>& b) {
  return a -= b;
}
template <typename Scalar>
SpectralField<Scalar> operator*(Scalar s, SpectralField<Scalar> a) {
  return a *= s;
}

/// Field of the pointwise complex conjugate: (conj u)^(k) = conj(f(-k)).
template <typename Scalar>
SpectralField<Scalar> conjugate_reflect(const SpectralField<Scalar>& f) {
  SpectralField<Scalar> out(f.lattice(), f.hermitian());
  out.coeffs() = f.coeffs().reverse().conjugate();
  return out;
}

/// sum_k w |f(k)| (1+|k|^2)^{r/2}.
template <typename Scalar>
Scalar wiener_norm(const SpectralField<Scalar>& f, double r = 0.0) {
  if (r < 0) throw LatticeError("wiener_norm requires r >= 0");
  const Scalar w = static_cast<Scalar>(f.lattice().weight());
  if (r == 0.0) return w * f.coeffs().abs().sum();
  const Eigen::ArrayXd rho = (1.0 + f.lattice().k_squared()).pow(r / 2.0);
  return w * (f.coeffs().abs() * rho.cast<Scalar>()).sum();
}

namespace detail {

/// Places the box coefficients of f on a P-periodic grid (index j -> j mod P).
template <typename Scalar>
void scatter_to_grid(const SpectralField<Scalar>& f, const std::vector<int>& grid_dims,
                     typename FftNd<Scalar>::Grid& grid) {
  const auto& lat = f.lattice();
  Eigen::Index total = 1;
  for (int p : grid_dims) total *= p;
  grid.setZero(total);
  std::vector<int> j(lat.dim());
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    lat.multi_index(i, j);
    Eigen::Index g = 0;
    for (int a = 0; a < lat.dim(); ++a) {
      const int p = grid_dims[a];
      g = g * p + ((j[a] % p) + p) % p;
    }
    grid[g] += f[i];
  }
}

template <typename Scalar>
void gather_from_grid(const typename FftNd<Scalar>::Grid& grid, const std::vector<int>& grid_dims,
                      SpectralField<Scalar>& f) {
  const auto& lat = f.lattice();
  std::vector<int> j(lat.dim());
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    lat.multi_index(i, j);
    Eigen::Index g = 0;
    for (int a = 0; a < lat.dim(); ++a) {
      const int p = grid_dims[a];
      g = g * p + ((j[a] % p) + p) % p;
    }
    f[i] = grid[g];
  }
}

inline std::vector<int> padded_dims(const LatticeSpec& lat, int factor) {
  std::vector<int> dims(lat.dim());
  for (int a = 0; a < lat.dim(); ++a) dims[a] = smooth_fft_size(factor * lat.cutoff(a) + 1);
  return dims;
}

}  // namespace detail

enum class ConvolutionMethod { automatic, direct, fft };

/// Largest per-axis extent for which `automatic` uses the direct sum.
inline constexpr int kDirectConvolutionMaxExtent = 65;

/// (f*g)(k) = w sum_l f(k-l) g(l), truncated to the box of f.
template <typename Scalar>
SpectralField<Scalar> convolve(const SpectralField<Scalar>& f, const SpectralField<Scalar>& g,
                               ConvolutionMethod method = ConvolutionMethod::automatic) {
  require_same_lattice(f.lattice(), g.lattice(), "convolve");
  const auto& lat = f.lattice();
  if (method == ConvolutionMethod::automatic) {
    bool small = true;
    for (int a = 0; a < lat.dim(); ++a) small = small && lat.extent(a) <= kDirectConvolutionMaxExtent;
    method = small ? ConvolutionMethod::direct : ConvolutionMethod::fft;
  }
  SpectralField<Scalar> out(lat, f.hermitian() && g.hermitian());
  const Scalar w = static_cast<Scalar>(lat.weight());

  if (method == ConvolutionMethod::direct) {
    const int d = lat.dim();
    std::vector<int> ja(d), jb(d), jk(d);
    for (Eigen::Index b = 0; b < lat.size(); ++b) {
      if (g[b] == typename SpectralField<Scalar>::Complex(0)) continue;
      lat.multi_index(b, jb);
      for (Eigen::Index a = 0; a < lat.size(); ++a) {
        lat.multi_index(a, ja);
        for (int x = 0; x < d; ++x) jk[x] = ja[x] + jb[x];
        const auto k = lat.index(jk);
        if (k >= 0) out[k] += f[a] * g[b];
      }
    }
    out.coeffs() *= w;
    return out;
  }

  // 2/3 rule: P >= 3M+1 per axis makes the cyclic product alias-free on the box.
  const auto dims = detail::padded_dims(lat, 3);
  FftNd<Scalar> fft(dims);
  typename FftNd<Scalar>::Grid gf, gg;
  detail::scatter_to_grid(f, dims, gf);
  detail::scatter_to_grid(g, dims, gg);
  fft.inverse(gf);
  fft.inverse(gg);
  gf *= gg;
  fft.forward(gf);
  gf /= static_cast<Scalar>(fft.size());
  detail::gather_from_grid(gf, dims, out);
  out.coeffs() *= w;
  return out;
}

enum class ProjectionKind { P1, Pm1, Pc, Ps };

/// 0/1 Fourier multiplier selecting modes near +e1 (P1), -e1 (Pm1), either (Pc)
/// or neither (Ps). Distances are Euclidean; the test |k -+ e1| <= 1/10 is done
/// in integer arithmetic as 100 |j -+ n e1|^2 <= n^2.
struct ProjectionMask {
  LatticeSpec lattice;
  ProjectionKind kind = ProjectionKind::Pc;
  Eigen::ArrayXd values;
};

inline bool near_carrier(std::span<const int> j, int n, int sign) {
  long long acc = 0;
  for (std::size_t a = 0; a < j.size(); ++a) {
    const long long v = j[a] - (a == 0 ? sign * n : 0);
    acc += v * v;
  }
  return 100 * acc <= static_cast<long long>(n) * n;
}

inline ProjectionMask projection_mask(const LatticeSpec& lat, ProjectionKind kind) {
  if (lat.kind() != LatticeKind::fine) throw LatticeError("projection masks are defined on the fine lattice");
  ProjectionMask mask{lat, kind, Eigen::ArrayXd::Zero(lat.size())};
  std::vector<int> j(lat.dim());
  for (Eigen::Index i = 0; i < lat.size(); ++i) {
    lat.multi_index(i, j);
    const bool plus = near_carrier(j, lat.n(), +1);
    const bool minus = near_carrier(j, lat.n(), -1);
    bool on = false;
    switch (kind) {
      case ProjectionKind::P1: on = plus; break;
      case ProjectionKind::Pm1: on = minus; break;
      case ProjectionKind::Pc: on = plus || minus; break;
      case ProjectionKind::Ps: on = !(plus || minus); break;
    }
    mask.values[i] = on ? 1.0 : 0.0;
  }
  return mask;
}

template <typename Scalar>
SpectralField<Scalar> apply(const ProjectionMask& mask, const SpectralField<Scalar>& f) {
  require_same_lattice(mask.lattice, f.lattice(), "apply projection");
  SpectralField<Scalar> out(f.lattice(), f.coeffs() * mask.values.cast<Scalar>(), f.hermitian());
  return out;
}

/// Uniform physical-space samples over the periodicity cell [0, 2 pi / s)^d.
template <typename Scalar>
struct PhysicalSamples {
  using Complex = std::complex<Scalar>;
  std::vector<int> dims;
  double cell_length = 0;
  Eigen::Array<Complex, Eigen::Dynamic, 1> values;
  bool real = false;
};

template <typename Scalar>
PhysicalSamples<Scalar> to_physical(const SpectralField<Scalar>& f, std::vector<int> grid_pts) {
  const auto& lat = f.lattice();
  if (static_cast<int>(grid_pts.size()) != lat.dim()) throw LatticeError("grid dimension mismatch");
  for (int a = 0; a < lat.dim(); ++a)
    if (grid_pts[a] < lat.extent(a)) throw LatticeError("physical grid too coarse for the stored modes");
  PhysicalSamples<Scalar> out;
  out.dims = grid_pts;
  out.cell_length = 2.0 * std::numbers::pi / lat.spacing();
  FftNd<Scalar> fft(grid_pts);
  detail::scatter_to_grid(f, grid_pts, out.values);
  fft.inverse(out.values);
  out.values *= static_cast<Scalar>(lat.weight());
  if (f.hermitian()) {
    const Scalar tol = Scalar(1e-10) * std::max<Scalar>(Scalar(1), wiener_norm(f));
    if ((out.values.imag().abs() > tol).any())
      throw LatticeError("field flagged hermitian has non-real physical samples");
    out.values = out.values.real().template cast<typename PhysicalSamples<Scalar>::Complex>();
    out.real = true;
  }
  return out;
}

template <typename Scalar>
PhysicalSamples<Scalar> to_physical(const SpectralField<Scalar>& f, int grid_pts) {
  return to_physical(f, std::vector<int>(f.lattice().dim(), grid_pts));
}

/// Inverse of to_physical on the lattice box.
template <typename Scalar>
SpectralField<Scalar> to_fourier(const PhysicalSamples<Scalar>& u, const LatticeSpec& lat) {
  FftNd<Scalar> fft(u.dims);
  auto grid = u.values;
  fft.forward(grid);
  grid /= static_cast<Scalar>(lat.weight() * static_cast<double>(fft.size()));
  SpectralField<Scalar> out(lat, u.real);
  detail::gather_from_grid(grid, u.dims, out);
  return out;
}

/// max over grid samples of |u|; a lower bound of the continuous sup-norm.
template <typename Scalar>
Scalar sup_norm_physical(const SpectralField<Scalar>& f, std::vector<int> grid_pts) {
  return to_physical(f, std::move(grid_pts)).values.abs().maxCoeff();
}

template <typename Scalar>
Scalar sup_norm_physical(const SpectralField<Scalar>& f, int grid_pts) {
  return sup_norm_physical(f, std::vector<int>(f.lattice().dim(), grid_pts));
}

/// Grid with roughly `oversample` points per stored mode along each axis.
inline std::vector<int> oversampled_grid(const LatticeSpec& lat, int oversample = 2) {
  std::vector<int> dims(lat.dim());
  for (int a = 0; a < lat.dim(); ++a) dims[a] = smooth_fft_size(oversample * lat.extent(a));
  return dims;
}

}  // namespace shgl
