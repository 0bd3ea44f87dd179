#pragma once

#include <complex>
#include <vector>

#include "shgl/fft.hpp"
#include "shgl/lattice.hpp"

namespace shgl {

/// Cubic nonlinearities evaluated on a physical grid.
///
/// With dealias on, the grid has P >= 4M+1 points per axis, so the result
/// equals the exact triple convolution truncated to the box. With dealias off
/// the grid is the smallest one that holds the box (P >= 2M+1) and products
/// alias back onto stored modes.
template <typename Scalar = double>
class CubicEvaluator {
 public:
  using Field = SpectralField<Scalar>;
  using Complex = std::complex<Scalar>;

  CubicEvaluator(LatticeSpec lattice, bool dealias)
      : lattice_(std::move(lattice)), dims_(grid_dims(lattice_, dealias)), fft_(dims_), dealias_(dealias) {
    const Scalar w = static_cast<Scalar>(lattice_.weight());
    scale_ = w * w / static_cast<Scalar>(fft_.size());
  }

  const LatticeSpec& lattice() const { return lattice_; }
  const std::vector<int>& grid() const { return dims_; }
  bool dealias() const { return dealias_; }

  /// Transform of u^3 for a real field u (imaginary parts of samples dropped).
  Field cube(const Field& u) {
    require_same_lattice(lattice_, u.lattice(), "cube");
    load(u);
    for (Eigen::Index i = 0; i < grid_.size(); ++i) {
      const Scalar v = grid_[i].real();
      grid_[i] = Complex(v * v * v, 0);
    }
    return store(true);
  }

  /// Transform of |a|^2 a for a complex field a.
  Field abs2_times(const Field& a) {
    require_same_lattice(lattice_, a.lattice(), "abs2_times");
    load(a);
    grid_ *= grid_.abs2().template cast<Complex>();
    return store(false);
  }

  /// Transform of f g h (no conjugation).
  Field product(const Field& f, const Field& g, const Field& h) {
    require_same_lattice(lattice_, f.lattice(), "product");
    load(f);
    typename FftNd<Scalar>::Grid acc = grid_;
    load(g);
    acc *= grid_;
    load(h);
    grid_ *= acc;
    return store(false);
  }

 private:
  static std::vector<int> grid_dims(const LatticeSpec& lat, bool dealias) {
    std::vector<int> dims(lat.dim());
    for (int a = 0; a < lat.dim(); ++a)
      dims[a] = smooth_fft_size((dealias ? 4 : 2) * lat.cutoff(a) + 1);
    return dims;
  }

  void load(const Field& f) {
    detail::scatter_to_grid(f, dims_, grid_);
    fft_.inverse(grid_);
  }

  Field store(bool hermitian) {
    fft_.forward(grid_);
    grid_ *= scale_;
    Field out(lattice_, hermitian);
    detail::gather_from_grid(grid_, dims_, out);
    return out;
  }

  LatticeSpec lattice_;
  std::vector<int> dims_;
  FftNd<Scalar> fft_;
  bool dealias_;
  Scalar scale_ = 1;
  typename FftNd<Scalar>::Grid grid_;
};

/// Pointwise (f(k) + conj f(-k)) / 2, which makes a field exactly Hermitian.
template <typename Scalar>
void symmetrize(SpectralField<Scalar>& f) {
  const auto reflected = f.coeffs().reverse().conjugate().eval();
  f.coeffs() = (f.coeffs() + reflected) * Scalar(0.5);
  f.set_hermitian(true);
}

}  // namespace shgl
