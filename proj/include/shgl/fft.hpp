#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

namespace shgl {

/// Smallest integer >= n whose prime factors are all in {2, 3, 5}.
inline int smooth_fft_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// Unscaled multi-dimensional complex FFT over a row-major grid (axis 0 slowest),
/// built from one-dimensional Eigen::FFT passes.
template <typename Scalar>
class FftNd {
 public:
  using Complex = std::complex<Scalar>;
  using Grid = Eigen::Array<Complex, Eigen::Dynamic, 1>;

  explicit FftNd(std::vector<int> dims) : dims_(std::move(dims)) {
    fft_.SetFlag(Eigen::FFT<Scalar>::Unscaled);
    total_ = 1;
    for (int n : dims_) total_ *= n;
  }

  const std::vector<int>& dims() const { return dims_; }
  Eigen::Index size() const { return total_; }

  /// out[m] = sum_j in[j] exp(-2 pi i j m / P) per axis.
  void forward(Grid& grid) { transform(grid, true); }
  /// out[j] = sum_m in[m] exp(+2 pi i j m / P) per axis (no 1/P factor).
  void inverse(Grid& grid) { transform(grid, false); }

 private:
  void transform(Grid& grid, bool fwd) {
    const int d = static_cast<int>(dims_.size());
    Eigen::Index stride = total_;
    for (int axis = 0; axis < d; ++axis) {
      const Eigen::Index n = dims_[axis];
      stride /= n;
      const Eigen::Index outer = total_ / (n * stride);
      in_.resize(n);
      out_.resize(n);
      for (Eigen::Index o = 0; o < outer; ++o) {
        for (Eigen::Index s = 0; s < stride; ++s) {
          const Eigen::Index base = o * n * stride + s;
          for (Eigen::Index i = 0; i < n; ++i) in_[i] = grid[base + i * stride];
          if (fwd)
            fft_.fwd(out_, in_);
          else
            fft_.inv(out_, in_);
          for (Eigen::Index i = 0; i < n; ++i) grid[base + i * stride] = out_[i];
        }
      }
    }
  }

  std::vector<int> dims_;
  Eigen::Index total_ = 1;
  Eigen::FFT<Scalar> fft_;
  std::vector<Complex> in_, out_;
};

}  // namespace shgl
