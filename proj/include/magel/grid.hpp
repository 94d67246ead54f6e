#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "magel/errors.hpp"

namespace magel {

using Complex = std::complex<double>;

class TorusGrid;
using GridPtr = std::shared_ptr<const TorusGrid>;

/**
 * Uniform periodic grid on the torus [0, 2pi)^d with its real-to-complex
 * transform plans.
 *
 * Points are stored row-major with axis 0 slowest. The spectrum is the
 * FFTW half-complex layout: every axis has n entries except the last,
 * which has n/2 + 1.
 *
 * Normalization: forward() returns Fourier coefficients,
 *   f(x) = sum_xi fhat(xi) exp(i xi.x),
 * so backward(forward(f)) == f and Parseval reads
 *   sum_x f(x)^2 * cell_volume() == volume() * sum_xi |fhat(xi)|^2
 * with the sum over the full (two-sided) lattice; see mode_weight().
 */
class TorusGrid {
 public:
  static constexpr double kTwoPi = 2.0 * std::numbers::pi;

  static GridPtr create(int dim, int n) {
    return GridPtr(new TorusGrid(dim, n));
  }

  TorusGrid(const TorusGrid&) = delete;
  TorusGrid& operator=(const TorusGrid&) = delete;

  ~TorusGrid() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(forward_plan_);
    fftw_destroy_plan(backward_plan_);
  }

  int dim() const noexcept { return dim_; }
  int n() const noexcept { return n_; }
  std::size_t points() const noexcept { return points_; }
  std::size_t modes() const noexcept { return modes_; }

  double spacing() const noexcept { return kTwoPi / n_; }
  double cell_volume() const noexcept { return std::pow(spacing(), dim_); }
  double volume() const noexcept { return std::pow(kTwoPi, dim_); }

  /// Coordinate of grid point `p` along `axis`.
  double coordinate(std::size_t p, int axis) const noexcept {
    return spacing() * static_cast<double>(point_index(p, axis));
  }

  /// Integer index of point `p` along `axis`.
  int point_index(std::size_t p, int axis) const noexcept {
    for (int a = dim_ - 1; a > axis; --a) p /= static_cast<std::size_t>(n_);
    return static_cast<int>(p % static_cast<std::size_t>(n_));
  }

  /// Signed integer wavenumber of spectral entry `k` along `axis`, in [-n/2, n/2].
  int wavenumber(std::size_t k, int axis) const noexcept {
    return wavenumbers_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(axis)];
  }

  /// True when the entry sits on the Nyquist plane of `axis`.
  bool nyquist(std::size_t k, int axis) const noexcept {
    return std::abs(wavenumber(k, axis)) * 2 == n_;
  }

  /// Wavenumber used by first-order derivative multipliers (zero on the Nyquist plane).
  double derivative_wavenumber(std::size_t k, int axis) const noexcept {
    return nyquist(k, axis) ? 0.0 : static_cast<double>(wavenumber(k, axis));
  }

  /// |xi|^2 with the true lattice wavenumbers.
  double wavenumber_sq(std::size_t k) const noexcept { return k2_[k]; }

  /// Number of lattice modes represented by half-spectrum entry `k` (1 or 2).
  double mode_weight(std::size_t k) const noexcept { return weight_[k]; }

  void forward(std::span<const double> in, std::span<Complex> out) const {
    check_sizes(in.size(), out.size());
    // FFTW's r2c leaves its input intact; the const_cast only satisfies the C signature.
    fftw_execute_dft_r2c(forward_plan_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / static_cast<double>(points_);
    for (auto& c : out) c *= scale;
  }

  void backward(std::span<const Complex> in, std::span<double> out) const {
    check_sizes(out.size(), in.size());
    // c2r overwrites its input for d > 1.
    std::vector<Complex> scratch(in.begin(), in.end());
    fftw_execute_dft_c2r(backward_plan_, reinterpret_cast<fftw_complex*>(scratch.data()),
                         out.data());
  }

 private:
  TorusGrid(int dim, int n) : dim_(dim), n_(n) {
    if (dim != 2 && dim != 3) throw PreconditionError("TorusGrid: dim must be 2 or 3");
    if (n < 8 || n % 2 != 0) throw PreconditionError("TorusGrid: n must be even and >= 8");

    const auto nn = static_cast<std::size_t>(n);
    const std::size_t half = nn / 2 + 1;
    points_ = 1;
    for (int a = 0; a < dim; ++a) points_ *= nn;
    modes_ = points_ / nn * half;

    wavenumbers_.resize(modes_ * static_cast<std::size_t>(dim));
    k2_.resize(modes_);
    weight_.resize(modes_);
    for (std::size_t k = 0; k < modes_; ++k) {
      std::size_t rest = k;
      double sq = 0.0;
      for (int a = dim - 1; a >= 0; --a) {
        const std::size_t len = (a == dim - 1) ? half : nn;
        const int j = static_cast<int>(rest % len);
        rest /= len;
        const int w = (a == dim - 1) ? j : (j < n / 2 ? j : j - n);
        wavenumbers_[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)] = w;
        sq += static_cast<double>(w) * w;
        if (a == dim - 1) weight_[k] = (j == 0 || 2 * j == n) ? 1.0 : 2.0;
      }
      k2_[k] = sq;
    }

    std::array<int, 3> dims{n, n, n};
    std::lock_guard lock(plan_mutex());
    auto* real_buf = fftw_alloc_real(points_);
    auto* cplx_buf = fftw_alloc_complex(modes_);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_plan_ = fftw_plan_dft_r2c(dim, dims.data(), real_buf, cplx_buf, flags);
    backward_plan_ = fftw_plan_dft_c2r(dim, dims.data(), cplx_buf, real_buf, flags);
    fftw_free(real_buf);
    fftw_free(cplx_buf);
    if (forward_plan_ == nullptr || backward_plan_ == nullptr) {
      throw Error("TorusGrid: FFTW planning failed");
    }
  }

  void check_sizes(std::size_t real, std::size_t spectral) const {
    if (real != points_ || spectral != modes_) {
      throw PreconditionError("TorusGrid: buffer size does not match grid");
    }
  }

  // FFTW planning is not thread safe.
  static std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
  }

  int dim_;
  int n_;
  std::size_t points_ = 0;
  std::size_t modes_ = 0;
  std::vector<int> wavenumbers_;
  std::vector<double> k2_;
  std::vector<double> weight_;
  fftw_plan forward_plan_ = nullptr;
  fftw_plan backward_plan_ = nullptr;
};

}  // namespace magel
