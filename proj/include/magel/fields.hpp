#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "magel/errors.hpp"
#include "magel/field.hpp"
#include "magel/spectral.hpp"

namespace magel {

/// Pointwise |det F| below this aborts an inversion.
inline constexpr double kMinDeterminant = 0.1;

/**
 * External magnetic field H_ext(x, t), three components.
 *
 *   zero:         H = 0
 *   uniform:      H = h
 *   single_mode:  H = h cos(k.x - omega t), k an integer wavevector
 */
struct ExternalField {
  enum class Kind { zero, uniform, single_mode };

  Kind kind = Kind::zero;
  std::array<double, 3> amplitude{0.0, 0.0, 0.0};
  std::array<int, 3> wavevector{0, 0, 0};
  double omega = 0.0;

  bool is_zero() const noexcept {
    return kind == Kind::zero ||
           std::all_of(amplitude.begin(), amplitude.end(), [](double a) { return a == 0.0; });
  }

  VectorField evaluate(const GridPtr& grid, double t) const {
    VectorField h(grid, 3);
    if (is_zero()) return h;
    if (kind == Kind::uniform) {
      for (int c = 0; c < 3; ++c) h[c] = ScalarField::constant(grid, amplitude[static_cast<std::size_t>(c)]);
      return h;
    }
    const auto phase = ScalarField::sample(grid, [&](std::span<const double> x) {
      double kx = 0.0;
      for (std::size_t a = 0; a < x.size(); ++a) kx += wavevector[a] * x[a];
      return std::cos(kx - omega * t);
    });
    for (int c = 0; c < 3; ++c) h[c] = amplitude[static_cast<std::size_t>(c)] * phase;
    return h;
  }
};

/// Physical coefficients. A = 1/2, mu0 = gamma = lambda = 1 are fixed.
struct PhysParams {
  double nu = 1.0;
  double kappa = 0.0;
  ExternalField h_ext;

  void validate() const {
    if (!(nu > 0.0)) throw PreconditionError("PhysParams: nu must be positive");
    if (!(kappa >= 0.0)) throw PreconditionError("PhysParams: kappa must be non-negative");
  }
};

/// Primitive unknowns (v, F, M). Arithmetic keeps the left operand's time stamp.
struct StateA {
  double t = 0.0;
  VectorField v;
  MatrixField F;
  VectorField M;

  const GridPtr& grid_ptr() const { return v.grid_ptr(); }

  StateA& operator+=(const StateA& o) {
    v += o.v;
    F += o.F;
    M += o.M;
    return *this;
  }
  StateA& operator*=(double s) {
    v *= s;
    F *= s;
    M *= s;
    return *this;
  }
  friend StateA operator+(StateA a, const StateA& b) { return a += b; }
  friend StateA operator*(double s, StateA a) { return a *= s; }
};

/// Reformulated unknowns (v, psi, M) with G = grad psi.
struct StateB {
  double t = 0.0;
  VectorField v;
  VectorField psi;
  VectorField M;

  const GridPtr& grid_ptr() const { return v.grid_ptr(); }

  StateB& operator+=(const StateB& o) {
    v += o.v;
    psi += o.psi;
    M += o.M;
    return *this;
  }
  StateB& operator*=(double s) {
    v *= s;
    psi *= s;
    M *= s;
    return *this;
  }
  friend StateB operator+(StateB a, const StateB& b) { return a += b; }
  friend StateB operator*(double s, StateB a) { return a *= s; }
};

inline bool all_finite(const StateA& s) {
  return all_finite(s.v) && all_finite(s.F) && all_finite(s.M);
}
inline bool all_finite(const StateB& s) {
  return all_finite(s.v) && all_finite(s.psi) && all_finite(s.M);
}

// ---- pointwise matrix algebra --------------------------------------------

namespace detail {

inline double det2(const double* m) { return m[0] * m[3] - m[1] * m[2]; }

inline double det3(const double* m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

inline double det(const double* m, int d) { return d == 2 ? det2(m) : det3(m); }

/// Closed-form inverse; returns the determinant.
inline double invert(const double* m, double* out, int d) {
  const double det_m = det(m, d);
  const double r = 1.0 / det_m;
  if (d == 2) {
    out[0] = m[3] * r;
    out[1] = -m[1] * r;
    out[2] = -m[2] * r;
    out[3] = m[0] * r;
  } else {
    out[0] = (m[4] * m[8] - m[5] * m[7]) * r;
    out[1] = (m[2] * m[7] - m[1] * m[8]) * r;
    out[2] = (m[1] * m[5] - m[2] * m[4]) * r;
    out[3] = (m[5] * m[6] - m[3] * m[8]) * r;
    out[4] = (m[0] * m[8] - m[2] * m[6]) * r;
    out[5] = (m[2] * m[3] - m[0] * m[5]) * r;
    out[6] = (m[3] * m[7] - m[4] * m[6]) * r;
    out[7] = (m[1] * m[6] - m[0] * m[7]) * r;
    out[8] = (m[0] * m[4] - m[1] * m[3]) * r;
  }
  return det_m;
}

/// Pointwise out = (A + shift*I)^{-1} + post*I, guarded by |det| >= kMinDeterminant.
inline MatrixField shifted_inverse(const MatrixField& a, double shift, double post,
                                   const char* who) {
  const int d = a.rows();
  if (d != a.cols() || (d != 2 && d != 3)) throw PreconditionError(std::string(who) + ": need square 2x2 or 3x3");
  MatrixField out(a.grid_ptr(), d, d);
  double m[9];
  double inv[9];
  for (std::size_t p = 0; p < a(0, 0).size(); ++p) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) m[i * d + j] = a(i, j)[p] + (i == j ? shift : 0.0);
    }
    const double det_m = invert(m, inv, d);
    if (!(std::abs(det_m) >= kMinDeterminant)) {
      throw SingularDeformation(std::string(who) + ": |det| below 0.1 at grid point " +
                                std::to_string(p));
    }
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) out(i, j)[p] = inv[i * d + j] + (i == j ? post : 0.0);
    }
  }
  return out;
}

}  // namespace detail

/// G = F^{-1} - I.
inline MatrixField f_to_g(const MatrixField& F) {
  return detail::shifted_inverse(F, 0.0, -1.0, "f_to_g");
}

/// F = (I + G)^{-1}.
inline MatrixField g_to_f(const MatrixField& G) {
  return detail::shifted_inverse(G, 1.0, 0.0, "g_to_f");
}

inline ScalarField det_field(const MatrixField& F) {
  const int d = F.rows();
  ScalarField out(F.grid_ptr());
  double m[9];
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (int e = 0; e < d * d; ++e) m[e] = F.components()[static_cast<std::size_t>(e)][p];
    out[p] = detail::det(m, d);
  }
  return out;
}

inline ScalarField trace(const MatrixField& A) {
  ScalarField out(A.grid_ptr());
  for (int i = 0; i < A.rows(); ++i) out += A(i, i);
  return out;
}

inline MatrixField transpose(const MatrixField& A) {
  MatrixField out(A.grid_ptr(), A.cols(), A.rows());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
  }
  return out;
}

/// Pointwise matrix product.
inline MatrixField matmul(const MatrixField& A, const MatrixField& B) {
  MatrixField out(A.grid_ptr(), A.rows(), B.cols());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < B.cols(); ++j) {
      auto& o = out(i, j);
      for (int k = 0; k < A.cols(); ++k) {
        const auto& a = A(i, k);
        const auto& b = B(k, j);
        for (std::size_t p = 0; p < o.size(); ++p) o[p] += a[p] * b[p];
      }
    }
  }
  return out;
}

// ---- potentials and geometric residuals -----------------------------------

/// G with rows (G^{j1}, ..., G^{jd}) = grad psi^j.
inline MatrixField grad_potential(const VectorField& psi) { return jacobian(psi); }

/// Zero-mean psi whose row gradients best fit G (exact when G is curl free and mean free).
inline VectorField potential_from_g(const MatrixField& G) {
  const auto& g = G.grid();
  const int d = g.dim();
  VectorField psi(G.grid_ptr(), d);
  for (int j = 0; j < d; ++j) {
    Spectrum acc{G.grid_ptr(), std::vector<Complex>(g.modes())};
    for (int k = 0; k < d; ++k) {
      const auto s = to_spectral(G(j, k));
      for (std::size_t m = 0; m < g.modes(); ++m) {
        acc.coeffs[m] += Complex(0.0, -g.derivative_wavenumber(m, k)) * s.coeffs[m];
      }
    }
    for (std::size_t m = 0; m < g.modes(); ++m) {
      double xi2 = 0.0;
      for (int k = 0; k < d; ++k) xi2 += std::pow(g.derivative_wavenumber(m, k), 2);
      acc.coeffs[m] = xi2 == 0.0 ? Complex(0.0) : acc.coeffs[m] / xi2;
    }
    psi[j] = to_physical(acc);
  }
  return psi;
}

/// max over the grid and all (i, j, k) of |d_i G^{jk} - d_k G^{ji}|.
inline double curl_residual(const MatrixField& G) {
  const int d = G.rows();
  // dG[j][k][i] = d_i G^{jk}
  std::vector<ScalarField> dG;
  dG.reserve(static_cast<std::size_t>(d * d * d));
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) {
      const auto s = to_spectral(G(j, k));
      for (int i = 0; i < d; ++i) dG.push_back(to_physical(partial(s, i)));
    }
  }
  auto at = [&](int j, int k, int i) -> const ScalarField& {
    return dG[static_cast<std::size_t>((j * d + k) * d + i)];
  };
  double res = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        if (i == k) continue;
        res = std::max(res, max_abs(at(j, k, i) - at(j, i, k)));
      }
    }
  }
  return res;
}

/// Pointwise |M|.
inline ScalarField magnitude(const VectorField& M) {
  return dot(M, M).transform([](double x) { return std::sqrt(x); });
}

/// max_x | |M(x)| - 1 |.
inline double sphere_residual(const VectorField& M) {
  const auto mag = magnitude(M);
  double r = 0.0;
  for (double v : mag.values()) r = std::max(r, std::abs(v - 1.0));
  return r;
}

/// Pointwise projection onto the unit sphere; fails if |M| < 0.5 anywhere.
inline VectorField renormalize_m(const VectorField& M) {
  auto mag = magnitude(M);
  for (double v : mag.values()) {
    if (!(v >= 0.5)) throw ConstraintBlowUp("renormalize_m: |M| fell below 0.5");
  }
  mag.transform([](double x) { return 1.0 / x; });
  return scale(mag, M);
}

// ---- state conversions ----------------------------------------------------

/// (v, F, M) -> (v, psi, M) with psi the zero-mean potential of F^{-1} - I.
inline StateB to_state_b(const StateA& a) {
  return StateB{a.t, a.v, potential_from_g(f_to_g(a.F)), a.M};
}

/// (v, psi, M) -> (v, (I + grad psi)^{-1}, M).
inline StateA to_state_a(const StateB& b) {
  return StateA{b.t, b.v, g_to_f(grad_potential(b.psi)), b.M};
}

}  // namespace magel
