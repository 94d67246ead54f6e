#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "magel/errors.hpp"
#include "magel/field.hpp"
#include "magel/grid.hpp"

namespace magel {

/// Fourier coefficients of a real field in the grid's half-spectrum layout.
struct Spectrum {
  GridPtr grid;
  std::vector<Complex> coeffs;

  const TorusGrid& g() const { return *grid; }
};

inline Spectrum to_spectral(const ScalarField& f) {
  Spectrum s{f.grid_ptr(), std::vector<Complex>(f.grid().modes())};
  f.grid().forward(f.values(), s.coeffs);
  return s;
}

inline ScalarField to_physical(const Spectrum& s) {
  ScalarField f(s.grid);
  s.grid->backward(s.coeffs, f.values());
  return f;
}

/// Multiplies every coefficient by mult(k) for half-spectrum index k.
template <class Multiplier>
Spectrum& apply_multiplier(Spectrum& s, Multiplier&& mult) {
  for (std::size_t k = 0; k < s.coeffs.size(); ++k) s.coeffs[k] *= mult(k);
  return s;
}

template <class Multiplier>
ScalarField filter(const ScalarField& f, Multiplier&& mult) {
  auto s = to_spectral(f);
  apply_multiplier(s, mult);
  return to_physical(s);
}

/// Applies fn to every component of a VectorField / MatrixField.
template <class Container, class Fn>
Container map_components(Container c, Fn&& fn) {
  for (auto& f : c.components()) f = fn(f);
  return c;
}

// ---- derivatives ----------------------------------------------------------

/// Symbol of d^m: prod_a (i xi_a)^{m_a}, with odd powers vanishing on Nyquist planes.
inline Complex derivative_symbol(const TorusGrid& g, std::size_t k, std::span<const int> m) {
  double mag = 1.0;
  int order = 0;
  for (int a = 0; a < g.dim(); ++a) {
    const int ma = m[static_cast<std::size_t>(a)];
    if (ma == 0) continue;
    if (ma % 2 == 1 && g.nyquist(k, a)) return 0.0;
    mag *= std::pow(static_cast<double>(g.wavenumber(k, a)), ma);
    order += ma;
  }
  static constexpr Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return kIPow[order % 4] * mag;
}

inline ScalarField derivative(const ScalarField& f, std::span<const int> m) {
  const auto& g = f.grid();
  if (m.size() != static_cast<std::size_t>(g.dim())) {
    throw PreconditionError("derivative: multi-index length must equal grid dimension");
  }
  for (int ma : m) {
    if (ma < 0) throw PreconditionError("derivative: negative multi-index entry");
  }
  return filter(f, [&](std::size_t k) { return derivative_symbol(g, k, m); });
}

inline Spectrum partial(Spectrum s, int axis) {
  const auto& g = *s.grid;
  return apply_multiplier(
      s, [&](std::size_t k) { return Complex(0.0, g.derivative_wavenumber(k, axis)); });
}

inline ScalarField partial(const ScalarField& f, int axis) {
  return to_physical(partial(to_spectral(f), axis));
}

inline VectorField gradient(const ScalarField& f) {
  const auto s = to_spectral(f);
  VectorField out(f.grid_ptr(), f.grid().dim());
  for (int a = 0; a < f.grid().dim(); ++a) out[a] = to_physical(partial(s, a));
  return out;
}

/// Jacobian (grad v)_{ij} = d_j v^i.
inline MatrixField jacobian(const VectorField& v) {
  const int d = v.grid().dim();
  MatrixField out(v.grid_ptr(), v.size(), d);
  for (int i = 0; i < v.size(); ++i) {
    const auto s = to_spectral(v[i]);
    for (int j = 0; j < d; ++j) out(i, j) = to_physical(partial(s, j));
  }
  return out;
}

inline ScalarField divergence(const VectorField& v) {
  const auto& g = v.grid();
  Spectrum acc{v.grid_ptr(), std::vector<Complex>(g.modes())};
  for (int a = 0; a < g.dim(); ++a) {
    const auto s = partial(to_spectral(v[a]), a);
    for (std::size_t k = 0; k < g.modes(); ++k) acc.coeffs[k] += s.coeffs[k];
  }
  return to_physical(acc);
}

/// Row-contracted divergence (div A)_i = d_j A^{ji}.
inline VectorField divergence(const MatrixField& m) {
  const auto& g = m.grid();
  VectorField out(m.grid_ptr(), m.cols());
  for (int i = 0; i < m.cols(); ++i) {
    Spectrum acc{m.grid_ptr(), std::vector<Complex>(g.modes())};
    for (int j = 0; j < g.dim(); ++j) {
      const auto s = partial(to_spectral(m(j, i)), j);
      for (std::size_t k = 0; k < g.modes(); ++k) acc.coeffs[k] += s.coeffs[k];
    }
    out[i] = to_physical(acc);
  }
  return out;
}

inline ScalarField laplacian(const ScalarField& f) {
  const auto& g = f.grid();
  return filter(f, [&](std::size_t k) { return -g.wavenumber_sq(k); });
}

template <class Container>
  requires requires(Container& c) { c.components(); }
Container laplacian(const Container& c) {
  return map_components(c, [](const ScalarField& f) { return laplacian(f); });
}

/// Solves Laplacian(u) = f for zero-mean u. Rejects f whose mean exceeds 1e-12.
inline ScalarField inverse_laplacian_zero_mean(const ScalarField& f) {
  if (std::abs(mean(f)) > 1e-12) {
    throw PreconditionError("inverse_laplacian_zero_mean: input has nonzero mean");
  }
  const auto& g = f.grid();
  return filter(f, [&](std::size_t k) {
    const double k2 = g.wavenumber_sq(k);
    return k2 == 0.0 ? 0.0 : -1.0 / k2;
  });
}

/// Solves (1 - c Laplacian) u = f exactly, mode by mode.
inline ScalarField helmholtz_solve(const ScalarField& f, double c) {
  if (c == 0.0) return f;
  const auto& g = f.grid();
  return filter(f, [&](std::size_t k) { return 1.0 / (1.0 + c * g.wavenumber_sq(k)); });
}

/// Leray projection onto divergence-free fields: u_hat - xi (xi . u_hat) / |xi|^2.
inline VectorField leray_project(const VectorField& u) {
  const auto& g = u.grid();
  const int d = g.dim();
  if (u.size() != d) throw PreconditionError("leray_project: need dim components");
  std::vector<Spectrum> s;
  s.reserve(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) s.push_back(to_spectral(u[a]));

  std::vector<double> xi(static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < g.modes(); ++k) {
    double xi2 = 0.0;
    Complex xu = 0.0;
    for (int a = 0; a < d; ++a) {
      xi[static_cast<std::size_t>(a)] = g.derivative_wavenumber(k, a);
      xi2 += xi[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(a)];
      xu += xi[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(a)].coeffs[k];
    }
    if (xi2 == 0.0) continue;
    for (int a = 0; a < d; ++a) {
      s[static_cast<std::size_t>(a)].coeffs[k] -= xi[static_cast<std::size_t>(a)] * xu / xi2;
    }
  }
  VectorField out(u.grid_ptr(), d);
  for (int a = 0; a < d; ++a) out[a] = to_physical(s[static_cast<std::size_t>(a)]);
  return out;
}

// ---- filters --------------------------------------------------------------

/// Sharp Fourier truncation to the ball |xi| <= cutoff. Idempotent.
inline ScalarField truncate(const ScalarField& f, double cutoff) {
  if (!(cutoff > 0.0)) throw PreconditionError("truncate: cutoff must be positive");
  const auto& g = f.grid();
  const double c2 = cutoff * cutoff;
  return filter(f, [&](std::size_t k) { return g.wavenumber_sq(k) > c2 ? 0.0 : 1.0; });
}

template <class Container>
  requires requires(Container& c) { c.components(); }
Container truncate(const Container& c, double cutoff) {
  return map_components(c, [cutoff](const ScalarField& f) { return truncate(f, cutoff); });
}

/// True when the entry survives the 2/3 rule: every |xi_a| <= n/3.
inline bool dealias_keeps(const TorusGrid& g, std::size_t k) {
  for (int a = 0; a < g.dim(); ++a) {
    if (3 * std::abs(g.wavenumber(k, a)) > g.n()) return false;
  }
  return true;
}

inline ScalarField dealias(const ScalarField& f) {
  const auto& g = f.grid();
  return filter(f, [&](std::size_t k) { return dealias_keeps(g, k) ? 1.0 : 0.0; });
}

template <class Container>
  requires requires(Container& c) { c.components(); }
Container dealias(const Container& c) {
  return map_components(c, [](const ScalarField& f) { return dealias(f); });
}

/// Removes the spatial mean (zero mode).
inline ScalarField remove_mean(ScalarField f) {
  f += -mean(f);
  return f;
}

}  // namespace magel
