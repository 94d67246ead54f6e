#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "magel/dynamics.hpp"
#include "magel/energetics.hpp"
#include "magel/errors.hpp"
#include "magel/field.hpp"
#include "magel/fields.hpp"
#include "magel/spectral.hpp"

namespace magel {

/// Solution of  -Laplacian w + grad q = f,  div w = g  on the torus (zero-mean w and q).
struct StokesSolution {
  VectorField w;
  ScalarField q;
};

/**
 * Exact Fourier solve of the generalized Stokes system. Per mode xi != 0
 *
 *   q = (|k|^2 g - i xi.f) / |xi|^2,   w = (f - i xi q) / |k|^2,
 *
 * with xi the first-derivative wavenumbers and |k|^2 the Laplacian symbol.
 * Away from Nyquist planes |xi| = |k| and this reduces to
 *   q = g - i xi.f/|xi|^2,  w = (f - xi(xi.f)/|xi|^2 - i xi g)/|xi|^2.
 * On a pure Nyquist mode (xi = 0, k != 0) the divergence is blind, so q = 0,
 * w = f/|k|^2, and any g content there is unattainable. The zero mode of f is
 * discarded.
 */
inline StokesSolution solve_generalized_stokes(const VectorField& f, const ScalarField& g) {
  const auto& grid = g.grid();
  const int d = grid.dim();
  if (f.size() != d) throw PreconditionError("solve_generalized_stokes: f needs dim components");
  if (std::abs(mean(g)) > 1e-12) {
    throw PreconditionError("solve_generalized_stokes: g must have zero mean");
  }

  std::vector<Spectrum> fs;
  for (int a = 0; a < d; ++a) fs.push_back(to_spectral(f[a]));
  Spectrum gs = to_spectral(g);
  Spectrum qs{g.grid_ptr(), std::vector<Complex>(grid.modes())};
  std::vector<Spectrum> ws(static_cast<std::size_t>(d), qs);

  const Complex I(0.0, 1.0);
  for (std::size_t k = 0; k < grid.modes(); ++k) {
    const double k2 = grid.wavenumber_sq(k);
    if (k2 == 0.0) continue;
    double xi2 = 0.0;
    Complex xf = 0.0;
    for (int a = 0; a < d; ++a) {
      const double xa = grid.derivative_wavenumber(k, a);
      xi2 += xa * xa;
      xf += xa * fs[static_cast<std::size_t>(a)].coeffs[k];
    }
    const Complex q = xi2 == 0.0 ? Complex(0.0) : (k2 * gs.coeffs[k] - I * xf) / xi2;
    qs.coeffs[k] = q;
    for (int a = 0; a < d; ++a) {
      const double xa = grid.derivative_wavenumber(k, a);
      ws[static_cast<std::size_t>(a)].coeffs[k] =
          (fs[static_cast<std::size_t>(a)].coeffs[k] - I * xa * q) / k2;
    }
  }

  VectorField w(g.grid_ptr(), d);
  for (int a = 0; a < d; ++a) w[a] = to_physical(ws[static_cast<std::size_t>(a)]);
  return {std::move(w), to_physical(qs)};
}

/// Residuals max|-Laplacian w + grad q - f| and max|div w - g|.
struct StokesResidual {
  double momentum = 0.0;
  double divergence = 0.0;
};

inline StokesResidual stokes_residual(const StokesSolution& sol, const VectorField& f,
                                      const ScalarField& g) {
  StokesResidual out;
  // The solver discards the mean of f.
  VectorField mean_free = f;
  for (auto& c : mean_free.components()) c = remove_mean(c);
  out.momentum = max_abs(gradient(sol.q) - laplacian(sol.w) - mean_free);
  out.divergence = max_abs(divergence(sol.w) - g);
  return out;
}

/// (|w|_{H^{m+2}} + |q|_{H^{m+1}}) / (|f|_{H^m} + |g|_{H^{m+1}}); NaN for f = g = 0.
inline double stokes_estimate_ratio(const StokesSolution& sol, const VectorField& f,
                                    const ScalarField& g, int m) {
  const double lhs =
      std::sqrt(sobolev_norm_sq(sol.w, m + 2)) + std::sqrt(sobolev_norm_sq(sol.q, m + 1));
  const double rhs = std::sqrt(sobolev_norm_sq(f, m)) + std::sqrt(sobolev_norm_sq(g, m + 1));
  if (rhs == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return lhs / rhs;
}

/// Dissipation diagnostic for w = nu v - psi.
struct WDiagnostic {
  StokesSolution solution;
  double grad_w = 0.0;   ///< |grad w|_{H^s}
  double grad_q = 0.0;   ///< |grad q|_{H^{s-1}}
  /// 4 |grad dt v|_{H^{s-2}} + (|v| + |grad psi| + |grad M|)(|grad v| + |grad psi| + |Laplacian M|), all H^s.
  double bracket = 0.0;
  /// grad_w / bracket; NaN (the 0/0 sentinel) when both vanish.
  double ratio = 0.0;
};

/// Forcing of the Stokes system obeyed by w, with dt v = momentum_rhs_b.
inline VectorField w_forcing(const StateB& s, const VectorField& dv, const Numerics& num) {
  VectorField f = dv * -1.0;
  f -= detail::product_filter(detail::advect(s.v, jacobian(s.v)), num);
  f += divergence(detail::product_filter(g_of_g(grad_potential(s.psi)), num));
  f -= divergence(detail::product_filter(detail::ericksen_tensor(jacobian(s.M)), num));
  return f;
}

inline WDiagnostic w_diagnostic(const StateB& s, const PhysParams& params, int order,
                                const Numerics& num = {}) {
  if (order < 2) throw PreconditionError("w_diagnostic: need s >= 2");
  if (!params.h_ext.is_zero()) throw PreconditionError("w_diagnostic: requires H_ext = 0");
  const auto dv = momentum_rhs_b(s.v, s.psi, s.M, params.nu, num);
  auto f = w_forcing(s, dv, num);
  for (auto& c : f.components()) c = remove_mean(c);
  const auto g = remove_mean(divergence(s.psi) * -1.0);

  WDiagnostic out{solve_generalized_stokes(f, g)};
  out.grad_w = std::sqrt(grad_sobolev_norm_sq(out.solution.w, order));
  out.grad_q = std::sqrt(grad_sobolev_norm_sq(out.solution.q, order - 1));

  const double v_hs = std::sqrt(sobolev_norm_sq(s.v, order));
  const double gpsi = std::sqrt(grad_sobolev_norm_sq(s.psi, order));
  const double gm = std::sqrt(grad_sobolev_norm_sq(s.M, order));
  const double gv = std::sqrt(grad_sobolev_norm_sq(s.v, order));
  const double lm = std::sqrt(laplacian_sobolev_norm_sq(s.M, order));
  out.bracket = 4.0 * std::sqrt(grad_sobolev_norm_sq(dv, order - 2)) +
                (v_hs + gpsi + gm) * (gv + gpsi + lm);
  out.ratio = out.bracket == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                 : out.grad_w / out.bracket;
  return out;
}

}  // namespace magel
