#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "magel/dynamics.hpp"
#include "magel/errors.hpp"
#include "magel/field.hpp"
#include "magel/fields.hpp"
#include "magel/spectral.hpp"

namespace magel {

/// Largest Sobolev order accepted by the norm routines.
inline constexpr int kMaxSobolevOrder = 4;

/// All multi-indices m in N^d with |m| <= s, in lexicographic order.
inline std::vector<std::vector<int>> multi_indices(int d, int s) {
  std::vector<std::vector<int>> out;
  std::vector<int> m(static_cast<std::size_t>(d), 0);
  // Odometer over the box [0, s]^d, keeping |m| <= s.
  while (true) {
    int sum = 0;
    for (int x : m) sum += x;
    if (sum <= s) out.push_back(m);
    int a = d - 1;
    while (a >= 0 && m[static_cast<std::size_t>(a)] == s) m[static_cast<std::size_t>(a--)] = 0;
    if (a < 0) break;
    ++m[static_cast<std::size_t>(a)];
  }
  return out;
}

/// K_s = binomial(s + d, d), the number of multi-indices with |m| <= s.
inline long multiindex_count(int d, int s) {
  if (d < 2 || d > 3 || s < 0) throw PreconditionError("multiindex_count: need d in {2,3}, s >= 0");
  long r = 1;
  for (int i = 1; i <= d; ++i) r = r * (s + i) / i;
  return r;
}

/// min(1/4, nu^2 / (16 c0^2 K_s^2)).
inline double delta_default(double nu, double c0_hat, long k_s) {
  if (!(nu > 0.0) || !(c0_hat > 0.0) || k_s <= 0) {
    throw PreconditionError("delta_default: arguments must be positive");
  }
  const double k = static_cast<double>(k_s);
  return std::min(0.25, nu * nu / (16.0 * c0_hat * c0_hat * k * k));
}

namespace detail {

/// sum_{|m| <= s} prod_a xi_a^{2 m_a}; odd m_a vanish on Nyquist planes, matching derivative().
inline double sobolev_weight(const TorusGrid& g, std::size_t k,
                             const std::vector<std::vector<int>>& indices) {
  double w = 0.0;
  for (const auto& m : indices) {
    double term = 1.0;
    for (int a = 0; a < g.dim() && term != 0.0; ++a) {
      const int ma = m[static_cast<std::size_t>(a)];
      if (ma == 0) continue;
      if (ma % 2 == 1 && g.nyquist(k, a)) {
        term = 0.0;
      } else {
        term *= std::pow(static_cast<double>(g.wavenumber(k, a)), 2 * ma);
      }
    }
    w += term;
  }
  return w;
}

inline void check_order(int s) {
  if (s < 0 || s > kMaxSobolevOrder) throw PreconditionError("Sobolev order out of range");
}

/// volume * sum_k mode_weight * |fhat|^2 * extra(k) * W_s(k).
template <class Extra>
double weighted_mode_sum(const ScalarField& f, int s, Extra&& extra) {
  check_order(s);
  const auto& g = f.grid();
  const auto indices = multi_indices(g.dim(), s);
  const auto spec = to_spectral(f);
  double sum = 0.0;
  for (std::size_t k = 0; k < g.modes(); ++k) {
    const double e = extra(k);
    if (e == 0.0) continue;
    sum += g.mode_weight(k) * std::norm(spec.coeffs[k]) * e * sobolev_weight(g, k, indices);
  }
  return sum * g.volume();
}

}  // namespace detail

/// sum_{|m| <= s} || d^m f ||^2_{L2}, one pass over modes.
inline double sobolev_norm_sq(const ScalarField& f, int s) {
  return detail::weighted_mode_sum(f, s, [](std::size_t) { return 1.0; });
}

template <class Container>
  requires requires(const Container& c) { c.components(); }
double sobolev_norm_sq(const Container& c, int s) {
  double sum = 0.0;
  for (const auto& f : c.components()) sum += sobolev_norm_sq(f, s);
  return sum;
}

/// || grad f ||^2_{H^s} summed over components.
inline double grad_sobolev_norm_sq(const ScalarField& f, int s) {
  const auto& g = f.grid();
  return detail::weighted_mode_sum(f, s, [&](std::size_t k) {
    double x = 0.0;
    for (int a = 0; a < g.dim(); ++a) x += std::pow(g.derivative_wavenumber(k, a), 2);
    return x;
  });
}

template <class Container>
  requires requires(const Container& c) { c.components(); }
double grad_sobolev_norm_sq(const Container& c, int s) {
  double sum = 0.0;
  for (const auto& f : c.components()) sum += grad_sobolev_norm_sq(f, s);
  return sum;
}

/// || Laplacian f ||^2_{H^s} summed over components.
template <class Container>
  requires requires(const Container& c) { c.components(); }
double laplacian_sobolev_norm_sq(const Container& c, int s) {
  double sum = 0.0;
  for (const auto& f : c.components()) {
    const auto& g = f.grid();
    sum += detail::weighted_mode_sum(f, s, [&](std::size_t k) {
      return g.wavenumber_sq(k) * g.wavenumber_sq(k);
    });
  }
  return sum;
}

// ---- functionals ----------------------------------------------------------

struct LocalFunctionals {
  double e_s = 0.0;  ///< |v|^2_{H^s} + |F|^2_{H^s} + |grad M|^2_{H^s}
  double d_s = 0.0;  ///< nu |grad v|^2_{H^s} + |Laplacian M|^2_{H^s}
};

inline LocalFunctionals local_functionals(const StateA& s, double nu, int order) {
  return {sobolev_norm_sq(s.v, order) + sobolev_norm_sq(s.F, order) +
              grad_sobolev_norm_sq(s.M, order),
          nu * grad_sobolev_norm_sq(s.v, order) + laplacian_sobolev_norm_sq(s.M, order)};
}

/// The weighted global pair and the component norms it is assembled from.
struct GlobalFunctionals {
  double energy = 0.0;
  double dissipation = 0.0;

  double v_hs = 0.0;        // |v|^2_{H^s}
  double grad_m_hs = 0.0;   // |grad M|^2_{H^s}
  double grad_psi_hs = 0.0; // |grad psi|^2_{H^s}
  double vt = 0.0;          // |dt v|^2_{H^{s-2}}
  double grad_psit = 0.0;   // |grad dt psi|^2_{H^{s-2}}
  double grad_v_hs = 0.0;   // |grad v|^2_{H^s}
  double lap_m_hs = 0.0;    // |Laplacian M|^2_{H^s}
  double grad_vt = 0.0;     // |grad dt v|^2_{H^{s-2}}
};

/// Assembles the global energy / dissipation from component norms.
inline void assemble_global(GlobalFunctionals& g, double nu, double delta) {
  const double d2 = delta * delta;
  g.energy = d2 * g.v_hs + g.grad_m_hs + delta * g.grad_psi_hs + g.vt + g.grad_psit;
  g.dissipation = 0.5 * d2 * nu * g.grad_v_hs + d2 * nu * g.grad_psit + 2.0 * g.lap_m_hs +
                  delta / (2.0 * nu) * g.grad_psi_hs + nu * g.grad_vt;
}

/// Global functionals of a reformulated state; `rhs` supplies dt v and dt psi.
inline GlobalFunctionals global_functionals(const StateB& s, const RhsB& rhs, double nu,
                                            int order, double delta) {
  if (order < 2) throw PreconditionError("global_functionals: need s >= 2");
  GlobalFunctionals g;
  g.v_hs = sobolev_norm_sq(s.v, order);
  g.grad_m_hs = grad_sobolev_norm_sq(s.M, order);
  g.grad_psi_hs = grad_sobolev_norm_sq(s.psi, order);
  g.vt = sobolev_norm_sq(rhs.dv, order - 2);
  g.grad_psit = grad_sobolev_norm_sq(rhs.dpsi, order - 2);
  g.grad_v_hs = grad_sobolev_norm_sq(s.v, order);
  g.lap_m_hs = laplacian_sobolev_norm_sq(s.M, order);
  g.grad_vt = grad_sobolev_norm_sq(rhs.dv, order - 2);
  assemble_global(g, nu, delta);
  return g;
}

// ---- constraint residuals -------------------------------------------------

struct ConstraintBundle {
  double sphere_res = 0.0;
  double det_res = 0.0;
  double curl_res = 0.0;
  double div_v_res = 0.0;
  double trg_vs_divpsi_res = 0.0;
  /// |tr G|_{H^s} / |grad psi|^2_{H^s}; 0 when grad psi vanishes.
  double trg_ratio = 0.0;
};

namespace detail {

inline void potential_residuals(ConstraintBundle& b, const VectorField& psi, int order) {
  const auto G = grad_potential(psi);
  const auto trg = trace(G);
  b.curl_res = curl_residual(G);
  b.trg_vs_divpsi_res = max_abs(divergence(psi) - trg);
  const double denom = grad_sobolev_norm_sq(psi, order);
  b.trg_ratio = denom > 0.0 ? std::sqrt(sobolev_norm_sq(trg, order)) / denom : 0.0;
}

}  // namespace detail

inline ConstraintBundle constraint_bundle(const StateA& s, int order = 2) {
  ConstraintBundle b;
  b.sphere_res = sphere_residual(s.M);
  b.det_res = max_abs(det_field(s.F) += -1.0);
  b.div_v_res = max_abs(divergence(s.v));
  const auto G = f_to_g(s.F);
  detail::potential_residuals(b, potential_from_g(G), order);
  // The fitted potential is curl free by construction; measure G itself.
  b.curl_res = curl_residual(G);
  return b;
}

inline ConstraintBundle constraint_bundle(const StateB& s, int order = 2) {
  ConstraintBundle b;
  b.sphere_res = sphere_residual(s.M);
  auto shifted = grad_potential(s.psi);
  for (int i = 0; i < shifted.rows(); ++i) shifted(i, i) += 1.0;
  b.det_res = max_abs(det_field(shifted).transform([](double x) { return 1.0 / x - 1.0; }));
  b.div_v_res = max_abs(divergence(s.v));
  detail::potential_residuals(b, s.psi, order);
  return b;
}

// ---- diagnostic records ---------------------------------------------------

/// One time-stamped row of energies, dissipation rates and constraint residuals.
struct DiagnosticRecord {
  double t = 0.0;
  double e_basic = 0.0;
  double e_s = 0.0;
  double d_s = 0.0;
  double e_global = 0.0;
  double d_global = 0.0;
  double dt_v_norm = 0.0;
  double dt_psi_norm = 0.0;
  double sphere_res = 0.0;
  double det_res = 0.0;
  double curl_res = 0.0;
  double div_v_res = 0.0;
  double trg_vs_divpsi_res = 0.0;
  double trg_ratio = 0.0;

  static constexpr std::array<const char*, 14> kColumns = {
      "t",          "e_basic",    "e_s",      "d_s",       "e_global",
      "d_global",   "dt_v_norm",  "dt_psi_norm", "sphere_res", "det_res",
      "curl_res",   "div_v_res",  "trg_vs_divpsi_res", "trg_ratio"};

  std::array<double, 14> values() const {
    return {t,          e_basic,  e_s,      d_s,       e_global,          d_global,  dt_v_norm,
            dt_psi_norm, sphere_res, det_res, curl_res, div_v_res, trg_vs_divpsi_res, trg_ratio};
  }

  static std::string csv_header() {
    std::string h;
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
      if (i) h += ',';
      h += kColumns[i];
    }
    return h;
  }

  /// Decimal, 17 significant digits.
  std::string csv_row() const {
    std::string row;
    char buf[40];
    const auto vals = values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
      if (i) row += ',';
      row += buf;
    }
    return row;
  }
};

struct DiagnosticSettings {
  int sobolev_order = 2;
  double delta = 0.25;
  Numerics numerics;
};

inline double basic_energy(const StateA& s) {
  return 0.5 * (l2_norm_sq(s.v) + l2_norm_sq(s.F) + grad_sobolev_norm_sq(s.M, 0));
}

namespace detail {

inline DiagnosticRecord fill_record(double t, const StateA& a, const StateB& b, const RhsB& rb,
                                    const ConstraintBundle& c, double nu,
                                    const DiagnosticSettings& set) {
  DiagnosticRecord r;
  r.t = t;
  r.e_basic = basic_energy(a);
  const auto loc = local_functionals(a, nu, set.sobolev_order);
  r.e_s = loc.e_s;
  r.d_s = loc.d_s;
  const auto glob = global_functionals(b, rb, nu, std::max(2, set.sobolev_order), set.delta);
  r.e_global = glob.energy;
  r.d_global = glob.dissipation;
  r.dt_v_norm = glob.vt;
  r.dt_psi_norm = glob.grad_psit;
  r.sphere_res = c.sphere_res;
  r.det_res = c.det_res;
  r.curl_res = c.curl_res;
  r.div_v_res = c.div_v_res;
  r.trg_vs_divpsi_res = c.trg_vs_divpsi_res;
  r.trg_ratio = c.trg_ratio;
  return r;
}

}  // namespace detail

/// Diagnostics of a primitive state. Global functionals use psi fitted to F^{-1} - I,
/// dt v from the primitive momentum equation and dt psi = -v - v.grad psi.
inline DiagnosticRecord diagnose(const StateA& s, const PhysParams& params,
                                 const DiagnosticSettings& set) {
  const auto b = to_state_b(s);
  const auto ra = rhs_a(s, params, set.numerics);
  const RhsB rb{ra.dv, psi_rhs(s.v, b.psi, set.numerics), ra.dM};
  return detail::fill_record(s.t, s, b, rb, constraint_bundle(s, set.sobolev_order), params.nu,
                             set);
}

inline DiagnosticRecord diagnose(const StateB& s, const PhysParams& params,
                                 const DiagnosticSettings& set) {
  const auto a = to_state_a(s);
  const auto rb = rhs_b(s, params, set.numerics);
  return detail::fill_record(s.t, a, s, rb, constraint_bundle(s, set.sobolev_order), params.nu,
                             set);
}

}  // namespace magel
