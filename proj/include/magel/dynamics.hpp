#pragma once

#include "magel/field.hpp"
#include "magel/fields.hpp"
#include "magel/spectral.hpp"

namespace magel {

/// Discretization switches shared by every right-hand side.
struct Numerics {
  /// 2/3-rule filter after each nonlinear pointwise product.
  bool dealias = true;
};

/// Evaluated tendencies of the primitive system.
struct RhsA {
  VectorField dv;
  MatrixField dF;
  VectorField dM;
};

/// Evaluated tendencies of the reformulated system.
struct RhsB {
  VectorField dv;
  VectorField dpsi;
  VectorField dM;
};

namespace detail {

template <class T>
T product_filter(T f, const Numerics& num) {
  if (num.dealias) return dealias(f);
  return f;
}

/// (v . grad) u_k = sum_i v_i J(k, i) for a precomputed Jacobian J = jacobian(u).
inline VectorField advect(const VectorField& v, const MatrixField& J) {
  VectorField out(v.grid_ptr(), J.rows());
  for (int k = 0; k < J.rows(); ++k) {
    auto& o = out[k];
    for (int i = 0; i < v.size(); ++i) {
      const auto& vi = v[i];
      const auto& jki = J(k, i);
      for (std::size_t p = 0; p < o.size(); ++p) o[p] += vi[p] * jki[p];
    }
  }
  return out;
}

/// sum_{k,i} (d_i M_k)^2 from J = jacobian(M).
inline ScalarField grad_sq(const MatrixField& J) {
  ScalarField out(J.grid_ptr());
  for (const auto& c : J.components()) out += c * c;
  return out;
}

/// (grad M (.) grad M)_{ij} = d_i M_k d_j M_k.
inline MatrixField ericksen_tensor(const MatrixField& J) {
  const int d = J.cols();
  MatrixField S(J.grid_ptr(), d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      ScalarField s(J.grid_ptr());
      for (int k = 0; k < J.rows(); ++k) s += J(k, i) * J(k, j);
      S(i, j) = s;
      if (j != i) S(j, i) = s;
    }
  }
  return S;
}

/// LLG tendency without the implicit Laplacian, given J = grad M, lapM = Laplacian M.
inline VectorField llg_explicit(const VectorField& v, const VectorField& M, const MatrixField& J,
                                const VectorField& lapM, const VectorField& H, bool has_h,
                                const Numerics& num) {
  auto gamma = grad_sq(J);
  if (has_h) gamma -= dot(M, H);
  gamma = product_filter(std::move(gamma), num);

  auto field = lapM;
  if (has_h) field += H;

  VectorField out = product_filter(scale(gamma, M), num);
  out -= product_filter(cross(M, field), num);
  out -= product_filter(advect(v, J), num);
  if (has_h) out += H;
  return out;
}

/// ((grad H)^T M)_i = d_i H_k M_k.
inline VectorField field_gradient_force(const VectorField& H, const VectorField& M,
                                        const Numerics& num) {
  const auto JH = jacobian(H);
  VectorField out(H.grid_ptr(), H.grid().dim());
  for (int i = 0; i < out.size(); ++i) {
    for (int k = 0; k < 3; ++k) out[i] += JH(k, i) * M[k];
  }
  return product_filter(std::move(out), num);
}

}  // namespace detail

/// Gamma(M) = |grad M|^2 - M . H_ext.
inline ScalarField lagrange_multiplier(const VectorField& M, const VectorField& H,
                                       const Numerics& num = {}) {
  auto gamma = detail::grad_sq(jacobian(M)) - dot(M, H);
  return detail::product_filter(std::move(gamma), num);
}

/// -v.grad M + Laplacian M + H + Gamma(M) M - M x (Laplacian M + H).
inline VectorField llg_rhs(const VectorField& v, const VectorField& M, const VectorField& H,
                           const Numerics& num = {}) {
  const auto J = jacobian(M);
  const auto lapM = laplacian(M);
  return detail::llg_explicit(v, M, J, lapM, H, true, num) + lapM;
}

/// Components d_j (d_i M_k d_j M_k).
inline VectorField ericksen_stress_div(const VectorField& M, const Numerics& num = {}) {
  return divergence(detail::product_filter(detail::ericksen_tensor(jacobian(M)), num));
}

/// Components d_j (F^{ik} F^{jk}).
inline VectorField elastic_stress_div(const MatrixField& F, const Numerics& num = {}) {
  return divergence(detail::product_filter(matmul(F, transpose(F)), num));
}

/// Projected momentum tendency of the primitive system, pressure absorbed by projection.
inline VectorField momentum_rhs_a(const VectorField& v, const MatrixField& F,
                                  const VectorField& M, const VectorField& H, double nu,
                                  const Numerics& num = {}) {
  auto raw = laplacian(v) * nu;
  raw -= detail::product_filter(detail::advect(v, jacobian(v)), num);
  raw -= ericksen_stress_div(M, num);
  raw += elastic_stress_div(F, num);
  raw += detail::field_gradient_force(H, M, num);
  return leray_project(raw);
}

/// -v.grad F + (grad v) F + kappa Laplacian F, with (grad v)_{ij} = d_j v^i.
inline MatrixField deformation_rhs(const VectorField& v, const MatrixField& F, double kappa,
                                   const Numerics& num = {}) {
  const int d = F.rows();
  const auto JF = [&] {
    // Flatten F into a vector to reuse the advective kernel.
    VectorField flat(std::vector<ScalarField>(F.components()));
    return jacobian(flat);
  }();
  const auto adv = detail::advect(v, JF);
  MatrixField out = detail::product_filter(matmul(jacobian(v), F), num);
  for (int e = 0; e < d * d; ++e) {
    out.components()[static_cast<std::size_t>(e)] -= detail::product_filter(adv[e], num);
  }
  if (kappa != 0.0) out += kappa * laplacian(F);
  return out;
}

/// g(G) = (I + G)^{-1} (I + G)^{-T} - I + G + G^T, evaluated by exact pointwise inversion.
inline MatrixField g_of_g(const MatrixField& G) {
  const auto F = g_to_f(G);
  auto out = matmul(F, transpose(F));
  out += G;
  out += transpose(G);
  for (int i = 0; i < G.rows(); ++i) out(i, i) += -1.0;
  return out;
}

/// Projected momentum tendency of the reformulated system (H_ext = 0).
inline VectorField momentum_rhs_b(const VectorField& v, const VectorField& psi,
                                  const VectorField& M, double nu, const Numerics& num = {}) {
  auto raw = laplacian(v) * nu;
  raw -= laplacian(psi);
  raw -= detail::product_filter(detail::advect(v, jacobian(v)), num);
  raw += divergence(detail::product_filter(g_of_g(grad_potential(psi)), num));
  raw -= ericksen_stress_div(M, num);
  return leray_project(raw);
}

/// -v - v.grad psi.
inline VectorField psi_rhs(const VectorField& v, const VectorField& psi,
                           const Numerics& num = {}) {
  return -v - detail::product_filter(detail::advect(v, jacobian(psi)), num);
}

// ---- IMEX splits ----------------------------------------------------------
//
// Each system is written as  d/dt u = L u + N(u)  with L the diagonal
// diffusion (nu Laplacian v, kappa Laplacian F, Laplacian M) and N the
// remaining terms. Velocity tendencies are always Leray projected.

namespace detail {

inline VectorField explicit_momentum_a(const StateA& s, const MatrixField& JM,
                                       const VectorField& H, bool has_h, const Numerics& num) {
  auto raw = product_filter(advect(s.v, jacobian(s.v)), num) * -1.0;
  raw -= divergence(product_filter(ericksen_tensor(JM), num));
  raw += elastic_stress_div(s.F, num);
  if (has_h) raw += field_gradient_force(H, s.M, num);
  return leray_project(raw);
}

}  // namespace detail

/// Explicit (non-diffusive) part of the primitive momentum tendency, projected.
inline VectorField explicit_momentum_a(const StateA& s, const VectorField& H, bool has_h,
                                       const Numerics& num) {
  return detail::explicit_momentum_a(s, jacobian(s.M), H, has_h, num);
}

/// LLG tendency without the implicit Laplacian for a given velocity.
inline VectorField explicit_llg(const VectorField& v, const VectorField& M,
                                const VectorField& H, bool has_h, const Numerics& num) {
  return detail::llg_explicit(v, M, jacobian(M), laplacian(M), H, has_h, num);
}

/// N(u) for the primitive system.
inline RhsA explicit_rhs_a(const StateA& s, const VectorField& H, bool has_h,
                           const Numerics& num) {
  const auto JM = jacobian(s.M);
  return RhsA{detail::explicit_momentum_a(s, JM, H, has_h, num),
              deformation_rhs(s.v, s.F, 0.0, num),
              detail::llg_explicit(s.v, s.M, JM, laplacian(s.M), H, has_h, num)};
}

/// N(u) for the reformulated system.
inline RhsB explicit_rhs_b(const StateB& s, const Numerics& num) {
  const auto JM = jacobian(s.M);
  const auto lapM = laplacian(s.M);
  const VectorField H(s.grid_ptr(), 3);

  auto raw = laplacian(s.psi) * -1.0;
  raw -= detail::product_filter(detail::advect(s.v, jacobian(s.v)), num);
  raw += divergence(detail::product_filter(g_of_g(grad_potential(s.psi)), num));
  raw -= divergence(detail::product_filter(detail::ericksen_tensor(JM), num));

  return RhsB{leray_project(raw), psi_rhs(s.v, s.psi, num),
              detail::llg_explicit(s.v, s.M, JM, lapM, H, false, num)};
}

/// Full tendencies (L u + N(u)) of the primitive system at the state's time.
inline RhsA rhs_a(const StateA& s, const PhysParams& params, const Numerics& num = {}) {
  const auto H = params.h_ext.evaluate(s.grid_ptr(), s.t);
  auto r = explicit_rhs_a(s, H, !params.h_ext.is_zero(), num);
  r.dv += leray_project(laplacian(s.v) * params.nu);
  if (params.kappa != 0.0) r.dF += params.kappa * laplacian(s.F);
  r.dM += laplacian(s.M);
  return r;
}

/// Full tendencies of the reformulated system.
inline RhsB rhs_b(const StateB& s, const PhysParams& params, const Numerics& num = {}) {
  auto r = explicit_rhs_b(s, num);
  r.dv += leray_project(laplacian(s.v) * params.nu);
  r.dM += laplacian(s.M);
  return r;
}

}  // namespace magel
