#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "magel/errors.hpp"
#include "magel/field.hpp"
#include "magel/fields.hpp"
#include "magel/spectral.hpp"

namespace magel {

/// Deterministic uniform draws in [-1, 1) from a 64-bit Mersenne twister.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    // 53 random bits -> [0, 1), independent of the standard library's distributions.
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  }

 private:
  std::mt19937_64 rng_;
};

/**
 * Real trigonometric polynomial with vector values,
 *   f(x) = sum_k a_k cos(k.x) + b_k sin(k.x),
 * over nonzero integer wavevectors with |k_a| <= kmax (one of each +-k pair).
 * Evaluable at arbitrary points, so the same field can be sampled on any grid.
 */
class TrigVectorField {
 public:
  struct Mode {
    std::array<int, 3> k{0, 0, 0};
    std::vector<double> a;
    std::vector<double> b;
  };

  TrigVectorField(int dim, int components) : dim_(dim), components_(components) {}

  /// Random coefficients in [-1, 1). With `solenoidal` every amplitude is made orthogonal to k.
  static TrigVectorField random(int dim, int components, int kmax, UniformSource& rng,
                                bool solenoidal) {
    if (kmax < 1) throw PreconditionError("TrigVectorField: kmax must be >= 1");
    if (solenoidal && components != dim) {
      throw PreconditionError("TrigVectorField: solenoidal fields need dim components");
    }
    TrigVectorField f(dim, components);
    std::array<int, 3> k{0, 0, 0};
    const int lo = -kmax;
    for (k[0] = lo; k[0] <= kmax; ++k[0]) {
      for (k[1] = lo; k[1] <= kmax; ++k[1]) {
        for (k[2] = (dim == 3 ? lo : 0); k[2] <= (dim == 3 ? kmax : 0); ++k[2]) {
          if (!canonical(k)) continue;
          Mode m{k, std::vector<double>(static_cast<std::size_t>(components)),
                 std::vector<double>(static_cast<std::size_t>(components))};
          for (auto& x : m.a) x = rng.next();
          for (auto& x : m.b) x = rng.next();
          if (solenoidal) {
            project_out(m.a, k, dim);
            project_out(m.b, k, dim);
          }
          f.modes_.push_back(std::move(m));
        }
      }
    }
    return f;
  }

  int dim() const noexcept { return dim_; }
  int components() const noexcept { return components_; }
  const std::vector<Mode>& modes() const noexcept { return modes_; }

  /// Upper bound of max_x |f_c(x)| over components: max_c sum_k |a_kc| + |b_kc|.
  double sup_bound() const {
    double m = 0.0;
    for (int c = 0; c < components_; ++c) {
      double s = 0.0;
      for (const auto& mode : modes_) s += std::abs(mode.a[static_cast<std::size_t>(c)]) + std::abs(mode.b[static_cast<std::size_t>(c)]);
      m = std::max(m, s);
    }
    return m;
  }

  /// Rescales so that sup_bound() == target.
  TrigVectorField& normalize_to(double target) {
    const double b = sup_bound();
    if (b == 0.0) return *this;
    const double s = target / b;
    for (auto& mode : modes_) {
      for (auto& x : mode.a) x *= s;
      for (auto& x : mode.b) x *= s;
    }
    return *this;
  }

  void evaluate(std::span<const double> x, std::span<double> out) const {
    for (auto& o : out) o = 0.0;
    for (const auto& mode : modes_) {
      double phase = 0.0;
      for (int a = 0; a < dim_; ++a) phase += mode.k[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
      const double c = std::cos(phase);
      const double s = std::sin(phase);
      for (int i = 0; i < components_; ++i) {
        out[static_cast<std::size_t>(i)] += mode.a[static_cast<std::size_t>(i)] * c + mode.b[static_cast<std::size_t>(i)] * s;
      }
    }
  }

  /// Analytic Jacobian J(i, a) = d_a f_i, row-major.
  void jacobian(std::span<const double> x, std::span<double> out) const {
    for (auto& o : out) o = 0.0;
    for (const auto& mode : modes_) {
      double phase = 0.0;
      for (int a = 0; a < dim_; ++a) phase += mode.k[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
      const double c = std::cos(phase);
      const double s = std::sin(phase);
      for (int i = 0; i < components_; ++i) {
        const double amp = -mode.a[static_cast<std::size_t>(i)] * s + mode.b[static_cast<std::size_t>(i)] * c;
        for (int a = 0; a < dim_; ++a) {
          out[static_cast<std::size_t>(i * dim_ + a)] += amp * mode.k[static_cast<std::size_t>(a)];
        }
      }
    }
  }

  VectorField sample(const GridPtr& grid) const {
    if (grid->dim() != dim_) throw PreconditionError("TrigVectorField: grid dimension mismatch");
    VectorField f(grid, components_);
    std::vector<double> x(static_cast<std::size_t>(dim_));
    std::vector<double> val(static_cast<std::size_t>(components_));
    for (std::size_t p = 0; p < grid->points(); ++p) {
      for (int a = 0; a < dim_; ++a) x[static_cast<std::size_t>(a)] = grid->coordinate(p, a);
      evaluate(x, val);
      for (int c = 0; c < components_; ++c) f[c][p] = val[static_cast<std::size_t>(c)];
    }
    return f;
  }

 private:
  static bool canonical(const std::array<int, 3>& k) {
    for (int v : k) {
      if (v != 0) return v > 0;
    }
    return false;
  }

  static void project_out(std::vector<double>& amp, const std::array<int, 3>& k, int dim) {
    double kk = 0.0;
    double ka = 0.0;
    for (int a = 0; a < dim; ++a) {
      kk += static_cast<double>(k[static_cast<std::size_t>(a)]) * k[static_cast<std::size_t>(a)];
      ka += k[static_cast<std::size_t>(a)] * amp[static_cast<std::size_t>(a)];
    }
    for (int a = 0; a < dim; ++a) amp[static_cast<std::size_t>(a)] -= k[static_cast<std::size_t>(a)] * ka / kk;
  }

  int dim_;
  int components_;
  std::vector<Mode> modes_;
};

/// Which initial triple to build.
struct InitialDataSpec {
  enum class Variant { zero_steady, harmonic_map, random_small, shear_F, flow_map_F, from_snapshot };

  Variant variant = Variant::zero_steady;
  double amplitude = 1e-2;
  int kmax = 3;
  std::string snapshot_path;

  static Variant parse_variant(const std::string& name) {
    if (name == "zero_steady") return Variant::zero_steady;
    if (name == "harmonic_map") return Variant::harmonic_map;
    if (name == "random_small") return Variant::random_small;
    if (name == "shear_F") return Variant::shear_F;
    if (name == "flow_map_F") return Variant::flow_map_F;
    if (name == "from_snapshot") return Variant::from_snapshot;
    throw FormatError("unknown initial_data variant '" + name + "'");
  }

  static std::string variant_name(Variant v) {
    switch (v) {
      case Variant::zero_steady: return "zero_steady";
      case Variant::harmonic_map: return "harmonic_map";
      case Variant::random_small: return "random_small";
      case Variant::shear_F: return "shear_F";
      case Variant::flow_map_F: return "flow_map_F";
      case Variant::from_snapshot: return "from_snapshot";
    }
    return "";
  }
};

/// Substeps of the fourth-order integrations used to build deformation data.
inline constexpr int kPotentialFlowSteps = 64;
inline constexpr double kFlowMapStep = 1e-3;

/// Sup bound of the magnetization perturbation. Keeps |e_z + m| >= 0.55 so the
/// normalization is well defined at any amplitude.
inline constexpr double kMaxMagnetizationPerturbation = 0.45;

/// The three random fields behind random_small / flow_map_F, drawn in a fixed order.
struct RandomFields {
  TrigVectorField velocity;
  TrigVectorField flow;
  TrigVectorField magnetization;

  static RandomFields draw(int dim, int kmax, double amplitude, std::uint64_t seed) {
    UniformSource rng(seed);
    auto v = TrigVectorField::random(dim, dim, kmax, rng, true);
    auto u = TrigVectorField::random(dim, dim, kmax, rng, true);
    auto m = TrigVectorField::random(dim, 3, kmax, rng, false);
    v.normalize_to(amplitude);
    u.normalize_to(amplitude);
    m.normalize_to(std::min(amplitude, kMaxMagnetizationPerturbation));
    return {std::move(v), std::move(u), std::move(m)};
  }
};

/**
 * psi(x) = X(x) - x with X the inverse of the time-one flow map of the
 * divergence-free field u (found by flowing backwards with RK4). Then
 * I + grad psi is the inverse deformation gradient: curl free exactly and
 * of unit determinant up to the integration error. Returned with zero mean.
 */
inline VectorField flow_potential(const TrigVectorField& u, const GridPtr& grid) {
  const int d = grid->dim();
  VectorField psi(grid, d);
  const double h = 1.0 / kPotentialFlowSteps;
  std::vector<double> x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
  std::array<std::vector<double>, 4> k;
  for (auto& kk : k) kk.resize(static_cast<std::size_t>(d));

  for (std::size_t p = 0; p < grid->points(); ++p) {
    for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = grid->coordinate(p, a);
    const auto x0 = x;
    for (int step = 0; step < kPotentialFlowSteps; ++step) {
      // dX/dtau = -u(X)
      u.evaluate(x, k[0]);
      for (int a = 0; a < d; ++a) y[a] = x[a] - 0.5 * h * k[0][a];
      u.evaluate(y, k[1]);
      for (int a = 0; a < d; ++a) y[a] = x[a] - 0.5 * h * k[1][a];
      u.evaluate(y, k[2]);
      for (int a = 0; a < d; ++a) y[a] = x[a] - h * k[2][a];
      u.evaluate(y, k[3]);
      for (int a = 0; a < d; ++a) x[a] -= h / 6.0 * (k[0][a] + 2.0 * k[1][a] + 2.0 * k[2][a] + k[3][a]);
    }
    for (int a = 0; a < d; ++a) psi[a][p] = x[static_cast<std::size_t>(a)] - x0[static_cast<std::size_t>(a)];
  }
  for (auto& c : psi.components()) c = remove_mean(std::move(c));
  return psi;
}

/// F solving dF/dtau = (grad u) F, F(0) = I, pointwise over tau in [0, 1] with RK4.
inline MatrixField flow_map_deformation(const TrigVectorField& u, const GridPtr& grid) {
  const int d = grid->dim();
  const int dd = d * d;
  const long steps = std::lround(1.0 / kFlowMapStep);
  MatrixField F(grid, d, d);
  std::vector<double> x(static_cast<std::size_t>(d)), J(static_cast<std::size_t>(dd));
  std::vector<double> f(static_cast<std::size_t>(dd)), y(static_cast<std::size_t>(dd));
  std::array<std::vector<double>, 4> k;
  for (auto& kk : k) kk.resize(static_cast<std::size_t>(dd));

  auto rhs = [&](const std::vector<double>& m, std::vector<double>& out) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += J[i * d + l] * m[l * d + j];
        out[i * d + j] = s;
      }
    }
  };

  for (std::size_t p = 0; p < grid->points(); ++p) {
    for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = grid->coordinate(p, a);
    u.jacobian(x, J);
    for (int e = 0; e < dd; ++e) f[e] = (e / d == e % d) ? 1.0 : 0.0;
    const double h = kFlowMapStep;
    for (long s = 0; s < steps; ++s) {
      rhs(f, k[0]);
      for (int e = 0; e < dd; ++e) y[e] = f[e] + 0.5 * h * k[0][e];
      rhs(y, k[1]);
      for (int e = 0; e < dd; ++e) y[e] = f[e] + 0.5 * h * k[1][e];
      rhs(y, k[2]);
      for (int e = 0; e < dd; ++e) y[e] = f[e] + h * k[2][e];
      rhs(y, k[3]);
      for (int e = 0; e < dd; ++e) f[e] += h / 6.0 * (k[0][e] + 2.0 * k[1][e] + 2.0 * k[2][e] + k[3][e]);
    }
    F.set(p, f);
  }
  return F;
}

/// normalize(e_z + m) pointwise.
inline VectorField unit_perturbation(const TrigVectorField& m, const GridPtr& grid) {
  auto M = m.sample(grid);
  M[2] += 1.0;
  return renormalize_m(M);
}

namespace detail {

inline VectorField constant_unit_z(const GridPtr& grid) {
  VectorField M(grid, 3);
  M[2] = ScalarField::constant(grid, 1.0);
  return M;
}

inline VectorField harmonic_map_m(const GridPtr& grid) {
  VectorField M(grid, 3);
  M[0] = ScalarField::sample(grid, [](std::span<const double> x) { return std::cos(x[0]); });
  M[1] = ScalarField::sample(grid, [](std::span<const double> x) { return std::sin(x[0]); });
  return M;
}

/// psi = (a cos x_2, 0, ...): grad psi has the single entry G^{12} = -a sin x_2.
inline VectorField shear_potential(const GridPtr& grid, double a) {
  VectorField psi(grid, grid->dim());
  psi[0] = ScalarField::sample(grid, [a](std::span<const double> x) { return a * std::cos(x[1]); });
  return psi;
}

}  // namespace detail

/// Initial triple in reformulated variables. from_snapshot is handled by the snapshot loader.
inline StateB generate_state_b(const InitialDataSpec& spec, const GridPtr& grid,
                               std::uint64_t seed) {
  using V = InitialDataSpec::Variant;
  const int d = grid->dim();
  switch (spec.variant) {
    case V::zero_steady:
      return StateB{0.0, VectorField(grid, d), VectorField(grid, d), detail::constant_unit_z(grid)};
    case V::harmonic_map:
      return StateB{0.0, VectorField(grid, d), VectorField(grid, d), detail::harmonic_map_m(grid)};
    case V::shear_F:
      return StateB{0.0, VectorField(grid, d), detail::shear_potential(grid, spec.amplitude),
                    detail::constant_unit_z(grid)};
    case V::random_small:
    case V::flow_map_F: {
      // In reformulated variables both variants use the flow potential, which is curl free exactly.
      const auto r = RandomFields::draw(d, spec.kmax, spec.amplitude, seed);
      return StateB{0.0, leray_project(r.velocity.sample(grid)), flow_potential(r.flow, grid),
                    unit_perturbation(r.magnetization, grid)};
    }
    case V::from_snapshot:
      break;
  }
  throw PreconditionError("generate_state_b: from_snapshot data must be loaded from a file");
}

/// Initial triple in primitive variables.
inline StateA generate_state_a(const InitialDataSpec& spec, const GridPtr& grid,
                               std::uint64_t seed) {
  using V = InitialDataSpec::Variant;
  const int d = grid->dim();
  switch (spec.variant) {
    case V::zero_steady:
      return StateA{0.0, VectorField(grid, d), MatrixField::identity(grid, d), detail::constant_unit_z(grid)};
    case V::harmonic_map:
      return StateA{0.0, VectorField(grid, d), MatrixField::identity(grid, d), detail::harmonic_map_m(grid)};
    case V::shear_F:
    case V::random_small:
      return to_state_a(generate_state_b(spec, grid, seed));
    case V::flow_map_F: {
      const auto r = RandomFields::draw(d, spec.kmax, spec.amplitude, seed);
      return StateA{0.0, leray_project(r.velocity.sample(grid)), flow_map_deformation(r.flow, grid),
                    unit_perturbation(r.magnetization, grid)};
    }
    case V::from_snapshot:
      break;
  }
  throw PreconditionError("generate_state_a: from_snapshot data must be loaded from a file");
}

}  // namespace magel
