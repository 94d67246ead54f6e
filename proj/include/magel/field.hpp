#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "magel/errors.hpp"
#include "magel/grid.hpp"

namespace magel {

/// Real samples of a scalar function on a TorusGrid.
class ScalarField {
 public:
  ScalarField() = default;

  explicit ScalarField(GridPtr grid) : grid_(std::move(grid)), values_(grid_->points(), 0.0) {}

  ScalarField(GridPtr grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->points()) {
      throw PreconditionError("ScalarField: value count does not match grid");
    }
  }

  static ScalarField constant(GridPtr grid, double c) {
    ScalarField f(std::move(grid));
    std::fill(f.values_.begin(), f.values_.end(), c);
    return f;
  }

  /// Samples fn(x) where x holds the point coordinates (length dim).
  template <class Fn>
  static ScalarField sample(GridPtr grid, Fn&& fn) {
    ScalarField f(grid);
    std::vector<double> x(static_cast<std::size_t>(grid->dim()));
    for (std::size_t p = 0; p < grid->points(); ++p) {
      for (int a = 0; a < grid->dim(); ++a) x[static_cast<std::size_t>(a)] = grid->coordinate(p, a);
      f.values_[p] = fn(std::span<const double>(x));
    }
    return f;
  }

  const TorusGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  ScalarField& operator+=(const ScalarField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  ScalarField& operator*=(double s) noexcept {
    for (auto& v : values_) v *= s;
    return *this;
  }
  ScalarField& operator+=(double c) noexcept {
    for (auto& v : values_) v += c;
    return *this;
  }
  /// Pointwise product.
  ScalarField& operator*=(const ScalarField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= o.values_[i];
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }
  friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

  /// Replaces every sample by fn(sample).
  template <class Fn>
  ScalarField& transform(Fn&& fn) {
    for (auto& v : values_) v = fn(v);
    return *this;
  }

  void check_same(const ScalarField& o) const {
    if (grid_ != o.grid_ && (grid_->dim() != o.grid_->dim() || grid_->n() != o.grid_->n())) {
      throw PreconditionError("field operands live on different grids");
    }
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Shared elementwise arithmetic for containers of ScalarField.
template <class Derived>
class ComponentArithmetic {
 public:
  Derived& operator+=(const Derived& o) {
    auto& a = self().components();
    const auto& b = o.components();
    check(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return self();
  }
  Derived& operator-=(const Derived& o) {
    auto& a = self().components();
    const auto& b = o.components();
    check(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return self();
  }
  Derived& operator*=(double s) {
    for (auto& c : self().components()) c *= s;
    return self();
  }

  friend Derived operator+(Derived a, const Derived& b) { return a += b; }
  friend Derived operator-(Derived a, const Derived& b) { return a -= b; }
  friend Derived operator*(double s, Derived a) { return a *= s; }
  friend Derived operator*(Derived a, double s) { return a *= s; }
  friend Derived operator-(Derived a) { return a *= -1.0; }

 private:
  Derived& self() { return static_cast<Derived&>(*this); }
  static void check(bool ok) {
    if (!ok) throw PreconditionError("component count mismatch");
  }
};

/// Ordered list of scalar components sharing one grid.
class VectorField : public ComponentArithmetic<VectorField> {
 public:
  VectorField() = default;
  VectorField(const GridPtr& grid, int components)
      : comps_(static_cast<std::size_t>(components), ScalarField(grid)) {}
  explicit VectorField(std::vector<ScalarField> comps) : comps_(std::move(comps)) {
    for (const auto& c : comps_) c.check_same(comps_.front());
  }

  int size() const noexcept { return static_cast<int>(comps_.size()); }
  ScalarField& operator[](int i) { return comps_[static_cast<std::size_t>(i)]; }
  const ScalarField& operator[](int i) const { return comps_[static_cast<std::size_t>(i)]; }
  const GridPtr& grid_ptr() const { return comps_.front().grid_ptr(); }
  const TorusGrid& grid() const { return comps_.front().grid(); }

  std::vector<ScalarField>& components() noexcept { return comps_; }
  const std::vector<ScalarField>& components() const noexcept { return comps_; }

 private:
  std::vector<ScalarField> comps_;
};

/// rows x cols matrix of scalar fields; entry (i, j) is row i, column j.
class MatrixField : public ComponentArithmetic<MatrixField> {
 public:
  MatrixField() = default;
  MatrixField(const GridPtr& grid, int rows, int cols)
      : rows_(rows), cols_(cols),
        entries_(static_cast<std::size_t>(rows * cols), ScalarField(grid)) {}

  static MatrixField identity(const GridPtr& grid, int d) {
    MatrixField m(grid, d, d);
    for (int i = 0; i < d; ++i) m(i, i) = ScalarField::constant(grid, 1.0);
    return m;
  }

  /// Every point holds the same matrix `values` (row-major, rows*cols entries).
  static MatrixField constant(const GridPtr& grid, int rows, int cols,
                              std::span<const double> values) {
    MatrixField m(grid, rows, cols);
    for (std::size_t e = 0; e < m.entries_.size(); ++e) {
      m.entries_[e] = ScalarField::constant(grid, values[e]);
    }
    return m;
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  ScalarField& operator()(int i, int j) { return entries_[index(i, j)]; }
  const ScalarField& operator()(int i, int j) const { return entries_[index(i, j)]; }
  const GridPtr& grid_ptr() const { return entries_.front().grid_ptr(); }
  const TorusGrid& grid() const { return entries_.front().grid(); }

  /// Matrix stored at point p, row-major.
  std::vector<double> at(std::size_t p) const {
    std::vector<double> out(entries_.size());
    for (std::size_t e = 0; e < entries_.size(); ++e) out[e] = entries_[e][p];
    return out;
  }
  void set(std::size_t p, std::span<const double> m) {
    for (std::size_t e = 0; e < entries_.size(); ++e) entries_[e][p] = m[e];
  }

  std::vector<ScalarField>& components() noexcept { return entries_; }
  const std::vector<ScalarField>& components() const noexcept { return entries_; }

 private:
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i * cols_ + j);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<ScalarField> entries_;
};

// ---- reductions -----------------------------------------------------------

inline double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

template <class Container>
  requires requires(const Container& c) { c.components(); }
double max_abs(const Container& c) {
  double m = 0.0;
  for (const auto& f : c.components()) m = std::max(m, max_abs(f));
  return m;
}

inline bool all_finite(const ScalarField& f) {
  return std::all_of(f.values().begin(), f.values().end(),
                     [](double v) { return std::isfinite(v); });
}

template <class Container>
  requires requires(const Container& c) { c.components(); }
bool all_finite(const Container& c) {
  return std::all_of(c.components().begin(), c.components().end(),
                     [](const ScalarField& f) { return all_finite(f); });
}

inline double mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

/// L2 inner product: grid sum times cell volume.
inline double inner(const ScalarField& a, const ScalarField& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid().cell_volume();
}

template <class Container>
  requires requires(const Container& c) { c.components(); }
double inner(const Container& a, const Container& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.components().size(); ++i) {
    s += inner(a.components()[i], b.components()[i]);
  }
  return s;
}

inline double l2_norm_sq(const ScalarField& f) { return inner(f, f); }

template <class Container>
  requires requires(const Container& c) { c.components(); }
double l2_norm_sq(const Container& c) {
  return inner(c, c);
}

/// Pointwise dot product of two vector fields of equal length.
inline ScalarField dot(const VectorField& a, const VectorField& b) {
  ScalarField out(a.grid_ptr());
  for (int k = 0; k < a.size(); ++k) {
    const auto& x = a[k];
    const auto& y = b[k];
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += x[p] * y[p];
  }
  return out;
}

/// Pointwise cross product of 3-component fields.
inline VectorField cross(const VectorField& a, const VectorField& b) {
  if (a.size() != 3 || b.size() != 3) throw PreconditionError("cross: need 3 components");
  VectorField out(a.grid_ptr(), 3);
  for (std::size_t p = 0; p < a[0].size(); ++p) {
    out[0][p] = a[1][p] * b[2][p] - a[2][p] * b[1][p];
    out[1][p] = a[2][p] * b[0][p] - a[0][p] * b[2][p];
    out[2][p] = a[0][p] * b[1][p] - a[1][p] * b[0][p];
  }
  return out;
}

/// Pointwise scalar * vector.
inline VectorField scale(const ScalarField& s, VectorField v) {
  for (auto& c : v.components()) c *= s;
  return v;
}

}  // namespace magel
