#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magel/dynamics.hpp"
#include "magel/energetics.hpp"
#include "magel/errors.hpp"
#include "magel/fields.hpp"
#include "magel/spectral.hpp"
#include "magel/timestepper.hpp"

namespace magel {

// ---- LLG with a prescribed velocity ---------------------------------------

/// Magnetization-only state used by the given-velocity LLG solver.
struct LlgState {
  double t = 0.0;
  VectorField M;

  LlgState& operator+=(const LlgState& o) {
    M += o.M;
    return *this;
  }
  LlgState& operator*=(double s) {
    M *= s;
    return *this;
  }
  friend LlgState operator+(LlgState a, const LlgState& b) { return a += b; }
  friend LlgState operator*(double s, LlgState a) { return a *= s; }
};

/// Velocity at a given stage of a given step.
using VelocityProvider = std::function<VectorField(const StageClock&)>;

/**
 * Explicit LLG tendency for a given velocity. With a cutoff K every nonlinear
 * term is passed through the Fourier truncation J to |xi| <= K:
 *   J[-v.grad M] + H + J[Gamma(M) M] - J[M x (Laplacian M + H)].
 * Without a cutoff this is exactly the monolithic explicit LLG term.
 */
inline VectorField llg_given_v_tendency(const VectorField& v, const VectorField& M,
                                        const VectorField& H, bool has_h,
                                        std::optional<double> cutoff, const Numerics& num) {
  if (!cutoff) return explicit_llg(v, M, H, has_h, num);

  const double K = *cutoff;
  const auto JM = jacobian(M);
  auto gamma = detail::grad_sq(JM);
  if (has_h) gamma -= dot(M, H);
  gamma = detail::product_filter(std::move(gamma), num);
  auto field = laplacian(M);
  if (has_h) field += H;

  VectorField out = truncate(detail::product_filter(detail::advect(v, JM), num), K) * -1.0;
  out += truncate(detail::product_filter(scale(gamma, M), num), K);
  out -= truncate(detail::product_filter(cross(M, field), num), K);
  if (has_h) out += H;
  return out;
}

/// IMEX split of the given-velocity LLG equation; Laplacian M implicit.
struct LlgSystem {
  VelocityProvider velocity;
  ExternalField h_ext;
  std::optional<double> cutoff;
  Numerics numerics;

  LlgState explicit_tendency(const LlgState& u, const StageClock& clock) const {
    const auto H = h_ext.evaluate(u.M.grid_ptr(), clock.t);
    return {u.t, llg_given_v_tendency(velocity(clock), u.M, H, !h_ext.is_zero(), cutoff,
                                      numerics)};
  }
  LlgState linear_tendency(const LlgState& u) const { return {u.t, laplacian(u.M)}; }
  LlgState implicit_solve(LlgState rhs, double c) const {
    rhs.M = map_components(std::move(rhs.M),
                           [c](const ScalarField& f) { return helmholtz_solve(f, c); });
    return rhs;
  }
  void finish_stage(LlgState&) const {}
};

struct MollifierConfig {
  double dt = 1e-3;
  double t_end = 0.2;
  /// Sobolev order s of the energy functional.
  int order = 2;
  int diag_every = 1;
  Numerics numerics;
};

/// One mollified LLG run at a fixed cutoff K = 1/epsilon.
struct MollifierRun {
  std::optional<double> cutoff;
  std::vector<double> times;
  /// |grad M|^2_{H^s} + |M - J M0|^2_{L2}
  std::vector<double> energy;
  /// |Laplacian M|^2_{H^s}
  std::vector<double> dissipation;
  /// |grad M0|^2_{H^s} of the untruncated data.
  double e0 = 0.0;
  VectorField final_M;
  double reached_time = 0.0;
  bool completed = false;
  std::string failure;

  double sup_energy() const {
    double m = 0.0;
    for (double e : energy) m = std::max(m, e);
    return m;
  }
};

namespace detail {

inline void check_cutoff(const TorusGrid& g, std::optional<double> cutoff) {
  if (!cutoff) return;
  if (!(*cutoff > 0.0)) throw PreconditionError("mollifier cutoff must be positive");
  if (3.0 * *cutoff > g.n()) {
    throw PreconditionError("mollifier cutoff exceeds the dealiasing band n/3");
  }
}

}  // namespace detail

/// Integrates the mollified LLG system from J M0. Failures end the run and are reported.
inline MollifierRun solve_llg_given_v(const VelocityProvider& velocity, const VectorField& M0,
                                      const ExternalField& h_ext, std::optional<double> cutoff,
                                      const MollifierConfig& cfg) {
  const auto& g = M0.grid();
  detail::check_cutoff(g, cutoff);
  if (M0.size() != 3) throw PreconditionError("solve_llg_given_v: M needs 3 components");
  if (sphere_residual(M0) > 1e-10) throw PreconditionError("solve_llg_given_v: |M0| must be 1");
  if (!(cfg.dt > 0.0) || !(cfg.t_end >= 0.0)) throw PreconditionError("solve_llg_given_v: bad dt");

  const VectorField JM0 = cutoff ? truncate(M0, *cutoff) : M0;
  const LlgSystem sys{velocity, h_ext, cutoff, cfg.numerics};

  MollifierRun run;
  run.cutoff = cutoff;
  run.e0 = grad_sobolev_norm_sq(M0, cfg.order);

  auto record = [&](const LlgState& s) {
    run.times.push_back(s.t);
    run.energy.push_back(grad_sobolev_norm_sq(s.M, cfg.order) + l2_norm_sq(s.M - JM0));
    run.dissipation.push_back(laplacian_sobolev_norm_sq(s.M, cfg.order));
  };

  LlgState s{0.0, JM0};
  const long steps = std::lround(cfg.t_end / cfg.dt);
  record(s);
  try {
    for (long k = 0; k < steps; ++k) {
      auto next = ars222_step(sys, s, cfg.dt, k).next;
      next.t = static_cast<double>(k + 1) * cfg.dt;
      if (!all_finite(next.M)) throw NumericalFailure("mollified LLG produced non-finite values", next.t);
      s = std::move(next);
      run.reached_time = s.t;
      if (cfg.diag_every > 0 && ((k + 1) % cfg.diag_every == 0 || k + 1 == steps)) record(s);
    }
    run.completed = true;
  } catch (const NumericalFailure& e) {
    run.failure = e.what();
  }
  run.final_M = s.M;
  return run;
}

struct MollifierStudyRow {
  double cutoff = 0.0;
  double sup_energy = 0.0;
  /// |M^K - M^{2K}|_{L2} at the final time against the next cutoff; NaN on the last row.
  double diff_to_next = std::numeric_limits<double>::quiet_NaN();
  /// Previous row's diff divided by this row's diff; NaN where undefined.
  double diff_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct MollifierStudy {
  double e0 = 0.0;
  double horizon = 0.0;
  std::vector<MollifierStudyRow> rows;
  std::vector<MollifierRun> runs;
  /// sup_t E_eps <= 2.2 E0 for every cutoff.
  bool energy_ceiling_ok = false;
  /// Every defined diff ratio is >= 4.
  bool differences_decrease = false;
  bool all_completed = false;

  static constexpr double kCeilingFactor = 2.2;
  static constexpr double kMinRatio = 4.0;
  bool passed() const { return energy_ceiling_ok && differences_decrease && all_completed; }
};

/// Runs every cutoff on the same data and tabulates successive differences.
inline MollifierStudy mollifier_convergence_study(const std::vector<double>& cutoffs,
                                                  const VelocityProvider& velocity,
                                                  const VectorField& M0,
                                                  const ExternalField& h_ext,
                                                  const MollifierConfig& cfg) {
  if (cutoffs.empty()) throw PreconditionError("mollifier study: no cutoffs");
  for (std::size_t i = 1; i < cutoffs.size(); ++i) {
    if (!(cutoffs[i] > cutoffs[i - 1])) throw PreconditionError("mollifier study: cutoffs must increase");
  }
  MollifierStudy study;
  study.horizon = cfg.t_end;
  study.all_completed = true;
  for (double K : cutoffs) {
    study.runs.push_back(solve_llg_given_v(velocity, M0, h_ext, K, cfg));
    study.all_completed = study.all_completed && study.runs.back().completed;
  }
  study.e0 = study.runs.front().e0;

  study.energy_ceiling_ok = true;
  study.differences_decrease = true;
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    MollifierStudyRow row;
    row.cutoff = cutoffs[i];
    row.sup_energy = study.runs[i].sup_energy();
    if (!(row.sup_energy <= MollifierStudy::kCeilingFactor * study.e0)) study.energy_ceiling_ok = false;
    if (i + 1 < cutoffs.size()) {
      row.diff_to_next = std::sqrt(l2_norm_sq(study.runs[i].final_M - study.runs[i + 1].final_M));
    }
    if (i > 0 && i + 1 < cutoffs.size()) {
      row.diff_ratio = study.rows.back().diff_to_next / row.diff_to_next;
      if (!(row.diff_ratio >= MollifierStudy::kMinRatio)) study.differences_decrease = false;
    }
    study.rows.push_back(row);
  }
  return study;
}

// ---- Picard iteration -----------------------------------------------------

/// Step-start states and internal stage states of one discrete trajectory.
struct StageTrajectory {
  std::vector<StateA> levels;  ///< steps + 1 entries
  std::vector<StateA> stages;  ///< steps entries

  const StateA& at(const StageClock& c) const {
    return c.stage == 0 ? levels[static_cast<std::size_t>(c.step)]
                        : stages[static_cast<std::size_t>(c.step)];
  }
};

struct PicardConfig {
  double dt = 1e-3;
  double t_end = 0.1;
  int iterations = 8;
  int order = 2;
  /// false: dt F^{n+1} = -v^n.grad F^n + grad v^n F^n (frozen right-hand side).
  /// true:  dt F^{n+1} = -v^n.grad F^{n+1} + grad v^n F^{n+1}.
  bool transported_f = false;
  Numerics numerics;
};

/**
 * One Picard sweep. v^{n+1} solves the Stokes-type problem with implicit
 * nu Laplacian and explicit level-n source; F^{n+1} integrates level-n data
 * (or transports F^{n+1}); M^{n+1} solves LLG with velocity v^n. The
 * explicit data is evaluated at the level-n stage states of the same IMEX
 * scheme, so a fixed point of the sweep is the monolithic discrete solution.
 */
struct PicardSystem {
  const StageTrajectory* previous = nullptr;
  PhysParams params;
  Numerics numerics;
  bool transported_f = false;

  StateA explicit_tendency(const StateA& u, const StageClock& clock) const {
    const StateA& src = previous->at(clock);
    const auto H = params.h_ext.evaluate(u.grid_ptr(), clock.t);
    const bool has_h = !params.h_ext.is_zero();
    return StateA{u.t, explicit_momentum_a(src, H, has_h, numerics),
                  deformation_rhs(src.v, transported_f ? u.F : src.F, 0.0, numerics),
                  explicit_llg(src.v, u.M, H, has_h, numerics)};
  }

  StateA linear_tendency(const StateA& s) const {
    return SystemA{params, numerics}.linear_tendency(s);
  }
  StateA implicit_solve(StateA rhs, double c) const {
    return SystemA{params, numerics}.implicit_solve(std::move(rhs), c);
  }
  void finish_stage(StateA& s) const { s.v = leray_project(s.v); }
};

struct PicardIterate {
  int index = 0;
  StateA final_state;
  double sup_energy = 0.0;          ///< sup_t E_n(t)
  double dissipation_integral = 0.0; ///< int_0^T D_n, trapezoidal in time
  double diff_to_previous = std::numeric_limits<double>::quiet_NaN();
  double max_div_v = 0.0;
  double max_sphere_res = 0.0;
};

struct PicardRun {
  double e0 = 0.0;
  PicardConfig config;
  std::vector<PicardIterate> iterates;
};

/// |dv|_{H^s} + |dF|_{H^s} + |grad dM|_{H^s}.
inline double picard_metric(const StateA& a, const StateA& b, int order) {
  return std::sqrt(sobolev_norm_sq(a.v - b.v, order)) +
         std::sqrt(sobolev_norm_sq(a.F - b.F, order)) +
         std::sqrt(grad_sobolev_norm_sq(a.M - b.M, order));
}

namespace detail {

inline PicardIterate summarize_iterate(int index, const StageTrajectory& traj, double nu,
                                       int order, double dt) {
  PicardIterate it;
  it.index = index;
  it.final_state = traj.levels.back();
  double prev_d = 0.0;
  for (std::size_t k = 0; k < traj.levels.size(); ++k) {
    const auto& s = traj.levels[k];
    const auto f = local_functionals(s, nu, order);
    it.sup_energy = std::max(it.sup_energy, f.e_s);
    if (k > 0) it.dissipation_integral += 0.5 * dt * (prev_d + f.d_s);
    prev_d = f.d_s;
    it.max_div_v = std::max(it.max_div_v, max_abs(divergence(s.v)));
    it.max_sphere_res = std::max(it.max_sphere_res, sphere_residual(s.M));
  }
  return it;
}

inline void attribute_failure(const StateA& s) {
  if (!all_finite(s.v)) throw NumericalFailure("Picard stage (i), velocity: non-finite values", s.t);
  if (!all_finite(s.F)) throw NumericalFailure("Picard stage (ii), deformation: non-finite values", s.t);
  if (!all_finite(s.M)) throw NumericalFailure("Picard stage (iii), magnetization: non-finite values", s.t);
}

}  // namespace detail

/// Runs cfg.iterations Picard sweeps starting from the constant-in-time iterate 0.
inline PicardRun picard_iterate(const StateA& initial, const PhysParams& params,
                                const PicardConfig& cfg) {
  params.validate();
  if (!(cfg.dt > 0.0) || !(cfg.t_end >= 0.0) || cfg.iterations < 0) {
    throw PreconditionError("picard_iterate: invalid configuration");
  }
  const long steps = std::lround(cfg.t_end / cfg.dt);
  const double t0 = initial.t;

  PicardRun run;
  run.config = cfg;
  run.e0 = local_functionals(initial, params.nu, cfg.order).e_s;

  StageTrajectory prev;
  prev.levels.assign(static_cast<std::size_t>(steps + 1), initial);
  prev.stages.assign(static_cast<std::size_t>(steps), initial);
  for (long k = 0; k <= steps; ++k) prev.levels[static_cast<std::size_t>(k)].t = t0 + static_cast<double>(k) * cfg.dt;
  for (long k = 0; k < steps; ++k) {
    prev.stages[static_cast<std::size_t>(k)].t = t0 + (static_cast<double>(k) + ars222::kGamma) * cfg.dt;
  }
  run.iterates.push_back(detail::summarize_iterate(0, prev, params.nu, cfg.order, cfg.dt));

  for (int n = 1; n <= cfg.iterations; ++n) {
    const PicardSystem sys{&prev, params, cfg.numerics, cfg.transported_f};
    StageTrajectory next;
    next.levels.reserve(static_cast<std::size_t>(steps + 1));
    next.stages.reserve(static_cast<std::size_t>(steps));
    next.levels.push_back(initial);
    for (long k = 0; k < steps; ++k) {
      auto st = ars222_step(sys, next.levels.back(), cfg.dt, k);
      st.next.t = t0 + static_cast<double>(k + 1) * cfg.dt;
      detail::attribute_failure(st.next);
      next.stages.push_back(std::move(st.stage));
      next.levels.push_back(std::move(st.next));
    }
    auto it = detail::summarize_iterate(n, next, params.nu, cfg.order, cfg.dt);
    it.diff_to_previous = picard_metric(it.final_state, run.iterates.back().final_state, cfg.order);
    run.iterates.push_back(std::move(it));
    prev = std::move(next);
  }
  return run;
}

struct PicardReport {
  /// Successive-difference ratio d_n / d_{n-1}, n >= 2 (index n).
  std::vector<double> ratios;
  /// Differences below this are treated as converged to roundoff.
  double roundoff_floor = 0.0;
  bool contraction_ok = false;
  double distance_to_reference = 0.0;
  double bound = 0.0;
  /// max over iterates n >= 1 of sup_t E_n + int D_n.
  double max_bound_value = 0.0;
  bool bound_ok = false;
  double max_div_v = 0.0;

  static constexpr double kMaxRatio = 0.5;
  static constexpr double kRelativeFloor = 1e-12;
};

/**
 * Contraction, distance to the monolithic reference at T, and the uniform
 * bound sup E_n + int D_n <= bound_factor * E0.
 */
inline PicardReport picard_convergence_report(const PicardRun& run, const StateA& reference,
                                              double bound_factor = 2.0) {
  if (run.iterates.empty()) throw PreconditionError("picard report: empty run");
  const int order = run.config.order;
  PicardReport rep;
  const auto& last = run.iterates.back().final_state;
  const StateA zero{last.t, last.v * 0.0, last.F * 0.0, last.M * 0.0};
  rep.roundoff_floor = PicardReport::kRelativeFloor * picard_metric(last, zero, order);

  rep.contraction_ok = true;
  rep.ratios.assign(run.iterates.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t n = 2; n < run.iterates.size(); ++n) {
    const double dn = run.iterates[n].diff_to_previous;
    const double dp = run.iterates[n - 1].diff_to_previous;
    rep.ratios[n] = dp > 0.0 ? dn / dp : std::numeric_limits<double>::quiet_NaN();
    const bool converged = dn <= rep.roundoff_floor;
    if (!converged && !(rep.ratios[n] <= PicardReport::kMaxRatio)) rep.contraction_ok = false;
  }

  rep.distance_to_reference = picard_metric(last, reference, order);
  rep.bound = bound_factor * run.e0;
  for (std::size_t n = 1; n < run.iterates.size(); ++n) {
    const auto& it = run.iterates[n];
    rep.max_bound_value = std::max(rep.max_bound_value, it.sup_energy + it.dissipation_integral);
    rep.max_div_v = std::max(rep.max_div_v, it.max_div_v);
  }
  rep.bound_ok = rep.max_bound_value <= rep.bound;
  return rep;
}

}  // namespace magel
