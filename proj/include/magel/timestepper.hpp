#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "magel/dynamics.hpp"
#include "magel/energetics.hpp"
#include "magel/errors.hpp"
#include "magel/fields.hpp"
#include "magel/spectral.hpp"

namespace magel {

struct IntegratorConfig {
  double dt = 1e-3;
  double t_end = 0.0;
  /// Only "imex-ars222" is implemented.
  std::string scheme = "imex-ars222";
  /// Project M back onto the unit sphere after every step.
  bool renormalize_M = false;
  /// Largest admissible dt * max|v| / h.
  double cfl_guard = 0.5;
  /// Snapshot cadence in steps; 0 disables snapshots.
  int snapshot_every = 0;
  /// Diagnostic cadence in steps; 0 disables diagnostics.
  int diag_every = 1;

  void validate() const {
    if (!(dt > 0.0)) throw PreconditionError("IntegratorConfig: dt must be positive");
    if (!(t_end >= 0.0)) throw PreconditionError("IntegratorConfig: t_end must be non-negative");
    if (scheme != "imex-ars222") throw PreconditionError("IntegratorConfig: unknown scheme '" + scheme + "'");
    if (!(cfl_guard > 0.0)) throw PreconditionError("IntegratorConfig: cfl_guard must be positive");
    if (snapshot_every < 0 || diag_every < 0) {
      throw PreconditionError("IntegratorConfig: cadences must be non-negative");
    }
  }

  /// Number of steps to reach t_end (rounded to the nearest integer).
  long steps() const { return std::lround(t_end / dt); }
};

/// Identifies an explicit-tendency evaluation inside the step sequence.
struct StageClock {
  long step = 0;
  int stage = 0;  ///< 0 or 1
  double t = 0.0;
};

namespace ars222 {
inline const double kGamma = 1.0 - 1.0 / std::sqrt(2.0);
inline const double kDelta = 1.0 - 1.0 / (2.0 * kGamma);
}  // namespace ars222

template <class State>
struct ImexStep {
  State next;
  State stage;  ///< internal stage value at t + gamma dt
};

/**
 * One ARS(2,2,2) step of  du/dt = L u + N(u, t).
 *
 * The system supplies
 *   explicit_tendency(u, clock)  N(u, t)
 *   linear_tendency(u)           L u
 *   implicit_solve(rhs, c)       (1 - c L)^{-1} rhs
 *   finish_stage(u)              constraint projection after each solve
 */
template <class System, class State>
ImexStep<State> ars222_step(const System& sys, const State& u, double dt, long step) {
  const double g = ars222::kGamma;
  const double dl = ars222::kDelta;
  const double t0 = u.t;

  const State n1 = sys.explicit_tendency(u, StageClock{step, 0, t0});
  State u2 = sys.implicit_solve(u + (g * dt) * n1, g * dt);
  sys.finish_stage(u2);
  u2.t = t0 + g * dt;

  const State n2 = sys.explicit_tendency(u2, StageClock{step, 1, t0 + g * dt});
  const State l2 = sys.linear_tendency(u2);
  State rhs = u + (dl * dt) * n1;
  rhs += ((1.0 - dl) * dt) * n2;
  rhs += ((1.0 - g) * dt) * l2;
  State next = sys.implicit_solve(rhs, g * dt);
  sys.finish_stage(next);
  next.t = t0 + dt;
  return {std::move(next), std::move(u2)};
}

/// IMEX split of the primitive system.
struct SystemA {
  PhysParams params;
  Numerics numerics;

  StateA explicit_tendency(const StateA& s, const StageClock& clock) const {
    const auto H = params.h_ext.evaluate(s.grid_ptr(), clock.t);
    auto r = explicit_rhs_a(s, H, !params.h_ext.is_zero(), numerics);
    return StateA{s.t, std::move(r.dv), std::move(r.dF), std::move(r.dM)};
  }

  StateA linear_tendency(const StateA& s) const {
    return StateA{s.t, laplacian(s.v) * params.nu, laplacian(s.F) * params.kappa,
                  laplacian(s.M)};
  }

  StateA implicit_solve(StateA rhs, double c) const {
    const double nu = params.nu;
    const double kappa = params.kappa;
    rhs.v = map_components(std::move(rhs.v), [&](const ScalarField& f) { return helmholtz_solve(f, c * nu); });
    rhs.F = map_components(std::move(rhs.F), [&](const ScalarField& f) { return helmholtz_solve(f, c * kappa); });
    rhs.M = map_components(std::move(rhs.M), [&](const ScalarField& f) { return helmholtz_solve(f, c); });
    return rhs;
  }

  void finish_stage(StateA& s) const { s.v = leray_project(s.v); }
};

/// IMEX split of the reformulated system; psi carries no implicit part.
struct SystemB {
  PhysParams params;
  Numerics numerics;

  StateB explicit_tendency(const StateB& s, const StageClock&) const {
    auto r = explicit_rhs_b(s, numerics);
    return StateB{s.t, std::move(r.dv), std::move(r.dpsi), std::move(r.dM)};
  }

  StateB linear_tendency(const StateB& s) const {
    return StateB{s.t, laplacian(s.v) * params.nu, VectorField(s.grid_ptr(), s.psi.size()),
                  laplacian(s.M)};
  }

  StateB implicit_solve(StateB rhs, double c) const {
    const double nu = params.nu;
    rhs.v = map_components(std::move(rhs.v), [&](const ScalarField& f) { return helmholtz_solve(f, c * nu); });
    rhs.M = map_components(std::move(rhs.M), [&](const ScalarField& f) { return helmholtz_solve(f, c); });
    return rhs;
  }

  void finish_stage(StateB& s) const {
    s.v = leray_project(s.v);
    for (auto& c : s.psi.components()) c = remove_mean(std::move(c));
  }
};

namespace detail {

inline void check_cfl(const VectorField& v, double dt, double guard, double t) {
  const double cfl = dt * max_abs(v) / v.grid().spacing();
  if (!(cfl <= guard)) {
    throw NumericalFailure("CFL guard exceeded (dt*max|v|/h = " + std::to_string(cfl) + ")", t);
  }
}

}  // namespace detail

/// One step of the primitive system. Throws NumericalFailure on CFL violation or non-finite output.
inline StateA step_a(const StateA& s, const PhysParams& params, const IntegratorConfig& cfg,
                     const Numerics& num = {}, long step = 0) {
  detail::check_cfl(s.v, cfg.dt, cfg.cfl_guard, s.t);
  auto next = ars222_step(SystemA{params, num}, s, cfg.dt, step).next;
  if (cfg.renormalize_M) next.M = renormalize_m(next.M);
  if (!all_finite(next)) throw NumericalFailure("non-finite state", next.t);
  return next;
}

/// One step of the reformulated system.
inline StateB step_b(const StateB& s, const PhysParams& params, const IntegratorConfig& cfg,
                     const Numerics& num = {}, long step = 0) {
  if (!params.h_ext.is_zero()) {
    throw PreconditionError("step_b: the reformulated system requires H_ext = 0");
  }
  detail::check_cfl(s.v, cfg.dt, cfg.cfl_guard, s.t);
  auto next = ars222_step(SystemB{params, num}, s, cfg.dt, step).next;
  if (cfg.renormalize_M) next.M = renormalize_m(next.M);
  if (!all_finite(next)) throw NumericalFailure("non-finite state", next.t);
  return next;
}

inline StateA step(const StateA& s, const PhysParams& p, const IntegratorConfig& c,
                   const Numerics& n = {}, long k = 0) {
  return step_a(s, p, c, n, k);
}
inline StateB step(const StateB& s, const PhysParams& p, const IntegratorConfig& c,
                   const Numerics& n = {}, long k = 0) {
  return step_b(s, p, c, n, k);
}

template <class State>
struct RunSinks {
  std::function<void(const DiagnosticRecord&)> on_record;
  std::function<void(const State&, long step)> on_snapshot;
};

template <class State>
struct RunResult {
  State final_state;
  long steps_taken = 0;
  /// Time of the last successfully completed step.
  double reached_time = 0.0;
  bool completed = false;
  /// Failure description when !completed, including the failure time.
  std::string failure;
  double failure_time = 0.0;
};

/**
 * Integrates from s0 to cfg.t_end. Diagnostics are recorded at step 0 and
 * every diag_every steps (and at the final step); snapshots likewise every
 * snapshot_every steps. Step failures stop the run and are reported in the
 * result rather than thrown.
 */
template <class State>
RunResult<State> run(const State& s0, const PhysParams& params, const IntegratorConfig& cfg,
                     const DiagnosticSettings& diag, const RunSinks<State>& sinks = {}) {
  params.validate();
  cfg.validate();
  const long n_steps = cfg.steps();
  RunResult<State> res{s0, 0, s0.t, false, {}, 0.0};

  auto emit = [&](const State& s, long k) {
    const bool last = k == n_steps;
    if (sinks.on_record && cfg.diag_every > 0 && (k % cfg.diag_every == 0 || last)) {
      sinks.on_record(diagnose(s, params, diag));
    }
    if (sinks.on_snapshot && cfg.snapshot_every > 0 && (k % cfg.snapshot_every == 0 || last)) {
      sinks.on_snapshot(s, k);
    }
  };

  State s = s0;
  try {
    emit(s, 0);
    for (long k = 0; k < n_steps; ++k) {
      s = step(s, params, cfg, diag.numerics, k);
      s.t = s0.t + static_cast<double>(k + 1) * cfg.dt;
      res.final_state = s;
      res.steps_taken = k + 1;
      res.reached_time = s.t;
      emit(s, k + 1);
    }
    res.completed = true;
  } catch (const NumericalFailure& e) {
    res.failure = e.what();
    res.failure_time = e.time();
  } catch (const SingularDeformation& e) {
    res.failure = std::string(e.what()) + " (t = " + std::to_string(res.reached_time) + ")";
    res.failure_time = res.reached_time;
  } catch (const ConstraintBlowUp& e) {
    res.failure = std::string(e.what()) + " (t = " + std::to_string(res.reached_time) + ")";
    res.failure_time = res.reached_time;
  }
  return res;
}

}  // namespace magel
