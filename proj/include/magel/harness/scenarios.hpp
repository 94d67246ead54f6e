#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "magel/energetics.hpp"
#include "magel/errors.hpp"
#include "magel/fields.hpp"
#include "magel/harness/config.hpp"
#include "magel/harness/initial_data.hpp"
#include "magel/harness/snapshot.hpp"
#include "magel/schemes.hpp"
#include "magel/stokes.hpp"
#include "magel/timestepper.hpp"

namespace magel {

// ---- CSV ------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Plain CSV writer: header row, then rows of doubles at 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : os_(path, std::ios::trunc), columns_(columns.size()) {
    if (!os_) throw FormatError("cannot open CSV for writing: " + path.string());
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != columns_) throw PreconditionError("CsvWriter: wrong number of values");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_double(values[i]);
    os_ << '\n';
  }

  void raw_row(const std::string& line) { os_ << line << '\n'; }

 private:
  std::ofstream os_;
  std::size_t columns_;
};

inline std::vector<std::string> diagnostic_columns() {
  return {DiagnosticRecord::kColumns.begin(), DiagnosticRecord::kColumns.end()};
}

// ---- verdicts -------------------------------------------------------------

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  /// "<=" or ">="
  std::string relation = "<=";
  bool passed = false;

  static Check at_most(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, "<=", value <= threshold};
  }
  static Check at_least(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, ">=", value >= threshold};
  }
};

struct ScenarioResult {
  explicit ScenarioResult(std::string name) : scenario(std::move(name)) {}

  std::string scenario;
  std::vector<Check> checks;
  bool numerical_failure = false;
  std::string failure;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  bool passed() const {
    if (numerical_failure) return false;
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }

  /// 0 pass, 1 failed check, 3 numerical failure.
  int exit_code() const {
    if (numerical_failure) return 3;
    return passed() ? 0 : 1;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario;
    j["passed"] = passed();
    j["numerical_failure"] = numerical_failure;
    if (!failure.empty()) j["failure"] = failure;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      j["checks"].push_back({{"name", c.name},
                             {"value", c.value},
                             {"relation", c.relation},
                             {"threshold", c.threshold},
                             {"passed", c.passed}});
    }
    j["details"] = details;
    return j;
  }
};

inline void write_verdict(const ScenarioResult& r, const std::filesystem::path& dir) {
  std::ofstream os(dir / "verdict.json", std::ios::trunc);
  if (!os) throw FormatError("cannot write verdict in " + dir.string());
  os << r.to_json().dump(2) << '\n';
}

// ---- series checks --------------------------------------------------------

/// Largest relative increase (x[k+1] - x[k]) / |x[k]| over consecutive entries; 0 for fewer than two.
inline double max_relative_increase(const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double scale = std::max(std::abs(x[k - 1]), std::numeric_limits<double>::min());
    worst = std::max(worst, (x[k] - x[k - 1]) / scale);
  }
  return worst;
}

template <class Member>
std::vector<double> column(const std::vector<DiagnosticRecord>& rows, Member m) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.*m);
  return out;
}

inline double max_of(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, v);
  return m;
}

// ---- simulations ----------------------------------------------------------

/// Initial state in the configured formulation, generated or loaded.
inline AnyState initial_state(const SimulationConfig& cfg) {
  if (cfg.initial.variant == InitialDataSpec::Variant::from_snapshot) {
    auto s = load_snapshot(cfg.initial.snapshot_path);
    const auto& g = std::visit([](const auto& st) -> const TorusGrid& { return st.v.grid(); }, s);
    if (g.dim() != cfg.dim || g.n() != cfg.n) throw FormatError("snapshot grid differs from config grid");
    const bool want_a = cfg.formulation == "A";
    if (want_a && std::holds_alternative<StateB>(s)) return to_state_a(std::get<StateB>(s));
    if (!want_a && std::holds_alternative<StateA>(s)) return to_state_b(std::get<StateA>(s));
    return s;
  }
  const auto grid = cfg.make_grid();
  if (cfg.formulation == "A") return generate_state_a(cfg.initial, grid, cfg.seed);
  return generate_state_b(cfg.initial, grid, cfg.seed);
}

struct SimulationOutput {
  explicit SimulationOutput(AnyState s) : final_state(std::move(s)) {}

  AnyState final_state;
  std::vector<DiagnosticRecord> records;
  bool completed = false;
  double reached_time = 0.0;
  std::string failure;
  double failure_time = 0.0;
};

/// Integrates the configured system, streaming diagnostics to CSV and snapshots to `dir`.
inline SimulationOutput run_simulation(const SimulationConfig& cfg, const std::filesystem::path& dir,
                                       const std::string& csv_name) {
  std::filesystem::create_directories(dir);
  CsvWriter csv(dir / csv_name, diagnostic_columns());
  const auto s0 = initial_state(cfg);
  SimulationOutput out(s0);

  auto body = [&](const auto& start) {
    using State = std::decay_t<decltype(start)>;
    RunSinks<State> sinks;
    sinks.on_record = [&](const DiagnosticRecord& r) {
      out.records.push_back(r);
      csv.raw_row(r.csv_row());
    };
    sinks.on_snapshot = [&](const State& s, long k) {
      char name[32];
      std::snprintf(name, sizeof name, "snapshot_%06ld.bin", k);
      write_snapshot(s, (dir / name).string());
    };
    auto res = run(start, cfg.physics, cfg.integrator, cfg.diagnostics(), sinks);
    out.final_state = res.final_state;
    out.completed = res.completed;
    out.reached_time = res.reached_time;
    out.failure = res.failure;
    out.failure_time = res.failure_time;
  };
  std::visit(body, s0);
  return out;
}

// ---- scenarios ------------------------------------------------------------

struct ScenarioContext {
  SimulationConfig config;
  std::filesystem::path out_dir;
  bool quiet = true;
};

namespace scenario {

inline void note_failure(ScenarioResult& r, const SimulationOutput& sim) {
  if (!sim.completed) {
    r.numerical_failure = true;
    r.failure = sim.failure;
  }
  r.details["reached_time"] = sim.reached_time;
}

/// Small-data run; the global functional must decay monotonically and by at least 10 %.
inline ScenarioResult decay_small_data(const ScenarioContext& ctx) {
  ScenarioResult r("decay_small_data");
  const auto sim = run_simulation(ctx.config, ctx.out_dir, ctx.config.csv_name);
  note_failure(r, sim);
  const auto e = column(sim.records, &DiagnosticRecord::e_global);
  const double slack = 1e-8 * std::max(1, ctx.config.integrator.diag_every);
  r.checks.push_back(Check::at_most("e_global_max_relative_increase", max_relative_increase(e), slack));
  if (!e.empty()) {
    r.checks.push_back(Check::at_most("e_global_final_over_initial", e.back() / e.front(), 0.9));
  }
  r.details["delta"] = ctx.config.resolved_delta();
  return r;
}

/// Runs both formulations in lockstep from matched data and compares F with (I + grad psi)^{-1}.
inline ScenarioResult formulation_equivalence(const ScenarioContext& ctx) {
  ScenarioResult r("formulation_equivalence");
  auto cfg = ctx.config;
  if (!cfg.physics.h_ext.is_zero()) throw FormatError("formulation_equivalence requires H_ext = 0");
  std::filesystem::create_directories(ctx.out_dir);
  const auto grid = cfg.make_grid();
  StateB b = generate_state_b(cfg.initial, grid, cfg.seed);
  StateA a = to_state_a(b);
  const auto num = cfg.numerics();
  const long steps = cfg.integrator.steps();
  const int every = std::max(1, cfg.integrator.diag_every);

  CsvWriter csv(ctx.out_dir / cfg.csv_name, {"t", "f_diff", "v_diff", "m_diff"});
  double last_f = 0.0;
  auto compare = [&] {
    const auto Fb = g_to_f(grad_potential(b.psi));
    last_f = max_abs(a.F - Fb);
    csv.row({a.t, last_f, max_abs(a.v - b.v), max_abs(a.M - b.M)});
  };
  try {
    compare();
    for (long k = 0; k < steps; ++k) {
      a = step_a(a, cfg.physics, cfg.integrator, num, k);
      b = step_b(b, cfg.physics, cfg.integrator, num, k);
      a.t = b.t = static_cast<double>(k + 1) * cfg.integrator.dt;
      if ((k + 1) % every == 0 || k + 1 == steps) compare();
    }
  } catch (const NumericalFailure& e) {
    r.numerical_failure = true;
    r.failure = e.what();
  } catch (const SingularDeformation& e) {
    r.numerical_failure = true;
    r.failure = e.what();
  }
  r.checks.push_back(Check::at_most("f_diff_at_t_end", last_f, 1e-5));
  r.details["t_end"] = cfg.integrator.t_end;
  return r;
}

/// Constraint residual columns over a run with renormalization off.
inline ScenarioResult constraint_audit(const ScenarioContext& ctx) {
  ScenarioResult r("constraint_audit");
  const auto sim = run_simulation(ctx.config, ctx.out_dir, ctx.config.csv_name);
  note_failure(r, sim);
  const auto& rows = sim.records;
  r.checks.push_back(Check::at_most("sphere_res_max", max_of(column(rows, &DiagnosticRecord::sphere_res)), 1e-7));
  r.checks.push_back(Check::at_most("det_res_max", max_of(column(rows, &DiagnosticRecord::det_res)), 1e-6));
  r.checks.push_back(Check::at_most("div_v_res_max", max_of(column(rows, &DiagnosticRecord::div_v_res)), 1e-10));
  if (ctx.config.formulation == "B") {
    r.checks.push_back(Check::at_most("curl_res_max", max_of(column(rows, &DiagnosticRecord::curl_res)), 1e-11));
    r.checks.push_back(Check::at_most("trg_vs_divpsi_res_max",
                                      max_of(column(rows, &DiagnosticRecord::trg_vs_divpsi_res)), 1e-13));
  }
  r.details["renormalize_M"] = ctx.config.integrator.renormalize_M;
  return r;
}

/// Runs until t_end or blow-up and records how far the solution got.
inline ScenarioResult lifespan_probe(const ScenarioContext& ctx) {
  ScenarioResult r("lifespan_probe");
  const auto sim = run_simulation(ctx.config, ctx.out_dir, ctx.config.csv_name);
  r.checks.push_back(Check::at_least("reached_time", sim.reached_time,
                                     std::numeric_limits<double>::min()));
  r.details["completed"] = sim.completed;
  r.details["reached_time"] = sim.reached_time;
  if (!sim.completed) {
    r.details["blow_up"] = sim.failure;
    r.details["blow_up_time"] = sim.failure_time;
  }
  return r;
}

struct StokesTrial {
  double momentum_res = 0.0;
  double divergence_res = 0.0;
  double f_max = 0.0;
  double g_max = 0.0;
  double estimate_ratio = 0.0;
  bool passed = false;
};

/// Random band-limited data for one Stokes trial: f with dim components, g scalar, both sup-normalized to 1.
inline std::pair<VectorField, ScalarField> random_stokes_data(const GridPtr& grid, int kmax,
                                                              UniformSource& rng) {
  const auto f = TrigVectorField::random(grid->dim(), grid->dim(), kmax, rng, false).normalize_to(1.0);
  const auto g = TrigVectorField::random(grid->dim(), 1, kmax, rng, false).normalize_to(1.0);
  return {f.sample(grid), g.sample(grid)[0]};
}

inline StokesTrial stokes_trial(const VectorField& f, const ScalarField& g, int m) {
  const auto sol = solve_generalized_stokes(f, g);
  const auto res = stokes_residual(sol, f, g);
  StokesTrial t;
  t.momentum_res = res.momentum;
  t.divergence_res = res.divergence;
  t.f_max = max_abs(f);
  t.g_max = max_abs(g);
  t.estimate_ratio = stokes_estimate_ratio(sol, f, g, m);
  t.passed = t.momentum_res <= 1e-10 * t.f_max + 1e-12 && t.divergence_res <= 1e-10 * t.g_max + 1e-12;
  return t;
}

/// Max deviation of the solver from the three closed-form cases (2-D profiles).
inline double stokes_analytic_error(const GridPtr& grid) {
  const int d = grid->dim();
  auto sx = ScalarField::sample(grid, [](std::span<const double> x) { return std::sin(x[0]); });
  auto sy = ScalarField::sample(grid, [](std::span<const double> x) { return std::sin(x[1]); });
  auto cx = ScalarField::sample(grid, [](std::span<const double> x) { return std::cos(x[0]); });
  double err = 0.0;
  {
    const auto sol = solve_generalized_stokes(VectorField(grid, d), ScalarField(grid));
    err = std::max({err, max_abs(sol.w), max_abs(sol.q)});
  }
  {
    VectorField f(grid, d);
    f[0] = sy;
    const auto sol = solve_generalized_stokes(f, ScalarField(grid));
    err = std::max({err, max_abs(sol.w - f), max_abs(sol.q)});
  }
  {
    VectorField w(grid, d);
    w[0] = cx * -1.0;
    const auto sol = solve_generalized_stokes(VectorField(grid, d), sx);
    err = std::max({err, max_abs(sol.w - w), max_abs(sol.q - sx)});
  }
  return err;
}

/// Random generalized Stokes solves plus the closed-form cases.
inline ScenarioResult stokes_verify(const ScenarioContext& ctx) {
  ScenarioResult r("stokes_verify");
  const auto& cfg = ctx.config;
  std::filesystem::create_directories(ctx.out_dir);
  const auto grid = cfg.make_grid();
  UniformSource rng(cfg.seed);
  const int m = 1;

  CsvWriter csv(ctx.out_dir / cfg.csv_name,
                {"trial", "momentum_res", "divergence_res", "f_max", "g_max", "estimate_ratio", "passed"});
  // The same band-limited data is also solved on the half-resolution grid to
  // measure how stable the estimate constant is.
  const auto coarse = TorusGrid::create(cfg.dim, cfg.n / 2);
  const bool compare_coarse = 3 * cfg.initial.kmax <= cfg.n / 2;
  int passed = 0;
  double max_ratio = 0.0;
  double max_ratio_coarse = 0.0;
  for (int i = 0; i < cfg.stokes_trials; ++i) {
    const auto f_src = TrigVectorField::random(cfg.dim, cfg.dim, cfg.initial.kmax, rng, false).normalize_to(1.0);
    const auto g_src = TrigVectorField::random(cfg.dim, 1, cfg.initial.kmax, rng, false).normalize_to(1.0);
    const auto f = f_src.sample(grid);
    const auto g = g_src.sample(grid)[0];
    const auto t = stokes_trial(f, g, m);
    passed += t.passed ? 1 : 0;
    max_ratio = std::max(max_ratio, t.estimate_ratio);
    if (compare_coarse) {
      const auto tc = stokes_trial(f_src.sample(coarse), g_src.sample(coarse)[0], m);
      max_ratio_coarse = std::max(max_ratio_coarse, tc.estimate_ratio);
    }
    csv.row({static_cast<double>(i), t.momentum_res, t.divergence_res, t.f_max, t.g_max,
             t.estimate_ratio, t.passed ? 1.0 : 0.0});
  }
  r.checks.push_back(Check::at_least("random_trials_passed", passed, cfg.stokes_trials));
  r.checks.push_back(Check::at_most("analytic_max_error", stokes_analytic_error(grid), 1e-12));
  r.checks.push_back(Check::at_least("estimate_ratio_finite", std::isfinite(max_ratio) ? 1.0 : 0.0, 1.0));
  if (compare_coarse) {
    const double spread = std::max(max_ratio, max_ratio_coarse) / std::min(max_ratio, max_ratio_coarse);
    r.checks.push_back(Check::at_most("estimate_ratio_resolution_spread", spread, 2.0));
    r.details["estimate_ratio_max_coarse"] = max_ratio_coarse;
  }
  r.details["estimate_ratio_max"] = max_ratio;
  r.details["trials"] = cfg.stokes_trials;
  r.details["estimate_order_m"] = m;
  return r;
}

/// Mollified LLG at several cutoffs with the initial velocity frozen in time.
inline ScenarioResult mollifier_study(const ScenarioContext& ctx) {
  ScenarioResult r("mollifier_study");
  const auto& cfg = ctx.config;
  std::filesystem::create_directories(ctx.out_dir);
  const auto grid = cfg.make_grid();
  const auto s0 = generate_state_b(cfg.initial, grid, cfg.seed);
  const VectorField v0 = s0.v;
  const VelocityProvider velocity = [v0](const StageClock&) { return v0; };
  MollifierConfig mc{cfg.integrator.dt, cfg.integrator.t_end, cfg.sobolev_s,
                     std::max(1, cfg.integrator.diag_every), cfg.numerics()};
  const auto study = mollifier_convergence_study(cfg.cutoffs, velocity, s0.M, cfg.physics.h_ext, mc);

  CsvWriter csv(ctx.out_dir / cfg.csv_name, {"cutoff", "sup_energy", "e0", "diff_to_next", "diff_ratio"});
  for (const auto& row : study.rows) {
    csv.row({row.cutoff, row.sup_energy, study.e0, row.diff_to_next, row.diff_ratio});
  }
  CsvWriter series(ctx.out_dir / "mollifier_energy.csv", {"cutoff", "t", "energy", "dissipation"});
  for (const auto& run : study.runs) {
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      series.row({*run.cutoff, run.times[k], run.energy[k], run.dissipation[k]});
    }
  }

  if (!study.all_completed) {
    r.numerical_failure = true;
    for (const auto& run : study.runs) {
      if (!run.completed) r.failure = run.failure;
    }
  }
  double sup_ratio = 0.0;
  for (const auto& row : study.rows) sup_ratio = std::max(sup_ratio, row.sup_energy / study.e0);
  r.checks.push_back(Check::at_most("sup_energy_over_e0", sup_ratio, MollifierStudy::kCeilingFactor));
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& row : study.rows) {
    if (!std::isnan(row.diff_ratio)) min_ratio = std::min(min_ratio, row.diff_ratio);
  }
  if (std::isfinite(min_ratio)) {
    r.checks.push_back(Check::at_least("min_difference_ratio", min_ratio, MollifierStudy::kMinRatio));
  }
  r.details["e0"] = study.e0;
  r.details["horizon"] = study.horizon;
  return r;
}

/// Picard sweeps against the monolithic solution at T = t_end.
inline ScenarioResult picard_study(const ScenarioContext& ctx) {
  ScenarioResult r("picard_study");
  const auto& cfg = ctx.config;
  std::filesystem::create_directories(ctx.out_dir);
  const auto grid = cfg.make_grid();
  const auto s0 = generate_state_a(cfg.initial, grid, cfg.seed);

  CsvWriter csv(ctx.out_dir / cfg.csv_name,
                {"transported_f", "iterate", "diff_to_previous", "ratio", "sup_energy",
                 "dissipation_integral", "bound_value", "distance_to_reference", "max_div_v",
                 "max_sphere_res"});
  try {
    StateA ref = s0;
    IntegratorConfig ic = cfg.integrator;
    for (long k = 0; k < ic.steps(); ++k) {
      ref = step_a(ref, cfg.physics, ic, cfg.numerics(), k);
      ref.t = static_cast<double>(k + 1) * ic.dt;
    }

    std::vector<bool> variants{false};
    if (cfg.picard_transported_f) variants.push_back(true);
    for (bool transported : variants) {
      PicardConfig pc{cfg.integrator.dt, cfg.integrator.t_end, cfg.picard_iterations, cfg.sobolev_s,
                      transported, cfg.numerics()};
      const auto run = picard_iterate(s0, cfg.physics, pc);
      const auto rep = picard_convergence_report(run, ref);
      for (std::size_t n = 0; n < run.iterates.size(); ++n) {
        const auto& it = run.iterates[n];
        csv.row({transported ? 1.0 : 0.0, static_cast<double>(n), it.diff_to_previous, rep.ratios[n],
                 it.sup_energy, it.dissipation_integral, it.sup_energy + it.dissipation_integral,
                 picard_metric(it.final_state, ref, cfg.sobolev_s), it.max_div_v, it.max_sphere_res});
      }
      const std::string tag = transported ? "transported_" : "";
      if (!transported) {
        double worst = 0.0;
        for (std::size_t n = 2; n < rep.ratios.size(); ++n) {
          if (run.iterates[n].diff_to_previous > rep.roundoff_floor) worst = std::max(worst, rep.ratios[n]);
        }
        r.checks.push_back(Check::at_most("max_ratio_above_roundoff_floor", worst, PicardReport::kMaxRatio));
        r.checks.push_back(Check::at_most("distance_to_reference", rep.distance_to_reference, 1e-4));
        r.checks.push_back(Check::at_most("max_bound_value", rep.max_bound_value, rep.bound));
        r.checks.push_back(Check::at_most("max_div_v", rep.max_div_v, 1e-11));
        r.details["roundoff_floor"] = rep.roundoff_floor;
        r.details["e0"] = run.e0;
      } else {
        r.details[tag + "distance_to_reference"] = rep.distance_to_reference;
        r.details[tag + "contraction_ok"] = rep.contraction_ok;
      }
    }
  } catch (const NumericalFailure& e) {
    r.numerical_failure = true;
    r.failure = e.what();
  }
  return r;
}

}  // namespace scenario

using ScenarioFn = std::function<ScenarioResult(const ScenarioContext&)>;

inline const std::map<std::string, ScenarioFn>& scenario_registry() {
  static const std::map<std::string, ScenarioFn> reg = {
      {"decay_small_data", scenario::decay_small_data},
      {"formulation_equivalence", scenario::formulation_equivalence},
      {"constraint_audit", scenario::constraint_audit},
      {"picard_study", scenario::picard_study},
      {"mollifier_study", scenario::mollifier_study},
      {"stokes_verify", scenario::stokes_verify},
      {"lifespan_probe", scenario::lifespan_probe},
  };
  return reg;
}

/// Runs a named scenario and writes its verdict. Throws PreconditionError for unknown names.
inline ScenarioResult run_scenario(const std::string& name, const ScenarioContext& ctx) {
  const auto& reg = scenario_registry();
  const auto it = reg.find(name);
  if (it == reg.end()) throw PreconditionError("unknown scenario '" + name + "'");
  std::filesystem::create_directories(ctx.out_dir);
  auto result = it->second(ctx);
  write_verdict(result, ctx.out_dir);
  return result;
}

}  // namespace magel
