// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "magel/harness/config.hpp"
#include "magel/harness/scenarios.hpp"
#include "magel/magel.hpp"

using namespace magel;
namespace fs = std::filesystem;
using oracle::field;

namespace {

/// Running record of the measured quantities behind one criterion.
struct Verdict {
  bool ok = true;
  std::ostringstream notes;

  void at_most(const std::string& name, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    notes << ' ' << name << '=' << format_double(value) << (pass ? "<=" : ">") << limit;
  }
  void at_least(const std::string& name, double value, double limit) {
    const bool pass = value >= limit;
    ok = ok && pass;
    notes << ' ' << name << '=' << format_double(value) << (pass ? ">=" : "<") << limit;
  }
  void require(const std::string& name, bool pass) {
    ok = ok && pass;
    notes << ' ' << name << '=' << (pass ? "yes" : "no");
  }
  void scenario(const ScenarioResult& r) {
    if (r.numerical_failure) require(r.scenario + "_numerics[" + r.failure + "]", false);
    for (const auto& c : r.checks) {
      const bool pass = c.passed;
      ok = ok && pass;
      notes << ' ' << c.name << '=' << format_double(c.value) << (pass ? "" : "!") << c.relation << c.threshold;
    }
  }
};

fs::path work_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "magel_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SimulationConfig preset(const std::string& name) {
  return load_config(std::string(MAGEL_CONFIG_DIR) + "/" + name + ".json");
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---- criteria ---------------------------------------------------------------

void spectral_exactness(Verdict& v) {
  const auto g = TorusGrid::create(2, 64);
  const int n = g->n();
  const auto sx = field(g, [](double x, double, double) { return std::sin(x); });
  const auto cx = field(g, [](double x, double, double) { return std::cos(x); });
  const auto sy = field(g, [](double, double y, double) { return std::sin(y); });
  double err = 0.0;
  auto track = [&err](double e) { err = std::max(err, e); };

  const int m10[2] = {1, 0};
  const int m11[2] = {1, 1};
  track(oracle::max_diff(derivative(sx, m10), cx));
  track(oracle::max_diff(derivative(sx * sy, m11),
                         field(g, [](double x, double y, double) { return std::cos(x) * std::cos(y); })));
  track(max_abs(derivative(ScalarField::constant(g, 3.0), m11)));
  track(oracle::max_diff(laplacian(sx), sx * -1.0));
  track(oracle::max_diff(inverse_laplacian_zero_mean(sx * -1.0), sx));
  bool rejects_mean = false;
  try {
    (void)inverse_laplacian_zero_mean(ScalarField::constant(g, 1.0));
  } catch (const PreconditionError&) {
    rejects_mean = true;
  }
  v.require("inverse_laplacian_rejects_mean", rejects_mean);

  track(max_abs(leray_project(oracle::vec({sx * -1.0, oracle::zero(g)}))));
  track(oracle::max_diff(leray_project(oracle::vec({sy, oracle::zero(g)})), oracle::vec({sy, oracle::zero(g)})));
  track(max_abs(leray_project(oracle::vec({sx, oracle::zero(g)}))));
  std::mt19937_64 rng(2024);
  const auto u = oracle::random_vector(g, 2, rng, 12);
  const auto pu = leray_project(u);
  track(max_abs(divergence(pu)));
  track(oracle::max_diff(leray_project(pu), pu));

  const auto s3 = field(g, [](double x, double, double) { return std::sin(3 * x); });
  track(max_abs(truncate(s3, 2.0)));
  track(oracle::max_diff(truncate(sx + s3, 2.0), sx));
  const auto f = oracle::random_smooth(g, rng, 20);
  auto once = to_spectral(f);
  const auto mask = [&](std::size_t k) { return g->wavenumber_sq(k) > 6.5 * 6.5 ? 0.0 : 1.0; };
  apply_multiplier(once, mask);
  auto twice = once;
  apply_multiplier(twice, mask);
  v.require("truncate_idempotent_coefficients", once.coeffs == twice.coeffs);
  track(oracle::max_diff(truncate(truncate(f, 6.5), 6.5), truncate(f, 6.5)));

  const auto band = field(g, [](double x, double y, double) { return std::sin(21 * x) * std::cos(5 * y); });
  track(oracle::max_diff(dealias(band), band));
  track(max_abs(dealias(field(g, [n](double x, double, double) { return std::sin((n / 2 - 1) * x); }))));
  const auto s10 = field(g, [](double x, double, double) { return std::sin(10 * x); });
  track(oracle::max_diff(dealias(s10 * s10), field(g, [](double x, double, double) { return 0.5 * (1 - std::cos(20 * x)); })));
  v.at_most("max_example_error", err, 1e-11);

  double parseval = 0.0, round_trip = 0.0;
  for (int d : {2, 3}) {
    const auto gd = TorusGrid::create(d, d == 2 ? 64 : 16);
    ScalarField r(gd);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (std::size_t p = 0; p < r.size(); ++p) r[p] = dist(rng);
    double grid_sum = 0.0;
    for (double x : r.values()) grid_sum += x * x;
    grid_sum *= gd->cell_volume();
    const auto s = to_spectral(r);
    double mode_sum = 0.0;
    for (std::size_t k = 0; k < gd->modes(); ++k) mode_sum += gd->mode_weight(k) * std::norm(s.coeffs[k]);
    mode_sum *= gd->volume();
    parseval = std::max(parseval, std::abs(grid_sum / mode_sum - 1.0));
    round_trip = std::max(round_trip, oracle::max_diff(to_physical(s), r) / max_abs(r));
  }
  v.at_most("parseval_rel", parseval, 1e-12);
  v.at_most("round_trip_rel", round_trip, 1e-13);
}

void steady_states(Verdict& v) {
  const auto g = TorusGrid::create(2, 64);
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  const PhysParams p;
  double drift = 0.0;
  for (const auto& M : {oracle::unit_z(g), oracle::harmonic_m(g)}) {
    const auto a0 = oracle::steady_a(g, M);
    const auto b0 = oracle::steady_b(g, M);
    auto a = a0;
    auto b = b0;
    for (long k = 0; k < 1000; ++k) {
      a = step(a, p, cfg, Numerics{}, k);
      b = step(b, p, cfg, Numerics{}, k);
    }
    drift = std::max({drift, oracle::state_diff(a, a0), oracle::state_diff(b, b0)});
  }
  v.at_most("max_drift", drift, 1e-8);
}

void constraint_propagation(Verdict& sphere, Verdict& det) {
  const auto cfg = preset("constraint_audit");
  const auto sim = run_simulation(cfg, work_dir("constraint_audit"), cfg.csv_name);
  for (auto* v : {&sphere, &det}) v->require("completed", sim.completed && !cfg.integrator.renormalize_M);
  sphere.at_most("sphere_res_max", max_of(column(sim.records, &DiagnosticRecord::sphere_res)), 1e-7);
  det.at_most("det_res_max", max_of(column(sim.records, &DiagnosticRecord::det_res)), 1e-6);
  det.at_most("div_v_res_max", max_of(column(sim.records, &DiagnosticRecord::div_v_res)), 1e-10);
}

void basic_energy_dissipation(Verdict& v) {
  auto cfg = preset("constraint_audit");
  cfg.dealias = false;
  cfg.integrator.t_end = 0.3;
  cfg.integrator.diag_every = 1;
  const auto sim = run_simulation(cfg, work_dir("basic_energy"), cfg.csv_name);
  v.require("completed", sim.completed);
  v.at_least("rows", static_cast<double>(sim.records.size()), 301);
  v.at_most("max_step_increase", max_relative_increase(column(sim.records, &DiagnosticRecord::e_basic)), 1e-9);
}

void global_decay(Verdict& v) {
  const auto cfg = preset("decay_small_data");
  v.require("setup_B_s3_auto_t2", cfg.formulation == "B" && cfg.sobolev_s == 3 && !cfg.delta &&
                                     cfg.integrator.t_end == 2.0 && cfg.integrator.diag_every == 1);
  v.scenario(run_scenario("decay_small_data", ScenarioContext{cfg, work_dir("decay"), true}));
}

void formulation_equivalence(Verdict& v) {
  const auto cfg = preset("formulation_equivalence");
  v.require("t_end_0.5", cfg.integrator.t_end == 0.5);
  v.scenario(run_scenario("formulation_equivalence", ScenarioContext{cfg, work_dir("equivalence"), true}));
}

void key_structure(Verdict& v) {
  double ratio[2] = {0.0, 0.0};
  double curl = 0.0, trg = 0.0;
  int i = 0;
  for (int n : {32, 64}) {
    auto cfg = preset("constraint_audit");
    cfg.formulation = "B";
    cfg.n = n;
    cfg.integrator.t_end = 0.2;
    const auto sim = run_simulation(cfg, work_dir("key_structure_" + std::to_string(n)), cfg.csv_name);
    v.require("completed_n" + std::to_string(n), sim.completed);
    curl = std::max(curl, max_of(column(sim.records, &DiagnosticRecord::curl_res)));
    trg = std::max(trg, max_of(column(sim.records, &DiagnosticRecord::trg_vs_divpsi_res)));
    ratio[i++] = max_of(column(sim.records, &DiagnosticRecord::trg_ratio));
  }
  v.at_most("curl_res_max", curl, 1e-11);
  v.at_most("trg_vs_divpsi_res_max", trg, 1e-13);
  v.require("ratio_positive", ratio[0] > 0.0 && ratio[1] > 0.0);
  v.at_most("ratio_spread_n32_n64", std::max(ratio[0], ratio[1]) / std::min(ratio[0], ratio[1]), 2.0);
}

void generalized_stokes(Verdict& v) {
  const auto cfg = preset("stokes_verify");
  v.require("trials_100", cfg.stokes_trials == 100);
  v.scenario(run_scenario("stokes_verify", ScenarioContext{cfg, work_dir("stokes"), true}));
}

void mollifier_scheme(Verdict& v) {
  const auto cfg = preset("mollifier_study");
  v.require("horizon_0.2", cfg.integrator.t_end == 0.2);
  v.scenario(run_scenario("mollifier_study", ScenarioContext{cfg, work_dir("mollifier"), true}));
}

void picard_iteration(Verdict& v) {
  const auto cfg = preset("picard_study");
  v.require("amplitude_1e-2_T_0.1", cfg.initial.amplitude == 1e-2 && cfg.integrator.t_end == 0.1);
  v.scenario(run_scenario("picard_study", ScenarioContext{cfg, work_dir("picard"), true}));
}

template <class State>
State advance(State s, double dt, long steps) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.t_end = dt * static_cast<double>(steps);
  for (long k = 0; k < steps; ++k) s = step(s, PhysParams{}, cfg, Numerics{}, k);
  return s;
}

template <class State>
double self_convergence_order(const State& s0) {
  const double dt = 0.01, T = 0.1;
  const auto coarse = advance(s0, 2 * dt, std::lround(T / (2 * dt)));
  const auto fine = advance(s0, dt, std::lround(T / dt));
  const auto ref = advance(s0, dt / 8, std::lround(8 * T / dt));
  return std::log2(oracle::state_diff(coarse, ref) / oracle::state_diff(fine, ref));
}

void temporal_order(Verdict& v) {
  const auto g = TorusGrid::create(2, 32);
  InitialDataSpec spec;
  spec.variant = InitialDataSpec::Variant::random_small;
  spec.amplitude = 0.05;
  const auto b = generate_state_b(spec, g, 7);
  v.at_least("order_A", self_convergence_order(to_state_a(b)), 1.9);
  v.at_least("order_B", self_convergence_order(b), 1.9);
}

void reproducibility(Verdict& v) {
  auto cfg = preset("constraint_audit");
  cfg.integrator.t_end = 0.05;
  cfg.integrator.diag_every = 1;
  const auto d1 = work_dir("repro_1");
  const auto d2 = work_dir("repro_2");
  run_simulation(cfg, d1, cfg.csv_name);
  run_simulation(cfg, d2, cfg.csv_name);
  const auto a = slurp(d1 / cfg.csv_name);
  v.require("simulation_csv_identical", !a.empty() && a == slurp(d2 / cfg.csv_name));

  auto stokes = preset("stokes_verify");
  stokes.stokes_trials = 10;
  run_scenario("stokes_verify", ScenarioContext{stokes, d1, true});
  run_scenario("stokes_verify", ScenarioContext{stokes, d2, true});
  const auto s = slurp(d1 / stokes.csv_name);
  v.require("stokes_csv_identical", !s.empty() && s == slurp(d2 / stokes.csv_name));
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<void(Verdict&)> run;
  };
  Verdict sphere, det;
  bool audit_done = false;
  auto audit = [&] {
    if (!audit_done) constraint_propagation(sphere, det);
    audit_done = true;
  };
  const std::vector<Criterion> criteria = {
      {"01 spectral exactness", spectral_exactness},
      {"02 exact steady states", steady_states},
      {"03 unit-length propagation", [&](Verdict& v) { audit(); v.ok = sphere.ok; v.notes << sphere.notes.str(); }},
      {"04 determinant propagation", [&](Verdict& v) { audit(); v.ok = det.ok; v.notes << det.notes.str(); }},
      {"05 basic energy dissipation", basic_energy_dissipation},
      {"06 global decay", global_decay},
      {"07 formulation equivalence", formulation_equivalence},
      {"08 curl-free and trace identities", key_structure},
      {"09 generalized Stokes", generalized_stokes},
      {"10 mollifier scheme", mollifier_scheme},
      {"11 Picard iteration", picard_iteration},
      {"12 temporal order", temporal_order},
      {"13 reproducibility", reproducibility},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.ok = false;
      v.notes << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %-36s (%.1f s)%s\n", v.ok ? "PASS" : "FAIL", c.name, secs, v.notes.str().c_str());
    std::fflush(stdout);
    failures += v.ok ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
