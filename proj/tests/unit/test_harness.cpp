#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <cstring>
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "magel/harness/config.hpp"
#include "magel/harness/initial_data.hpp"
#include "magel/harness/scenarios.hpp"
#include "magel/harness/snapshot.hpp"

using namespace magel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(testing::TempDir()) / ("magel_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

InitialDataSpec spec(InitialDataSpec::Variant v, double amp = 1e-2) {
  InitialDataSpec s;
  s.variant = v;
  s.amplitude = amp;
  return s;
}

}  // namespace

// ---- configuration ---------------------------------------------------------

TEST(Config, Defaults) {
  const auto c = parse_config_text("{}");
  EXPECT_EQ(c.dim, 2);
  EXPECT_EQ(c.n, 64);
  EXPECT_EQ(c.formulation, "A");
  EXPECT_EQ(c.physics.nu, 1.0);
  EXPECT_FALSE(c.delta.has_value());
  EXPECT_DOUBLE_EQ(c.resolved_delta(), 1.0 / 576.0);
}

TEST(Config, ParsesEveryField) {
  const auto c = parse_config_text(R"({
    "dim": 3, "n": 16, "nu": 0.5, "kappa": 0.1, "h_ext_kind": "single_mode",
    "h_ext_amplitude": [0, 0, 0.2], "h_ext_wavevector": [1, 0, 0], "h_ext_omega": 2.0,
    "dt": 0.002, "t_end": 0.5, "renormalize_M": true, "cfl_guard": 0.4, "snapshot_every": 10,
    "diag_every": 5, "formulation": "A", "initial_data": "flow_map_F", "amplitude": 0.05,
    "kmax": 2, "sobolev_s": 3, "delta": 0.01, "c0_hat": 2.0, "dealias": false,
    "output_dir": "x", "csv_name": "d.csv", "seed": 99, "cutoffs": [1, 2, 4],
    "picard_iterations": 3, "picard_transported_f": true, "stokes_trials": 7})");
  EXPECT_EQ(c.dim, 3);
  EXPECT_EQ(c.physics.h_ext.kind, ExternalField::Kind::single_mode);
  EXPECT_EQ(c.physics.h_ext.amplitude[2], 0.2);
  EXPECT_EQ(c.integrator.snapshot_every, 10);
  EXPECT_EQ(c.initial.variant, InitialDataSpec::Variant::flow_map_F);
  EXPECT_EQ(c.resolved_delta(), 0.01);
  EXPECT_FALSE(c.numerics().dealias);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.cutoffs.size(), 3u);
  EXPECT_TRUE(c.picard_transported_f);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config_text(R"({"resolution": 64})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"n": "64"})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"n": 63})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"dim": 4})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"formulation": "C"})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"formulation": "B", "h_ext_kind": "uniform", "h_ext_amplitude": [1, 0, 0]})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"delta": "sometimes"})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"seed": -1})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"cutoffs": [8, 4]})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"initial_data": "lumpy"})"), FormatError);
  EXPECT_THROW(parse_config_text(R"({"initial_data": "from_snapshot"})"), FormatError);
  EXPECT_THROW(parse_config_text("{not json"), FormatError);
  EXPECT_THROW(parse_config_text("[1, 2]"), FormatError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), FormatError);
}

// ---- initial data ----------------------------------------------------------

TEST(InitialData, UniformSourceIsPortable) {
  UniformSource a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_GE(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(InitialData, TrigFieldIsSolenoidalAndNormalized) {
  UniformSource rng(3);
  auto f = TrigVectorField::random(2, 2, 3, rng, true);
  f.normalize_to(0.25);
  EXPECT_NEAR(f.sup_bound(), 0.25, 1e-15);
  const auto g = TorusGrid::create(2, 32);
  const auto v = f.sample(g);
  EXPECT_LE(max_abs(divergence(v)), 1e-13);
  EXPECT_LE(max_abs(v), 0.25 + 1e-15);
  // Analytic Jacobian against the spectral one.
  const auto J = jacobian(v);
  std::vector<double> jac(4);
  const double x[2] = {g->coordinate(77, 0), g->coordinate(77, 1)};
  f.jacobian(x, jac);
  for (int e = 0; e < 4; ++e) EXPECT_NEAR(jac[static_cast<std::size_t>(e)], J.components()[static_cast<std::size_t>(e)][77], 1e-13);
}

TEST(InitialData, VariantsHaveTheirStructure) {
  const auto g = TorusGrid::create(2, 32);
  using V = InitialDataSpec::Variant;
  const auto z = generate_state_a(spec(V::zero_steady), g, 0);
  EXPECT_EQ(max_abs(z.v), 0.0);
  EXPECT_EQ(sphere_residual(z.M), 0.0);
  const auto h = generate_state_a(spec(V::harmonic_map), g, 0);
  EXPECT_LE(oracle::max_diff(h.M, oracle::harmonic_m(g)), 1e-15);

  const auto shear = generate_state_b(spec(V::shear_F, 0.2), g, 0);
  EXPECT_LE(oracle::max_diff(shear.psi[0], oracle::field(g, [](double, double y, double) { return 0.2 * std::cos(y); })), 1e-15);

  for (auto v : {V::random_small, V::flow_map_F}) {
    const auto a = generate_state_a(spec(v, 0.05), g, 7);
    const auto c = constraint_bundle(a);
    EXPECT_LE(c.sphere_res, 1e-14) << InitialDataSpec::variant_name(v);
    EXPECT_LE(c.div_v_res, 1e-13);
    EXPECT_LE(c.det_res, 1e-8);
    EXPECT_LE(max_abs(a.v), 0.05 + 1e-12);
  }
  const auto b = generate_state_b(spec(V::random_small, 0.05), g, 7);
  EXPECT_LE(constraint_bundle(b).curl_res, 1e-11);
  EXPECT_THROW(generate_state_b(spec(V::from_snapshot), g, 0), PreconditionError);
}

TEST(InitialData, FlowMapHasUnitDeterminant) {
  const auto g = TorusGrid::create(2, 32);
  const auto r = RandomFields::draw(2, 3, 0.05, 5);
  const auto F = flow_map_deformation(r.flow, g);
  EXPECT_LE(max_abs(det_field(F) - ScalarField::constant(g, 1.0)), 1e-10);
  // Curl-free potential: I + grad psi has unit determinant up to the integration error.
  const auto G = MatrixField::identity(g, 2) + grad_potential(flow_potential(r.flow, g));
  EXPECT_LE(max_abs(det_field(G) - ScalarField::constant(g, 1.0)), 1e-8);
}

TEST(InitialData, SeedDeterminesData) {
  const auto g = TorusGrid::create(2, 16);
  const auto s = spec(InitialDataSpec::Variant::random_small);
  EXPECT_EQ(oracle::state_diff(generate_state_b(s, g, 1), generate_state_b(s, g, 1)), 0.0);
  EXPECT_GT(oracle::state_diff(generate_state_b(s, g, 1), generate_state_b(s, g, 2)), 0.0);
}

TEST(InitialData, GridIndependentAmplitude) {
  const auto r = RandomFields::draw(2, 3, 0.01, 9);
  const auto coarse = r.velocity.sample(TorusGrid::create(2, 16));
  const auto fine = r.velocity.sample(TorusGrid::create(2, 32));
  // Coarse points are every other fine point.
  EXPECT_EQ(coarse[0][16 + 1], fine[0][2 * 32 + 2]);
}

// ---- snapshots -------------------------------------------------------------

TEST(Snapshot, RoundTripBothFormulations) {
  const auto g = TorusGrid::create(2, 16);
  auto b = oracle::small_state_b(g, 0.1, 1);
  b.t = 0.125;
  const auto a = to_state_a(b);
  const auto back_b = std::get<StateB>(parse_snapshot(snapshot_bytes(b)));
  EXPECT_EQ(oracle::state_diff(back_b, b), 0.0);
  EXPECT_EQ(back_b.t, 0.125);
  const auto back_a = std::get<StateA>(parse_snapshot(snapshot_bytes(a)));
  EXPECT_EQ(oracle::state_diff(back_a, a), 0.0);

  const auto dir = scratch("snapshot");
  write_snapshot(a, (dir / "s.bin").string());
  EXPECT_EQ(oracle::state_diff(std::get<StateA>(load_snapshot((dir / "s.bin").string())), a), 0.0);
}

TEST(Snapshot, RoundTripThreeDimensional) {
  const auto g = TorusGrid::create(3, 8);
  const auto b = oracle::small_state_b(g, 0.1, 2);
  EXPECT_EQ(oracle::state_diff(std::get<StateB>(parse_snapshot(snapshot_bytes(b))), b), 0.0);
}

TEST(Snapshot, TruncationNamesTheField) {
  const auto g = TorusGrid::create(2, 16);
  const auto bytes = snapshot_bytes(oracle::steady_a(g, oracle::unit_z(g)));
  // Header + v (2 x 256 doubles) + half of F.
  const auto header = bytes.find('\n') + 1;
  const auto cut = bytes.substr(0, header + 8 * (2 * 256 + 2 * 256));
  try {
    parse_snapshot(cut);
    FAIL() << "truncated snapshot accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("'F'"), std::string::npos) << e.what();
  }
}

TEST(Snapshot, RejectsMalformedFiles) {
  const auto g = TorusGrid::create(2, 16);
  const auto bytes = snapshot_bytes(oracle::steady_a(g, oracle::unit_z(g)));
  const auto nl = bytes.find('\n');
  auto header = nlohmann::json::parse(bytes.substr(0, nl));
  const auto payload = bytes.substr(nl);

  auto with = [&](nlohmann::json h) { return h.dump() + payload; };
  auto dim4 = header;
  dim4["dim"] = 4;
  EXPECT_THROW(parse_snapshot(with(dim4)), FormatError);
  auto version = header;
  version["format_version"] = 2;
  EXPECT_THROW(parse_snapshot(with(version)), FormatError);
  auto badn = header;
  badn["n"] = 15;
  EXPECT_THROW(parse_snapshot(with(badn)), FormatError);
  EXPECT_THROW(parse_snapshot(bytes + "x"), FormatError);
  EXPECT_THROW(parse_snapshot("no newline"), FormatError);
  EXPECT_THROW(parse_snapshot("{oops\n"), FormatError);
  EXPECT_THROW(load_snapshot("/nonexistent/snap.bin"), FormatError);

  auto nan = bytes;
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan.data() + nl + 1 + 8 * 5, &q, 8);
  try {
    parse_snapshot(nan);
    FAIL() << "NaN accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("NaN"), std::string::npos);
  }
}

// ---- simulations and scenarios -----------------------------------------------

TEST(Simulation, CsvIsByteIdenticalAcrossRuns) {
  auto cfg = parse_config_text(R"({"n": 16, "formulation": "B", "initial_data": "random_small",
                                   "t_end": 0.02, "seed": 5})");
  const auto d1 = scratch("sim1");
  const auto d2 = scratch("sim2");
  const auto r1 = run_simulation(cfg, d1, "diag.csv");
  const auto r2 = run_simulation(cfg, d2, "diag.csv");
  EXPECT_TRUE(r1.completed);
  EXPECT_EQ(r1.records.size(), 21u);
  const auto a = slurp(d1 / "diag.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(d2 / "diag.csv"));
  EXPECT_EQ(a.substr(0, a.find('\n')), DiagnosticRecord::csv_header());
}

TEST(Simulation, SnapshotsRestart) {
  auto cfg = parse_config_text(R"({"n": 16, "initial_data": "random_small", "t_end": 0.01,
                                   "snapshot_every": 10, "seed": 3})");
  const auto dir = scratch("restart");
  const auto out = run_simulation(cfg, dir, "d.csv");
  ASSERT_TRUE(fs::exists(dir / "snapshot_000010.bin"));
  auto restart = cfg;
  restart.initial.variant = InitialDataSpec::Variant::from_snapshot;
  restart.initial.snapshot_path = (dir / "snapshot_000010.bin").string();
  const auto loaded = std::get<StateA>(initial_state(restart));
  EXPECT_EQ(oracle::state_diff(loaded, std::get<StateA>(out.final_state)), 0.0);
  EXPECT_NEAR(loaded.t, 0.01, 1e-15);
}

TEST(Simulation, SnapshotIsConvertedAndGridChecked) {
  auto cfg = parse_config_text(R"({"n": 16, "t_end": 0.0, "snapshot_every": 1})");
  const auto dir = scratch("convert");
  const auto out = run_simulation(cfg, dir, "d.csv");
  cfg.formulation = "B";
  cfg.initial.variant = InitialDataSpec::Variant::from_snapshot;
  cfg.initial.snapshot_path = (dir / "snapshot_000000.bin").string();
  const auto b = std::get<StateB>(initial_state(cfg));
  EXPECT_LE(oracle::state_diff(to_state_a(b), std::get<StateA>(out.final_state)), 1e-12);
  cfg.n = 32;
  EXPECT_THROW(initial_state(cfg), FormatError);
}

TEST(Scenarios, RegistryAndUnknownNames) {
  const auto& reg = scenario_registry();
  for (const char* name : {"decay_small_data", "formulation_equivalence", "constraint_audit", "picard_study",
                           "mollifier_study", "stokes_verify", "lifespan_probe"}) {
    EXPECT_EQ(reg.count(name), 1u) << name;
  }
  const ScenarioContext ctx{parse_config_text("{}"), scratch("unknown"), true};
  EXPECT_THROW(run_scenario("nope", ctx), PreconditionError);
}

TEST(Scenarios, StokesVerifyWritesVerdict) {
  auto cfg = parse_config_text(R"({"n": 32, "stokes_trials": 10, "kmax": 5, "seed": 11})");
  const auto dir = scratch("stokes");
  const auto r = run_scenario("stokes_verify", ScenarioContext{cfg, dir, true});
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.exit_code(), 0);
  const auto verdict = nlohmann::json::parse(slurp(dir / "verdict.json"));
  EXPECT_EQ(verdict["scenario"], "stokes_verify");
  EXPECT_TRUE(verdict["passed"].get<bool>());
}

TEST(Scenarios, LifespanProbeReportsInsteadOfCrashing) {
  auto cfg = parse_config_text(R"({"n": 16, "nu": 0.01, "initial_data": "random_small", "amplitude": 2.0,
                                   "dt": 0.05, "t_end": 5.0, "cfl_guard": 0.5, "seed": 3})");
  const auto r = run_scenario("lifespan_probe", ScenarioContext{cfg, scratch("lifespan"), true});
  EXPECT_FALSE(r.details["completed"].get<bool>());
  EXPECT_FALSE(r.details["blow_up"].get<std::string>().empty());
  EXPECT_TRUE(r.details.contains("reached_time"));
}

TEST(Verdicts, ChecksAndExitCodes) {
  ScenarioResult r("x");
  r.checks.push_back(Check::at_most("a", 1.0, 2.0));
  EXPECT_EQ(r.exit_code(), 0);
  r.checks.push_back(Check::at_least("b", 1.0, 2.0));
  EXPECT_EQ(r.exit_code(), 1);
  r.numerical_failure = true;
  EXPECT_EQ(r.exit_code(), 3);
  EXPECT_NEAR(max_relative_increase({1.0, 0.5, 0.55}), 0.1, 1e-15);
  EXPECT_EQ(max_relative_increase({3.0}), 0.0);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
