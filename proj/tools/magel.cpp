// Command-line front end: run a configured simulation, run a named scenario,
// or summarize a snapshot file.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "magel/harness/config.hpp"
#include "magel/harness/scenarios.hpp"
#include "magel/harness/snapshot.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

magel::SimulationConfig configure(const std::string& path, const Options& opt) {
  auto cfg = magel::load_config(path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  return cfg;
}

int cmd_run(const std::string& config_path, const Options& opt) {
  const auto cfg = configure(config_path, opt);
  const std::filesystem::path dir = cfg.output_dir;
  const auto sim = magel::run_simulation(cfg, dir, cfg.csv_name);

  nlohmann::ordered_json summary;
  summary["completed"] = sim.completed;
  summary["reached_time"] = sim.reached_time;
  summary["rows"] = sim.records.size();
  if (!sim.completed) {
    summary["failure"] = sim.failure;
    summary["failure_time"] = sim.failure_time;
  }
  std::ofstream(dir / "run.json") << summary.dump(2) << '\n';

  if (!opt.quiet) {
    std::printf("%s: reached t = %.6g (%zu diagnostic rows)\n", sim.completed ? "completed" : "stopped",
                sim.reached_time, sim.records.size());
    if (!sim.completed) std::printf("failure: %s\n", sim.failure.c_str());
  }
  return sim.completed ? kExitPass : kExitNumerical;
}

int cmd_scenario(const std::string& name, const std::string& config_path, const Options& opt) {
  if (!magel::scenario_registry().count(name)) {
    std::fprintf(stderr, "unknown scenario '%s'; available:", name.c_str());
    for (const auto& [key, fn] : magel::scenario_registry()) std::fprintf(stderr, " %s", key.c_str());
    std::fprintf(stderr, "\n");
    return kExitUsage;
  }
  const auto cfg = configure(config_path, opt);
  const magel::ScenarioContext ctx{cfg, cfg.output_dir, opt.quiet};
  const auto result = magel::run_scenario(name, ctx);
  if (!opt.quiet) {
    for (const auto& c : result.checks) {
      std::printf("%-4s %s = %.6g (%s %.6g)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value,
                  c.relation.c_str(), c.threshold);
    }
    if (result.numerical_failure) std::printf("numerical failure: %s\n", result.failure.c_str());
    std::printf("%s: %s\n", name.c_str(), result.passed() ? "pass" : "fail");
  }
  return result.exit_code() == 0 ? kExitPass
         : result.numerical_failure ? kExitNumerical
                                    : kExitCheckFailed;
}

int cmd_inspect(const std::string& path, const Options& opt) {
  const auto state = magel::load_snapshot(path);
  std::visit(
      [&](const auto& s) {
        using State = std::decay_t<decltype(s)>;
        const bool is_a = std::is_same_v<State, magel::StateA>;
        const auto& g = s.v.grid();
        const auto b = magel::constraint_bundle(s);
        if (opt.quiet) return;
        std::printf("formulation %s, dim %d, n %d, t %.17g\n", is_a ? "A" : "B", g.dim(), g.n(), s.t);
        std::printf("max|v|              %.6e\n", magel::max_abs(s.v));
        std::printf("|grad M|^2_L2       %.6e\n", magel::grad_sobolev_norm_sq(s.M, 0));
        std::printf("sphere_res          %.6e\n", b.sphere_res);
        std::printf("det_res             %.6e\n", b.det_res);
        std::printf("curl_res            %.6e\n", b.curl_res);
        std::printf("div_v_res           %.6e\n", b.div_v_res);
        std::printf("trg_vs_divpsi_res   %.6e\n", b.trg_vs_divpsi_res);
      },
      state);
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetoelastic flow simulator"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured random seed");
  app.add_option("--out-dir", opt.out_dir, "Override the configured output directory");
  app.add_flag("--quiet", opt.quiet, "Suppress progress output");

  std::string config_path, scenario_name, snapshot_path;
  auto* run = app.add_subcommand("run", "Integrate the configured system");
  run->add_option("config", config_path, "JSON configuration")->required();
  auto* scen = app.add_subcommand("scenario", "Run a named scenario and write its verdict");
  scen->add_option("name", scenario_name, "Scenario name")->required();
  scen->add_option("config", config_path, "JSON configuration")->required();
  auto* inspect = app.add_subcommand("inspect", "Summarize a snapshot file");
  inspect->add_option("snapshot", snapshot_path, "Snapshot path")->required();
  for (auto* sub : {run, scen, inspect}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }
  if (*seed_opt) opt.seed = seed;

  try {
    if (*run) return cmd_run(config_path, opt);
    if (*scen) return cmd_scenario(scenario_name, config_path, opt);
    return cmd_inspect(snapshot_path, opt);
  } catch (const magel::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const magel::PreconditionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const magel::Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}
