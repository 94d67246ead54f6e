#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "magel/dynamics.hpp"
#include "magel/energetics.hpp"
#include "magel/errors.hpp"
#include "magel/fields.hpp"
#include "magel/harness/initial_data.hpp"
#include "magel/timestepper.hpp"

namespace magel {

/// Everything one run or scenario needs. Parsed from a flat JSON object.
struct SimulationConfig {
  int dim = 2;
  int n = 64;
  PhysParams physics;
  IntegratorConfig integrator;
  /// "A" (v, F, M) or "B" (v, psi, M).
  std::string formulation = "A";
  InitialDataSpec initial;

  int sobolev_s = 2;
  /// Fixed weight of the global functional; empty means "auto".
  std::optional<double> delta;
  double c0_hat = 1.0;
  bool dealias = true;

  std::string output_dir = "out";
  std::string csv_name = "diagnostics.csv";
  std::uint64_t seed = 0;

  // Scenario parameters.
  std::vector<double> cutoffs{4.0, 8.0, 16.0};
  int picard_iterations = 8;
  bool picard_transported_f = false;
  int stokes_trials = 100;

  Numerics numerics() const { return Numerics{dealias}; }

  /// delta, or delta_default(nu, c0_hat, K_s) with s at least 2.
  double resolved_delta() const {
    if (delta) return *delta;
    return delta_default(physics.nu, c0_hat, multiindex_count(dim, std::max(2, sobolev_s)));
  }

  DiagnosticSettings diagnostics() const {
    return DiagnosticSettings{sobolev_s, resolved_delta(), numerics()};
  }

  GridPtr make_grid() const { return TorusGrid::create(dim, n); }
};

namespace detail {

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      "dim", "n", "nu", "kappa", "h_ext_kind", "h_ext_amplitude", "h_ext_wavevector",
      "h_ext_omega", "dt", "t_end", "scheme", "renormalize_M", "cfl_guard", "snapshot_every",
      "diag_every", "formulation", "initial_data", "amplitude", "kmax", "snapshot_path",
      "sobolev_s", "delta", "c0_hat", "dealias", "output_dir", "csv_name", "seed", "cutoffs",
      "picard_iterations", "picard_transported_f", "stokes_trials"};
  return keys;
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("config: key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses and validates a configuration; unknown keys are rejected.
inline SimulationConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!detail::config_keys().count(key)) throw FormatError("config: unknown key '" + key + "'");
  }

  SimulationConfig c;
  using detail::read_key;
  read_key(j, "dim", c.dim);
  read_key(j, "n", c.n);
  read_key(j, "nu", c.physics.nu);
  read_key(j, "kappa", c.physics.kappa);

  std::string kind = "zero";
  read_key(j, "h_ext_kind", kind);
  if (kind == "zero") {
    c.physics.h_ext.kind = ExternalField::Kind::zero;
  } else if (kind == "uniform") {
    c.physics.h_ext.kind = ExternalField::Kind::uniform;
  } else if (kind == "single_mode") {
    c.physics.h_ext.kind = ExternalField::Kind::single_mode;
  } else {
    throw FormatError("config: h_ext_kind must be zero, uniform or single_mode");
  }
  read_key(j, "h_ext_amplitude", c.physics.h_ext.amplitude);
  read_key(j, "h_ext_wavevector", c.physics.h_ext.wavevector);
  read_key(j, "h_ext_omega", c.physics.h_ext.omega);

  read_key(j, "dt", c.integrator.dt);
  read_key(j, "t_end", c.integrator.t_end);
  read_key(j, "scheme", c.integrator.scheme);
  read_key(j, "renormalize_M", c.integrator.renormalize_M);
  read_key(j, "cfl_guard", c.integrator.cfl_guard);
  read_key(j, "snapshot_every", c.integrator.snapshot_every);
  read_key(j, "diag_every", c.integrator.diag_every);

  read_key(j, "formulation", c.formulation);
  std::string variant = "zero_steady";
  read_key(j, "initial_data", variant);
  c.initial.variant = InitialDataSpec::parse_variant(variant);
  read_key(j, "amplitude", c.initial.amplitude);
  read_key(j, "kmax", c.initial.kmax);
  read_key(j, "snapshot_path", c.initial.snapshot_path);

  read_key(j, "sobolev_s", c.sobolev_s);
  if (j.contains("delta")) {
    const auto& d = j.at("delta");
    if (d.is_string() && d.get<std::string>() == "auto") {
      c.delta.reset();
    } else if (d.is_number()) {
      c.delta = d.get<double>();
    } else {
      throw FormatError("config: delta must be a number or \"auto\"");
    }
  }
  read_key(j, "c0_hat", c.c0_hat);
  read_key(j, "dealias", c.dealias);
  read_key(j, "output_dir", c.output_dir);
  read_key(j, "csv_name", c.csv_name);
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw FormatError("config: seed must be a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  read_key(j, "cutoffs", c.cutoffs);
  read_key(j, "picard_iterations", c.picard_iterations);
  read_key(j, "picard_transported_f", c.picard_transported_f);
  read_key(j, "stokes_trials", c.stokes_trials);

  // Validation of every precondition the config feeds.
  try {
    (void)c.make_grid();
    c.physics.validate();
    c.integrator.validate();
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (c.integrator.cfl_guard > 1.0) throw FormatError("config: cfl_guard must lie in (0, 1]");
  if (c.formulation != "A" && c.formulation != "B") throw FormatError("config: formulation must be A or B");
  if (c.formulation == "B" && !c.physics.h_ext.is_zero()) {
    throw FormatError("config: formulation B requires a zero external field");
  }
  if (c.sobolev_s < 0 || c.sobolev_s > kMaxSobolevOrder) throw FormatError("config: sobolev_s out of range");
  if (c.delta && !(*c.delta > 0.0)) throw FormatError("config: delta must be positive");
  if (!(c.c0_hat > 0.0)) throw FormatError("config: c0_hat must be positive");
  if (!(c.initial.amplitude >= 0.0)) throw FormatError("config: amplitude must be non-negative");
  if (c.initial.kmax < 1 || 3 * c.initial.kmax > c.n) throw FormatError("config: kmax must lie in [1, n/3]");
  if (c.initial.variant == InitialDataSpec::Variant::from_snapshot && c.initial.snapshot_path.empty()) {
    throw FormatError("config: from_snapshot needs snapshot_path");
  }
  // Defaults are only checked where they are used, by the mollifier solver.
  for (std::size_t i = 0; j.contains("cutoffs") && i < c.cutoffs.size(); ++i) {
    if (!(c.cutoffs[i] > 0.0) || 3.0 * c.cutoffs[i] > c.n) throw FormatError("config: cutoffs must lie in (0, n/3]");
    if (i > 0 && !(c.cutoffs[i] > c.cutoffs[i - 1])) throw FormatError("config: cutoffs must increase");
  }
  if (c.picard_iterations < 1) throw FormatError("config: picard_iterations must be >= 1");
  if (c.stokes_trials < 1) throw FormatError("config: stokes_trials must be >= 1");
  if (c.csv_name.empty() || c.csv_name.find('/') != std::string::npos) {
    throw FormatError("config: csv_name must be a plain file name");
  }
  return c;
}

inline SimulationConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline SimulationConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

}  // namespace magel
