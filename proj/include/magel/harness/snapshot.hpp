#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "magel/errors.hpp"
#include "magel/field.hpp"
#include "magel/fields.hpp"

namespace magel {

/**
 * Snapshot file layout:
 *
 *   {"format_version":1,"dim":..,"n":..,"t":..,"formulation":"A"|"B",
 *    "fields":[{"name":..,"components":..,"dtype":"f64-le","count":..}, ...]}\n
 *   <raw little-endian doubles, fields in header order, components in order,
 *    each component row-major over the grid>
 */
inline constexpr int kSnapshotVersion = 1;

using AnyState = std::variant<StateA, StateB>;

namespace detail {

struct NamedField {
  std::string name;
  const std::vector<ScalarField>* comps;
};

inline std::vector<NamedField> snapshot_fields(const AnyState& s) {
  if (const auto* a = std::get_if<StateA>(&s)) {
    return {{"v", &a->v.components()}, {"F", &a->F.components()}, {"M", &a->M.components()}};
  }
  const auto& b = std::get<StateB>(s);
  return {{"v", &b.v.components()}, {"psi", &b.psi.components()}, {"M", &b.M.components()}};
}

inline void put_le(std::string& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

inline double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string snapshot_bytes(const AnyState& s) {
  const auto& grid = std::visit([](const auto& st) -> const TorusGrid& { return st.v.grid(); }, s);
  const double t = std::visit([](const auto& st) { return st.t; }, s);
  const auto fields = detail::snapshot_fields(s);

  nlohmann::ordered_json header;
  header["format_version"] = kSnapshotVersion;
  header["dim"] = grid.dim();
  header["n"] = grid.n();
  header["t"] = t;
  header["formulation"] = std::holds_alternative<StateA>(s) ? "A" : "B";
  header["fields"] = nlohmann::ordered_json::array();
  for (const auto& f : fields) {
    header["fields"].push_back({{"name", f.name},
                                {"components", f.comps->size()},
                                {"dtype", "f64-le"},
                                {"count", f.comps->size() * grid.points()}});
  }

  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& f : fields) {
    for (const auto& c : *f.comps) {
      for (double x : c.values()) detail::put_le(out, x);
    }
  }
  return out;
}

inline void write_snapshot(const AnyState& s, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open snapshot for writing: " + path);
  const auto bytes = snapshot_bytes(s);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("failed writing snapshot: " + path);
}

inline AnyState parse_snapshot(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("snapshot: missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("snapshot: malformed header: ") + e.what());
  }

  int dim = 0, n = 0;
  double t = 0.0;
  std::string form;
  try {
    if (h.at("format_version").get<int>() != kSnapshotVersion) {
      throw FormatError("snapshot: unsupported format_version " + h.at("format_version").dump());
    }
    dim = h.at("dim").get<int>();
    n = h.at("n").get<int>();
    t = h.at("t").get<double>();
    form = h.at("formulation").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("snapshot: bad header: ") + e.what());
  }
  if (dim != 2 && dim != 3) throw FormatError("snapshot: dim must be 2 or 3, got " + std::to_string(dim));
  if (form != "A" && form != "B") throw FormatError("snapshot: formulation must be A or B");
  GridPtr grid;
  try {
    grid = TorusGrid::create(dim, n);
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("snapshot: ") + e.what());
  }

  const std::vector<std::pair<std::string, int>> expected =
      form == "A" ? std::vector<std::pair<std::string, int>>{{"v", dim}, {"F", dim * dim}, {"M", 3}}
                  : std::vector<std::pair<std::string, int>>{{"v", dim}, {"psi", dim}, {"M", 3}};
  if (!h.contains("fields")) throw FormatError("snapshot: header lacks a field list");
  const auto& fields = h["fields"];
  if (!fields.is_array() || fields.size() != expected.size()) {
    throw FormatError("snapshot: unexpected field list");
  }

  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data()) + nl + 1;
  const std::size_t available = bytes.size() - nl - 1;
  std::size_t offset = 0;
  std::vector<std::vector<ScalarField>> parsed;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& f = fields[i];
    const auto& [name, comps] = expected[i];
    bool ok = false;
    try {
      ok = f.value("name", "") == name && f.value("components", -1) == comps &&
           f.value("dtype", "") == "f64-le" &&
           f.value("count", std::size_t{0}) == static_cast<std::size_t>(comps) * grid->points();
    } catch (const nlohmann::json::exception&) {
      ok = false;
    }
    if (!ok) {
      throw FormatError("snapshot: field '" + name + "' header does not match the grid");
    }
    std::vector<ScalarField> cs;
    for (int c = 0; c < comps; ++c) {
      ScalarField sf(grid);
      const std::size_t need = grid->points() * 8;
      if (offset + need > available) {
        throw FormatError("snapshot: truncated payload in field '" + name + "'");
      }
      for (std::size_t p = 0; p < grid->points(); ++p) {
        const double x = detail::get_le(data + offset + 8 * p);
        if (std::isnan(x)) throw FormatError("snapshot: NaN in field '" + name + "'");
        sf[p] = x;
      }
      offset += need;
      cs.push_back(std::move(sf));
    }
    parsed.push_back(std::move(cs));
  }
  if (offset != available) throw FormatError("snapshot: trailing bytes after payload");

  if (form == "A") {
    MatrixField F(grid, dim, dim);
    F.components() = std::move(parsed[1]);
    return StateA{t, VectorField(std::move(parsed[0])), std::move(F), VectorField(std::move(parsed[2]))};
  }
  return StateB{t, VectorField(std::move(parsed[0])), VectorField(std::move(parsed[1])),
                VectorField(std::move(parsed[2]))};
}

inline AnyState load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open snapshot: " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_snapshot(bytes);
}

}  // namespace magel
