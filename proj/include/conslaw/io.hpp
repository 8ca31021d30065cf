#pragma once

#include "conslaw/diagnostics.hpp"
#include "conslaw/solver.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace conslaw {

using json = nlohmann::json;

struct ProblemConfig {
  json raw;
  std::uint64_t hash = 0;
  SymmetricSystem system = SymmetricSystem::burgers();
  PolygonDomain domain;
  ProjectionField projection{1};
  BoundaryData data;
  SchemeParams scheme;
  DissipationSpec dissipation;
  Vec initial_state;
  DiagnosticsOptions diagnostics;
};

/// Parses JSON text; syntax errors become Config errors with line and column.
json parse_json_text(const std::string& text, const std::string& what = "input");
json read_json_file(const std::string& path);

/// Applies "a.b.c=value" (value parsed as JSON when possible).
void apply_override(json& j, const std::string& assignment);

/// Builds the typed configuration; throws Config on schema errors.
ProblemConfig config_from_json(const json& j);
ProblemConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

json mesh_to_json(const SimplicialMesh& m);
SimplicialMesh mesh_from_json(const json& j);

json gamma_to_json(const DiscontinuitySet& g);
DiscontinuitySet gamma_from_json(const json& j);

struct SolutionFile {
  std::vector<double> coeffs;
  int n = 1;
  std::string mesh_ref;
  std::string mesh_id;
  DiscontinuitySet gamma;
  json provenance;
  double residual = 0;
};
json solution_to_json(const SolutionFile& s);
SolutionFile solution_from_json(const json& j);

json report_to_json(const DiagnosticsReport& r);

/// Writes via a temporary file and rename.
void write_atomic(const std::string& path, const std::string& content);
/// Canonical dump: sorted keys, two-space indent, trailing newline.
std::string dump(const json& j);

/// Finite doubles as numbers, non-finite ones as the strings "inf"/"-inf"/"nan".
json num(double v);

}  // namespace conslaw
