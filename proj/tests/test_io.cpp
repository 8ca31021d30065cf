#include "conslaw/io.hpp"
#include "conslaw/oracles.hpp"

#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

using namespace conslaw;

namespace {
json strip_config() {
  return parse_json_text(R"({
    "system": {"kind": "Burgers2D"},
    "domain": {"rectangle": {"x": [0, 1], "y": [-1, 1],
               "tags": {"bottom": "bottom", "right": "outflow", "top": "top", "left": "inflow"}}},
    "boundary": {"inflow": {"P": "zero", "data": {"state": [{"lo": [0, -1], "hi": [0, 0], "value": [-1]},
                                                            {"lo": [0, 0], "hi": [0, 1], "value": [1]}]}}},
    "scheme": {"eps0": 0.5, "h_levels": [0.25, 0.125]}
  })");
}

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}
}  // namespace

TEST_CASE("malformed JSON reports line and column") {
  try {
    parse_json_text("{\n  \"a\": 1,\n  \"b\": ]\n}", "cfg");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    const std::string w = e.what();
    CHECK(w.find("line 3") != std::string::npos);
    CHECK(w.find("column") != std::string::npos);
  }
}

TEST_CASE("config parsing, defaults and overrides") {
  json j = strip_config();
  const ProblemConfig c = config_from_json(j);
  CHECK(c.system.m() == 2);
  CHECK(c.scheme.h_levels.size() == 2);
  CHECK(c.projection.has("top"));
  CHECK(c.projection.P("outflow", Point(1, 0)).isIdentity());
  CHECK(c.projection.P("inflow", Point(0, 0.5)).isZero());
  REQUIRE(c.data.tags.count("inflow"));
  CHECK(c.data.tags.at("inflow").pieces.size() == 2);

  apply_override(j, "scheme.eps0=0.25");
  apply_override(j, "diagnostics.p=2");
  apply_override(j, "system.kind=Burgers2D");
  const ProblemConfig c2 = config_from_json(j);
  CHECK(c2.scheme.eps0 == 0.25);
  CHECK(c2.diagnostics.p == 2.0);
  CHECK(c2.hash != c.hash);
  CHECK(config_from_json(strip_config()).hash == c.hash);
}

TEST_CASE("config errors") {
  json unknown = strip_config();
  unknown["boundary"]["nowhere"] = {{"P", "zero"}};
  CHECK(code_of([&] { config_from_json(unknown); }) == ErrorCode::UnknownTag);

  json bad_eps = strip_config();
  bad_eps["scheme"]["eps_min"] = 1.0;
  CHECK(code_of([&] { config_from_json(bad_eps); }) == ErrorCode::Config);

  json bad_p = strip_config();
  bad_p["boundary"]["inflow"]["P"] = {{"matrix", {{0.5}}}};
  CHECK(code_of([&] { config_from_json(bad_p); }) != std::nullopt);

  json bad_diss = strip_config();
  bad_diss["scheme"]["dissipation"] = "strong";
  CHECK(code_of([&] { config_from_json(bad_diss); }) == ErrorCode::Config);

  CHECK(code_of([] { read_json_file("/nonexistent/file.json"); }) == ErrorCode::Config);
}

TEST_CASE("mesh round trip keeps the identity") {
  const SimplicialMesh m = triangulate(burgers_strip().domain, 0.25);
  const SimplicialMesh r = mesh_from_json(parse_json_text(dump(mesh_to_json(m))));
  CHECK(r.id() == m.id());
  CHECK(r.num_nodes() == m.num_nodes());
  CHECK(r.num_triangles() == m.num_triangles());
  CHECK(r.boundary().size() == m.boundary().size());
}

TEST_CASE("solution coefficients round trip bit for bit") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0, 1);
  SolutionFile s;
  s.n = 1;
  for (int i = 0; i < 200; ++i) s.coeffs.push_back(N(rng) * std::pow(10.0, (i % 20) - 10));
  s.coeffs.push_back(1.0 / 3);
  s.coeffs.push_back(-0.0);
  s.mesh_ref = "mesh_0.json";
  s.mesh_id = hex64(1234567);
  s.gamma = burgers_gamma(0.5);
  s.residual = 3.5e-12;
  const SolutionFile r = solution_from_json(parse_json_text(dump(solution_to_json(s))));
  REQUIRE(r.coeffs.size() == s.coeffs.size());
  CHECK(std::memcmp(r.coeffs.data(), s.coeffs.data(), s.coeffs.size() * sizeof(double)) == 0);
  CHECK(r.mesh_id == s.mesh_id);
  CHECK(r.mesh_ref == s.mesh_ref);
  REQUIRE(r.gamma.chains.size() == 1);
  CHECK(gamma_distance(r.gamma, s.gamma) < 1e-15);
  CHECK(r.residual == s.residual);
}

TEST_CASE("non-finite numbers and canonical dumps") {
  CHECK(num(INFINITY) == json("inf"));
  CHECK(num(-INFINITY) == json("-inf"));
  CHECK(num(NAN) == json("nan"));
  CHECK(num(0.5) == json(0.5));
  const json a = parse_json_text(R"({"b": 1, "a": [1, 2]})");
  const std::string d = dump(a);
  CHECK(d.back() == '\n');
  CHECK(d.find("\"a\"") < d.find("\"b\""));
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("atomic writes create directories") {
  const auto dir = std::filesystem::temp_directory_path() / "conslaw_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  const std::string path = (dir / "out.txt").string();
  write_atomic(path, "first");
  write_atomic(path, "second");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "second");
  std::filesystem::remove_all(dir.parent_path());
}
