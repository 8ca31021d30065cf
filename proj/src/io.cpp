#include "conslaw/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace conslaw {

// ------------------------------------------------------------------ json

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::Config, what + ": malformed JSON at line " + std::to_string(line) + ", column " +
                                       std::to_string(col));
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::Config, "override needs key=value: " + assignment);
  const std::string key = assignment.substr(0, eq), val = assignment.substr(eq + 1);
  json v;
  try {
    v = json::parse(val);
  } catch (const json::parse_error&) {
    v = val;
  }
  json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::Config, "bad override key " + key);
    if (!cur->is_object()) *cur = json::object();
    if (dot == std::string::npos) {
      (*cur)[part] = v;
      return;
    }
    cur = &(*cur)[part];
    start = dot + 1;
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

namespace {

double get_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw Error(ErrorCode::Config, "expected a number");
}

Vec vec_of(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Config, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = get_num(j[i]);
  return v;
}

Point point_of(const json& j) {
  const Vec v = vec_of(j);
  if (v.size() != 2) throw Error(ErrorCode::Config, "expected a 2-vector");
  return Point(v[0], v[1]);
}

json of_vec(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json of_point(const Point& p) { return json::array({p.x(), p.y()}); }

Mat projector_of(const json& j, int n) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "zero") return Mat::Zero(n, n);
    if (s == "identity") return Mat::Identity(n, n);
    throw Error(ErrorCode::Config, "unknown projector '" + s + "'");
  }
  if (j.is_object() && j.contains("matrix")) {
    const json& m = j["matrix"];
    if (!m.is_array() || static_cast<int>(m.size()) != n) throw Error(ErrorCode::Config, "projector matrix size");
    Mat P(n, n);
    for (int r = 0; r < n; ++r) {
      const Vec row = vec_of(m[r]);
      if (row.size() != n) throw Error(ErrorCode::Config, "projector matrix size");
      P.row(r) = row.transpose();
    }
    return P;
  }
  throw Error(ErrorCode::Config, "projector must be \"zero\", \"identity\" or {\"matrix\": ...}");
}

template <class T>
T opt(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Config, std::string("bad value for '") + key + "'");
  }
}

}  // namespace

// --------------------------------------------------------------- config

ProblemConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "configuration must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known{"system", "domain", "boundary", "scheme", "diagnostics", "comment"};
    if (!known.count(it.key())) throw Error(ErrorCode::Config, "unknown top-level key '" + it.key() + "'");
  }
  ProblemConfig c;
  c.raw = j;
  c.hash = fnv1a(j.dump());

  const json sysj = j.value("system", json::object());
  const std::string kind = opt<std::string>(sysj, "kind", "Burgers2D");
  const SystemKind k = kind_from_name(kind);
  if (k == SystemKind::Burgers2D) {
    c.system = SymmetricSystem::burgers();
  } else if (k == SystemKind::EulerStationary || k == SystemKind::EulerSelfSimilar) {
    EosParams eos;
    if (sysj.contains("eos")) {
      eos.C = opt<double>(sysj["eos"], "C", eos.C);
      eos.kappa = opt<double>(sysj["eos"], "kappa", eos.kappa);
    }
    if (!(eos.C > 0) || !(eos.kappa > 1)) throw Error(ErrorCode::Config, "eos needs C > 0 and kappa > 1");
    c.system = SymmetricSystem::euler(k, eos);
  } else {
    throw Error(ErrorCode::Config, "custom systems cannot be configured from JSON");
  }
  const int n = c.system.n();
  if (sysj.contains("d_bounds")) {
    std::vector<std::pair<double, double>> b;
    for (auto& e : sysj["d_bounds"]) {
      const Vec v = vec_of(e);
      if (v.size() != 2) throw Error(ErrorCode::Config, "d_bounds entries are [lo, hi]");
      b.emplace_back(v[0], v[1]);
    }
    c.system.set_bounds(b);
  }

  if (!j.contains("domain")) throw Error(ErrorCode::Config, "missing 'domain'");
  const json& dj = j["domain"];
  if (dj.contains("rectangle")) {
    const json& r = dj["rectangle"];
    const Vec x = vec_of(r.at("x")), y = vec_of(r.at("y"));
    const json& t = r.at("tags");
    c.domain = PolygonDomain::rectangle(x[0], x[1], y[0], y[1], t.at("bottom"), t.at("right"), t.at("top"),
                                        t.at("left"));
  } else {
    for (auto& v : dj.at("vertices")) c.domain.vertices.push_back(point_of(v));
    c.domain.edge_tags = dj.at("edge_tags").get<std::vector<std::string>>();
  }
  c.domain.validate();

  c.projection = ProjectionField(n);
  std::set<std::string> tags(c.domain.edge_tags.begin(), c.domain.edge_tags.end());
  const json bj = j.value("boundary", json::object());
  for (auto it = bj.begin(); it != bj.end(); ++it) {
    if (!tags.count(it.key())) throw Error(ErrorCode::UnknownTag, "boundary block names unknown tag " + it.key());
    const json& tj = it.value();
    TagProjection tp;
    tp.P = projector_of(tj.value("P", json("identity")), n);
    if (tj.contains("e0"))
      for (auto& e : tj["e0"]) tp.e0.push_back(vec_of(e));
    if (tj.contains("windows"))
      for (auto& w : tj["windows"]) tp.windows.push_back({point_of(w.at("lo")), point_of(w.at("hi")), projector_of(w.at("P"), n)});
    c.projection.set(it.key(), tp);
    if (tj.contains("data")) {
      const json& d = tj["data"];
      TagData td;
      if (d.is_string() && d.get<std::string>() == "zero") {
        td.kind = TagData::Zero;
      } else if (d.is_object() && d.contains("flux")) {
        td.kind = TagData::Flux;
        td.flux = vec_of(d["flux"]);
        if (td.flux.size() != n) throw Error(ErrorCode::Config, "flux data size");
      } else if (d.is_object() && d.contains("state")) {
        td.kind = TagData::State;
        const json& s = d["state"];
        if (s.is_array() && !s.empty() && s[0].is_number()) {
          td.pieces.push_back({Point(-1e300, -1e300), Point(1e300, 1e300), vec_of(s)});
        } else {
          for (auto& p : s)
            td.pieces.push_back({point_of(p.at("lo")), point_of(p.at("hi")), vec_of(p.at("value"))});
        }
        for (auto& p : td.pieces)
          if (p.state.size() != n) throw Error(ErrorCode::Config, "state data size");
      } else {
        throw Error(ErrorCode::Config, "data must be \"zero\", {\"flux\": ...} or {\"state\": ...}");
      }
      c.data.tags[it.key()] = td;
    }
  }
  for (auto& t : tags)
    if (!c.projection.has(t)) c.projection.set(t, {Mat::Identity(n, n), {}, {}});
  c.projection.validate();

  const json sj = j.value("scheme", json::object());
  SchemeParams& sp = c.scheme;
  sp.eps0 = opt<double>(sj, "eps0", sp.eps0);
  sp.eps_factor = opt<double>(sj, "eps_factor", sp.eps_factor);
  sp.eps_min = opt<double>(sj, "eps_min", sp.eps_min);
  sp.eps_min_h_factor = opt<double>(sj, "eps_min_h_factor", sp.eps_min_h_factor);
  sp.h_levels = opt<std::vector<double>>(sj, "h_levels", {0.125});
  sp.newton_tol = opt<double>(sj, "newton_tol", sp.newton_tol);
  sp.newton_max_iter = opt<int>(sj, "newton_max_iter", sp.newton_max_iter);
  sp.tau_s = opt<double>(sj, "tau_s", sp.tau_s);
  sp.seed = opt<std::uint64_t>(sj, "seed", sp.seed);
  sp.quad_order = opt<int>(sj, "quad_order", sp.quad_order);
  try {
    sp.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  const std::string diss = opt<std::string>(sj, "dissipation", "identity");
  if (diss == "identity")
    c.dissipation = DissipationSpec::identity(n);
  else if (diss == "mild")
    c.dissipation = DissipationSpec::mild(n);
  else
    throw Error(ErrorCode::Config, "dissipation must be identity or mild");
  c.initial_state = sj.contains("initial_state") ? vec_of(sj["initial_state"]) : Vec::Zero(n);
  if (c.initial_state.size() != n) throw Error(ErrorCode::Config, "initial_state size");

  const json gj = j.value("diagnostics", json::object());
  DiagnosticsOptions& o = c.diagnostics;
  o.p = opt<double>(gj, "p", o.p);
  o.phi_per_chain = opt<int>(gj, "phi_per_chain", o.phi_per_chain);
  o.tol_rh = opt<double>(gj, "tol_rh", o.tol_rh);
  o.rh_fraction = opt<double>(gj, "rh_fraction", o.rh_fraction);
  o.entropy_factor = opt<double>(gj, "entropy_factor", o.entropy_factor);
  o.stability_h = opt<std::vector<double>>(gj, "stability_h", o.stability_h);
  o.growth_limit = opt<double>(gj, "growth_limit", o.growth_limit);
  o.enrichment = opt<bool>(gj, "enrichment", o.enrichment);
  if (!(o.p >= 2)) throw Error(ErrorCode::Config, "diagnostics.p must be at least 2");
  return c;
}

ProblemConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = read_json_file(path);
  for (auto& o : overrides) apply_override(j, o);
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("schema error: ") + e.what());
  }
}

// ----------------------------------------------------------------- mesh

json mesh_to_json(const SimplicialMesh& m) {
  json j;
  json nodes = json::array(), tris = json::array(), bnd = json::array();
  for (auto& p : m.nodes()) nodes.push_back(of_point(p));
  for (auto& t : m.triangles()) tris.push_back({t[0], t[1], t[2]});
  for (auto& e : m.boundary()) bnd.push_back({{"edge", {e.v[0], e.v[1]}}, {"tag", e.tag}, {"nu", of_point(e.nu)}});
  j["nodes"] = nodes;
  j["triangles"] = tris;
  j["boundary"] = bnd;
  return j;
}

SimplicialMesh mesh_from_json(const json& j) {
  try {
    std::vector<Point> nodes;
    for (auto& p : j.at("nodes")) nodes.push_back(point_of(p));
    std::vector<std::array<int, 3>> tris;
    for (auto& t : j.at("triangles")) tris.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    std::vector<BoundaryEdge> bnd;
    for (auto& e : j.at("boundary"))
      bnd.push_back({{e.at("edge").at(0).get<int>(), e.at("edge").at(1).get<int>()}, e.at("tag").get<std::string>(),
                     point_of(e.at("nu"))});
    return SimplicialMesh(std::move(nodes), std::move(tris), std::move(bnd));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("mesh file: ") + e.what());
  }
}

// ---------------------------------------------------------------- gamma

json gamma_to_json(const DiscontinuitySet& g) {
  json a = json::array();
  for (auto& c : g.chains) {
    json cj;
    json pts = json::array(), mu = json::array(), zm = json::array(), zp = json::array();
    for (auto& p : c.points) pts.push_back(of_point(p));
    for (auto& m : c.mu) mu.push_back(of_point(m));
    for (auto& z : c.zminus) zm.push_back(of_vec(z));
    for (auto& z : c.zplus) zp.push_back(of_vec(z));
    cj["points"] = pts;
    cj["mu"] = mu;
    cj["zminus"] = zm;
    cj["zplus"] = zp;
    cj["unfitted"] = c.unfitted;
    a.push_back(cj);
  }
  return a;
}

DiscontinuitySet gamma_from_json(const json& j) {
  DiscontinuitySet g;
  if (!j.is_array()) throw Error(ErrorCode::Config, "gamma must be a list of chains");
  for (auto& cj : j) {
    std::vector<Point> pts;
    for (auto& p : cj.at("points")) pts.push_back(point_of(p));
    GammaChain c = gamma_from_polyline(pts, Point(0, 1));
    if (cj.contains("mu")) {
      const json& mu = cj["mu"];
      if (mu.size() != c.mu.size()) throw Error(ErrorCode::Config, "gamma: one mu per segment");
      for (std::size_t s = 0; s < mu.size(); ++s) {
        Point m = point_of(mu[s]);
        if (!(m.norm() > 0)) throw Error(ErrorCode::Config, "gamma: zero normal");
        c.mu[s] = m / m.norm();
      }
    }
    if (cj.contains("zminus")) {
      for (auto& z : cj["zminus"]) c.zminus.push_back(vec_of(z));
      for (auto& z : cj.at("zplus")) c.zplus.push_back(vec_of(z));
      if (!c.has_traces()) throw Error(ErrorCode::Config, "gamma: one trace pair per vertex");
    }
    c.unfitted = cj.value("unfitted", false);
    g.chains.push_back(std::move(c));
  }
  return g;
}

// ------------------------------------------------------------- solution

json solution_to_json(const SolutionFile& s) {
  json j;
  json c = json::array();
  for (double v : s.coeffs) c.push_back(num(v));
  j["coeffs"] = c;
  j["n"] = s.n;
  j["mesh_ref"] = s.mesh_ref;
  j["mesh_id"] = s.mesh_id;
  j["gamma"] = gamma_to_json(s.gamma);
  j["provenance"] = s.provenance;
  j["residual"] = num(s.residual);
  return j;
}

SolutionFile solution_from_json(const json& j) {
  SolutionFile s;
  try {
    for (auto& v : j.at("coeffs")) s.coeffs.push_back(get_num(v));
    s.n = j.value("n", 1);
    s.mesh_ref = j.at("mesh_ref").get<std::string>();
    s.mesh_id = j.value("mesh_id", std::string());
    s.gamma = gamma_from_json(j.value("gamma", json::array()));
    s.provenance = j.value("provenance", json::object());
    s.residual = j.contains("residual") ? get_num(j["residual"]) : 0.0;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("solution file: ") + e.what());
  }
  return s;
}

// --------------------------------------------------------------- report

json report_to_json(const DiagnosticsReport& r) {
  json j;
  json rh = json::array();
  for (std::size_t k = 0; k < r.rh_max.size(); ++k)
    rh.push_back({{"chain", k}, {"max", num(r.rh_max[k])}, {"bad_fraction", num(r.rh_bad_fraction[k])}});
  j["rh"] = rh;
  json ent = json::array();
  for (std::size_t k = 0; k < r.entropy.chains.size(); ++k) {
    const auto& c = r.entropy.chains[k];
    ent.push_back({{"chain", k},
                   {"max", num(c.max_pointwise)},
                   {"integrated", num(c.integrated)},
                   {"per_length", num(c.per_length)},
                   {"length", num(c.length)},
                   {"max_jump", num(c.max_jump)}});
  }
  j["entropy"] = {{"chains", ent}, {"weak_max", num(r.entropy.weak_max)}, {"tolerance", num(r.tol_entropy)}};
  json qk = json::array();
  for (double v : r.qk.qk) qk.push_back(num(v));
  j["q0"] = {{"estimate", num(r.q0.value)},
             {"per_component", qk},
             {"additivity_bound", num(r.qk.bound)},
             {"additivity_holds", r.qk.holds},
             {"eps_used", 0.0},
             {"p", num(r.q0.p)},
             {"phi_basis_size", r.q0.basis_size}};
  json c1 = json::array(), hs = json::array(), ratios = json::array();
  for (double v : r.stability.c1) c1.push_back(num(v));
  for (double v : r.stability.h) hs.push_back(num(v));
  for (double v : r.stability.ratios) ratios.push_back(num(v));
  j["stability"] = {{"c1_per_level", c1}, {"h", hs}, {"ratios", ratios}, {"bounded_flag", r.stability.bounded}};
  json sm = json::array();
  for (double v : r.sigma_min) sm.push_back(num(v));
  j["kernel"] = {{"sigma_min_per_level", sm}};
  if (r.enrichment) {
    const auto& e = *r.enrichment;
    json mass;
    for (auto& [t, m] : e.xi_mass) mass[t] = num(m);
    j["enrichment"] = {{"q0_before", num(e.q0_before)},
                       {"q0_after", num(e.q0_after)},
                       {"xi_boundary_mass", mass},
                       {"xi_max", num(e.xi_full.size() ? e.xi_full.cwiseAbs().maxCoeff() : 0.0)}};
  } else {
    j["enrichment"] = nullptr;
  }
  j["warnings"] = r.warnings;
  j["singular_gram"] = r.singular_gram;
  j["exit_code"] = r.exit_code;
  return j;
}

// ---------------------------------------------------------------- files

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Config, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::Config, "write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

}  // namespace conslaw
