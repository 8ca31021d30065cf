// conslaw: solve, diagnose, sweep and oracle emission for reduced 2D
// conservation laws in symmetric form.

#include "conslaw/diagnostics.hpp"
#include "conslaw/io.hpp"
#include "conslaw/oracles.hpp"
#include "conslaw/solver.hpp"

#include "CLI11.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace conslaw;

namespace {

enum Exit { kOk = 0, kConfig = 1, kEntropy = 2, kRH = 3, kStability = 4, kSingular = 5, kSolver = 6 };

int exit_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NewtonDiverged:
    case ErrorCode::LeftDomain:
      return kSolver;
    case ErrorCode::SingularGram:
      return kSingular;
    default:
      return kConfig;
  }
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash != std::string::npos) return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    return std::stod(s);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "not a number: " + s);
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_number(item));
  }
  return out;
}

struct CommonFlags {
  std::vector<std::string> overrides;
  std::optional<double> eps0, eps_factor, tau_s;
  std::optional<int> levels;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--set", f.overrides, "Config override key.path=value (repeatable)");
  app->add_option("--eps0", f.eps0, "Initial viscosity");
  app->add_option("--eps-factor", f.eps_factor, "Viscosity reduction factor per continuation step");
  app->add_option("--levels", f.levels, "Number of mesh levels (halving from the first h)");
  app->add_option("--tau-s", f.tau_s, "Shock detector threshold");
  app->add_option("--seed", f.seed, "Mesh and solver seed");
}

ProblemConfig configure(const std::string& path, const CommonFlags& f) {
  json j = read_json_file(path);
  for (auto& o : f.overrides) apply_override(j, o);
  if (f.eps0) j["scheme"]["eps0"] = *f.eps0;
  if (f.eps_factor) j["scheme"]["eps_factor"] = *f.eps_factor;
  if (f.tau_s) j["scheme"]["tau_s"] = *f.tau_s;
  if (f.seed) j["scheme"]["seed"] = *f.seed;
  if (f.levels) {
    if (*f.levels < 1) throw Error(ErrorCode::Config, "--levels must be at least 1");
    double h0 = 0.125;
    if (j.contains("scheme") && j["scheme"].contains("h_levels") && !j["scheme"]["h_levels"].empty())
      h0 = j["scheme"]["h_levels"][0].get<double>();
    json hs = json::array();
    for (int k = 0; k < *f.levels; ++k) hs.push_back(h0 / std::pow(2.0, k));
    j["scheme"]["h_levels"] = hs;
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("schema error: ") + e.what());
  }
}

json scheme_json(const SchemeParams& s) {
  json h = json::array();
  for (double v : s.h_levels) h.push_back(v);
  return {{"eps0", s.eps0},           {"eps_factor", s.eps_factor}, {"eps_min", s.eps_min},
          {"eps_min_h_factor", s.eps_min_h_factor}, {"h_levels", h}, {"newton_tol", s.newton_tol},
          {"newton_max_iter", s.newton_max_iter},  {"tau_s", s.tau_s}, {"seed", s.seed},
          {"quad_order", s.quad_order}};
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_mesh(const fs::path& p, const SimplicialMesh& m) { write_atomic(p.string(), dump(mesh_to_json(m))); }

// ------------------------------------------------------------------ solve

int cmd_solve(const std::string& config_path, const std::string& out_dir, const CommonFlags& f, bool dump_matrices) {
  const ProblemConfig cfg = configure(config_path, f);
  const SchemeParams& sp = cfg.scheme;
  std::vector<std::shared_ptr<const SimplicialMesh>> meshes;
  for (double h : sp.h_levels) meshes.push_back(std::make_shared<SimplicialMesh>(triangulate(cfg.domain, h, sp.seed)));
  const auto sols = continuation_solve(cfg.system, meshes, cfg.projection, cfg.data, sp, cfg.dissipation,
                                       cfg.initial_state);
  const fs::path out(out_dir);
  const int n = cfg.system.n();
  std::ostringstream csv;
  csv << "level,h,eps,residual,newton_iterations,chains,l1_increment,status\n";
  bool any_ok = false;
  for (size_t k = 0; k < sols.size(); ++k) {
    const auto& s = sols[k];
    any_ok = any_ok || s.ok;
    const std::string mesh_name = "mesh_" + std::to_string(k) + ".json";
    write_mesh(out / mesh_name, *s.mesh);
    SolutionFile file;
    file.coeffs = to_std(s.coeffs);
    file.n = n;
    file.mesh_ref = mesh_name;
    file.mesh_id = hex64(s.mesh->id());
    file.gamma = s.gamma;
    file.residual = s.residual;
    json eps_path = json::array(), it_path = json::array();
    for (double e : s.eps_path) eps_path.push_back(num(e));
    for (int i : s.iterations_path) it_path.push_back(i);
    file.provenance = {{"config_hash", hex64(cfg.hash)},
                       {"scheme", scheme_json(sp)},
                       {"level", k},
                       {"h", num(s.h)},
                       {"eps", num(s.eps)},
                       {"eps_path", eps_path},
                       {"newton_iterations", it_path},
                       {"initial_state", vec_json(cfg.initial_state)},
                       {"tau_s", sp.tau_s},
                       {"status", s.status},
                       {"ok", s.ok}};
    write_atomic((out / ("level_" + std::to_string(k) + ".json")).string(), dump(solution_to_json(file)));

    std::string inc = "";
    if (k + 1 < sols.size() && s.ok && sols[k + 1].ok) {
      const NodalField a(*s.mesh, n, s.coeffs), b(*sols[k + 1].mesh, n, sols[k + 1].coeffs);
      inc = fmt(l1_distance(a, b, *sols[k + 1].mesh));
    }
    csv << k << ',' << fmt(s.h) << ',' << fmt(s.eps) << ',' << fmt(s.residual) << ',' << s.newton_iterations << ','
        << s.gamma.chains.size() << ',' << inc << ',' << s.status << '\n';
    std::cerr << "level " << k << " h=" << s.h << " eps=" << s.eps << " newton=" << s.newton_iterations
              << " residual=" << s.residual << " status=" << s.status << "\n";
  }
  write_atomic((out / "summary.csv").string(), csv.str());

  if (dump_matrices && !sols.empty() && sols.back().ok) {
    const auto& s = sols.back();
    const double eps = s.eps;
    const ResidualSystem rs = assemble_residual(cfg.system, *s.mesh, cfg.projection, cfg.data, s.coeffs, eps,
                                                cfg.dissipation, true, {sp.quad_order, true});
    Eigen::saveMarket(rs.J, (out / "jacobian.mtx").string());
  }
  if (!any_ok) {
    std::cerr << "error: Newton failed at every level\n";
    return kSolver;
  }
  return kOk;
}

// --------------------------------------------------------------- diagnose

struct LoadedSolution {
  SolutionFile file;
  std::shared_ptr<SimplicialMesh> mesh;
};

LoadedSolution load_solution(const std::string& path) {
  LoadedSolution s;
  s.file = solution_from_json(read_json_file(path));
  fs::path mp(s.file.mesh_ref);
  if (mp.is_relative()) mp = fs::path(path).parent_path() / mp;
  s.mesh = std::make_shared<SimplicialMesh>(mesh_from_json(read_json_file(mp.string())));
  const std::string id = hex64(s.mesh->id());
  if (!s.file.mesh_id.empty() && s.file.mesh_id != id)
    throw Error(ErrorCode::MeshMismatch, "solution was computed on mesh " + s.file.mesh_id + " but " + mp.string() +
                                             " has id " + id);
  if (static_cast<int>(s.file.coeffs.size()) != s.mesh->num_nodes() * s.file.n)
    throw Error(ErrorCode::MeshMismatch, "coefficient count does not match the mesh");
  return s;
}

int cmd_diagnose(const std::string& sol_path, const std::string& config_path, const std::string& report_path,
                 const CommonFlags& f) {
  const ProblemConfig cfg = configure(config_path, f);
  const LoadedSolution s = load_solution(sol_path);
  if (s.file.n != cfg.system.n()) throw Error(ErrorCode::MeshMismatch, "solution and system sizes differ");
  const Vec c = Eigen::Map<const Vec>(s.file.coeffs.data(), static_cast<Eigen::Index>(s.file.coeffs.size()));
  const NodalField base(*s.mesh, s.file.n, c);
  const FittedField z(base, s.file.gamma, s.mesh->h());
  const DiagnosticsReport rep = run_diagnostics(cfg.system, *s.mesh, z, s.file.gamma, cfg.domain, cfg.projection,
                                                cfg.diagnostics, cfg.scheme.seed);
  json j = report_to_json(rep);
  j["config_hash"] = hex64(cfg.hash);
  j["mesh_id"] = hex64(s.mesh->id());
  j["solution"] = fs::path(sol_path).filename().string();
  write_atomic(report_path, dump(j));
  for (auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "diagnose: exit " << rep.exit_code << "\n";
  return rep.exit_code;
}

// ------------------------------------------------------------------ sweep

int cmd_sweep(const std::string& config_path, const std::string& hs_text, const std::string& eps_text,
              const std::string& eps_h_text, double ref_lambda, const std::string& out_path, const CommonFlags& f) {
  const ProblemConfig cfg = configure(config_path, f);
  const std::vector<double> hs = parse_list(hs_text);
  const std::vector<double> eps_abs = parse_list(eps_text), eps_h = parse_list(eps_h_text);
  if (hs.empty() || (eps_abs.empty() && eps_h.empty())) throw Error(ErrorCode::Config, "empty sweep grid");
  struct Row {
    double h, eps;
    std::string status;
    double l1, c1, sigma, q0;
  };
  std::vector<std::pair<double, double>> grid;
  for (double h : hs) {
    if (!(h > 0)) throw Error(ErrorCode::Config, "sweep h must be positive");
    for (double e : eps_abs) grid.push_back({h, e});
    for (double a : eps_h) grid.push_back({h, a * h});
  }
  std::sort(grid.begin(), grid.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second > b.second; });
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<Row> rows;
  std::vector<DiscreteSolution> sols;
  const int n = cfg.system.n();
  for (auto [h, eps] : grid) {
    Row r{h, eps, "ok", NAN, NAN, NAN, NAN};
    SchemeParams sp = cfg.scheme;
    sp.h_levels = {h};
    sp.eps_min = eps;
    sp.eps_min_h_factor = 0;
    sp.eps0 = std::max(sp.eps0, eps);
    std::vector<std::shared_ptr<const SimplicialMesh>> m{std::make_shared<SimplicialMesh>(triangulate(cfg.domain, h, sp.seed))};
    try {
      sp.validate();
      auto res = continuation_solve(cfg.system, m, cfg.projection, cfg.data, sp, cfg.dissipation, cfg.initial_state);
      DiscreteSolution s = res.front();
      if (!s.ok) {
        r.status = s.status;
      } else {
        const NodalField zf(*s.mesh, n, s.coeffs);
        const FittedField zfit(zf, s.gamma, s.mesh->h() + 2 * s.eps);
        if (ref_lambda >= 0) r.l1 = l1_distance(zfit, burgers_field(ref_lambda), *s.mesh);
        r.c1 = stability_c1(cfg.system, *s.mesh, zfit, s.gamma, cfg.projection);
        r.sigma = kernel_sigma_min(cfg.system, *s.mesh, zfit, s.gamma);
        const LinearizedProblem lp = LinearizedProblem::build(cfg.system, *s.mesh, zfit, s.gamma,
                                                              cfg.diagnostics.phi_per_chain, cfg.diagnostics.p);
        const TestSpace ts = make_test_space(*s.mesh, cfg.projection, Constraint::KerP, false);
        const GramSolver gs(ts, lp.gram.total());
        r.q0 = s.gamma.chains.empty() ? 0.0 : (gs.singular() ? NAN : q0_estimate(lp, ts, gs).value);
        sols.push_back(s);
      }
    } catch (const Error& e) {
      r.status = std::string(error_name(e.code()));
    }
    rows.push_back(r);
    std::cerr << "sweep h=" << h << " eps=" << eps << " status=" << r.status << "\n";
  }
  // Without an exact reference, errors are measured against the finest successful run.
  if (ref_lambda < 0 && !sols.empty()) {
    const DiscreteSolution& ref = sols.back();
    const NodalField rf(*ref.mesh, n, ref.coeffs);
    size_t si = 0;
    for (auto& r : rows) {
      if (r.status != "ok") continue;
      const DiscreteSolution& s = sols[si++];
      const NodalField zf(*s.mesh, n, s.coeffs);
      r.l1 = l1_distance(zf, rf, *ref.mesh);
    }
  }
  std::ostringstream csv;
  csv << "h,eps,status,l1_error,rate,c1,sigma_min,q0\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    std::string rate;
    if (i > 0 && rows[i - 1].status == "ok" && r.status == "ok" && r.l1 > 0 && rows[i - 1].l1 > 0)
      rate = fmt(std::log2(rows[i - 1].l1 / r.l1));
    csv << fmt(r.h) << ',' << fmt(r.eps) << ',' << r.status << ',' << fmt(r.l1) << ',' << rate << ',' << fmt(r.c1)
        << ',' << fmt(r.sigma) << ',' << fmt(r.q0) << '\n';
  }
  write_atomic(out_path, csv.str());
  return kOk;
}

// ---------------------------------------------------------------- oracles

int cmd_oracle_burgers(double lambda, int grid, const std::string& out_path) {
  if (grid < 1) throw Error(ErrorCode::Config, "--grid must be positive");
  if (!(lambda >= 0 && lambda <= 1)) throw Error(ErrorCode::Config, "--lambda must lie in [0,1]");
  const BurgersStrip strip = burgers_strip();
  const SimplicialMesh mesh = triangulate(strip.domain, 1.0 / grid, 0);
  const fs::path out(out_path);
  const std::string mesh_name = out.stem().string() + ".mesh.json";
  write_mesh(out.parent_path() / mesh_name, mesh);
  SolutionFile file;
  file.coeffs = to_std(interpolate(burgers_field(lambda), mesh));
  file.n = 1;
  file.mesh_ref = mesh_name;
  file.mesh_id = hex64(mesh.id());
  file.gamma = burgers_gamma(lambda);
  file.provenance = {{"oracle", "burgers"}, {"lambda", lambda}, {"grid", grid}};
  write_atomic(out_path, dump(solution_to_json(file)));
  return kOk;
}

int cmd_oracle_hugoniot(const std::string& kind, const std::string& state, const std::string& mu_text, double s,
                        double C, double kappa, const std::string& out_path) {
  const SystemKind k = kind_from_name(kind);
  if (k != SystemKind::EulerStationary && k != SystemKind::EulerSelfSimilar)
    throw Error(ErrorCode::NonEulerSystem, "hugoniot oracle needs an Euler kind");
  EosParams eos;
  eos.C = C;
  eos.kappa = kappa;
  const SymmetricSystem sys = SymmetricSystem::euler(k, eos);
  const std::vector<double> z = parse_list(state), mu = parse_list(mu_text);
  if (z.size() != 3 || mu.size() != 2) throw Error(ErrorCode::Config, "--state needs 3 and --mu 2 components");
  Point m(mu[0], mu[1]);
  if (!(m.norm() > 0)) throw Error(ErrorCode::Config, "--mu must be nonzero");
  m /= m.norm();
  const HugoniotPair p = euler_hugoniot_state(sys, Eigen::Map<const Vec>(z.data(), 3), m, s);
  json j = {{"z_left", vec_json(p.z_left)},
            {"z_right", vec_json(p.z_right)},
            {"mu", {m.x(), m.y()}},
            {"s", s},
            {"residual", num(p.residual)},
            {"supersonic_left", p.supersonic_left},
            {"supersonic_right", p.supersonic_right},
            {"mach_left", num(p.mach_left)},
            {"mach_right", num(p.mach_right)}};
  if (out_path.empty())
    std::cout << dump(j);
  else
    write_atomic(out_path, dump(j));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Dotted flags (--scheme.eps0=0.25) become config overrides.
  std::vector<std::string> dotted;
  std::vector<char*> rest;
  for (int i = 0; i < argc; ++i) {
    const std::string a = argv[i];
    if (i > 0 && a.rfind("--", 0) == 0) {
      const auto eq = a.find('=');
      const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
      if (key.find('.') != std::string::npos) {
        if (eq != std::string::npos) {
          dotted.push_back(a.substr(2));
        } else if (i + 1 < argc) {
          dotted.push_back(key + "=" + argv[++i]);
        }
        continue;
      }
    }
    rest.push_back(argv[i]);
  }

  CLI::App app{"Vanishing-viscosity solver and a posteriori diagnostics for 2D conservation laws"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::string config, out_dir = "out", solution, report = "report.json", out_file;
  bool dump_matrices = false;
  auto* solve = app.add_subcommand("solve", "Continuation solve and shock fitting");
  solve->add_option("config", config, "Problem configuration")->required();
  solve->add_option("-o,--out", out_dir, "Output directory");
  solve->add_flag("--dump-matrices", dump_matrices, "Write the final Jacobian in Matrix Market format");
  add_common(solve, flags);

  auto* diagnose = app.add_subcommand("diagnose", "A posteriori diagnostics of a solution file");
  diagnose->add_option("solution", solution, "Solution JSON")->required();
  diagnose->add_option("config", config, "Problem configuration")->required();
  diagnose->add_option("-o,--out", report, "Report JSON");
  add_common(diagnose, flags);

  std::string hs, eps_list, eps_h, sweep_out = "sweep.csv";
  double ref_lambda = -1;
  auto* sweep = app.add_subcommand("sweep", "Refinement study over an (h, eps) grid");
  sweep->add_option("config", config, "Problem configuration")->required();
  sweep->add_option("--h-list", hs, "Mesh sizes, comma separated (fractions allowed)");
  sweep->add_option("--eps", eps_list, "Viscosities, comma separated");
  sweep->add_option("--eps-per-h", eps_h, "Viscosities as multiples of h, comma separated");
  sweep->add_option("--reference-lambda", ref_lambda, "Compare with the exact Burgers field of this lambda");
  sweep->add_option("-o,--out", sweep_out, "Output CSV");
  add_common(sweep, flags);

  auto* oracle = app.add_subcommand("oracle", "Exact reference constructions");
  oracle->require_subcommand(1);
  double lambda = 0;
  int grid = 32;
  auto* ob = oracle->add_subcommand("burgers", "Exact Burgers field as a solution file");
  ob->add_option("--lambda", lambda, "Family parameter in [0,1]")->required();
  ob->add_option("--grid", grid, "Mesh resolution 1/h")->required();
  ob->add_option("-o,--out", out_file, "Solution JSON")->required();

  std::string kind = "EulerStationary", state, mu = "1,0";
  double strength = 0, C = 1, kappa = 1.4;
  auto* oh = oracle->add_subcommand("hugoniot", "Euler shock pair");
  oh->add_option("--kind", kind, "EulerStationary or EulerSelfSimilar");
  oh->add_option("--state", state, "Left state z (3 components)")->required();
  oh->add_option("--mu", mu, "Front normal");
  oh->add_option("--s", strength, "Normal velocity jump");
  oh->add_option("--C", C, "Equation of state constant");
  oh->add_option("--kappa", kappa, "Adiabatic exponent");
  oh->add_option("-o,--out", out_file, "Output JSON (stdout when omitted)");

  try {
    app.parse(static_cast<int>(rest.size()), rest.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  flags.overrides.insert(flags.overrides.end(), dotted.begin(), dotted.end());

  try {
    if (*solve) return cmd_solve(config, out_dir, flags, dump_matrices);
    if (*diagnose) return cmd_diagnose(solution, config, report, flags);
    if (*sweep) return cmd_sweep(config, hs, eps_list, eps_h, ref_lambda, sweep_out, flags);
    if (*ob) return cmd_oracle_burgers(lambda, grid, out_file);
    if (*oh) return cmd_oracle_hugoniot(kind, state, mu, strength, C, kappa, out_file);
  } catch (const Error& e) {
    std::cerr << "error [" << error_name(e.code()) << "]: " << e.what() << "\n";
    return exit_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
