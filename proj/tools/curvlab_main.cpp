// curvlab: file-driven runs for the curvature boundary-value laboratory.
// Subcommands: mesh, solve, mpass, sweep, liouville.
// Exit codes: 0 success, 2 config/validation, 3 convergence, 4 internal.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "curvlab/blowup.hpp"
#include "curvlab/liouville.hpp"
#include "curvlab/mesh.hpp"
#include "curvlab/model.hpp"
#include "curvlab/mpass.hpp"
#include "curvlab/solve.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace curvlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_config() {
  return json{
      {"mesh", {{"n", 32}, {"rho", 0.25}}},
      {"prescription",
       {{"p0_angle", 0.0}, {"amplitude_f", 1.0}, {"amplitude_h", 1.0}}},
      {"parameters", {{"mu", 1e-2}, {"lambda", 1e-1}}},
      {"schedule",
       {{"lambda0", 0.1}, {"levels", 5}, {"cluster_threshold", 0.05}}},
      {"solver", {{"tol", 1e-10}, {"max_iter", 60}, {"k_eigen", 4}}},
      {"mpass",
       {{"P", 33}, {"tol_path", 1e-3}, {"max_sweeps", 400}, {"eta0", 0.3}}},
      {"liouville",
       {{"Lambda", 1.0},
        {"s0", 0.0},
        {"t0", 0.0},
        {"c_inf", 1.0},
        {"d_inf", 1.0},
        {"grid", true},
        {"pde_tol", 0.5}}},
      {"seed", 0}};
}

// strict merge: every user key must exist in the defaults at the same path
// and carry the same JSON kind
void merge_strict(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw ConfigError("expected an object at " + (path.empty() ? "/" : path));
  }
  for (const auto& [key, val] : user.items()) {
    const std::string here = path + "/" + key;
    if (!base.contains(key)) throw ConfigError("unknown key at " + here);
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, val, here);
    } else if (slot.is_number() && val.is_number()) {
      if (slot.is_number_integer() && !val.is_number_integer()) {
        throw ConfigError("expected an integer at " + here);
      }
      slot = val;
    } else if (slot.type() == val.type()) {
      slot = val;
    } else {
      throw ConfigError("wrong value kind at " + here);
    }
  }
}

json load_config(const std::string& config_path) {
  json cfg = default_config();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config " + config_path);
    json user;
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config parse: ") + e.what());
    }
    merge_strict(cfg, user, "");
  }
  return cfg;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << "\n";
}

struct Workspace {
  fs::path out;
  json cfg;
  unsigned seed = 0;
};

Workspace prepare(const std::string& config_path, const std::string& outdir,
                  int seed_flag) {
  Workspace ws;
  ws.cfg = load_config(config_path);
  if (seed_flag >= 0) ws.cfg["seed"] = seed_flag;
  ws.seed = ws.cfg["seed"].get<unsigned>();
  ws.out = outdir;
  fs::create_directories(ws.out);
  write_json(ws.out / "resolved_config.json", ws.cfg);
  return ws;
}

Mesh build_mesh_from(const json& cfg) {
  return build_torus_with_hole(cfg["mesh"]["n"].get<int>(),
                               cfg["mesh"]["rho"].get<double>());
}

EnergyModel build_model_from(const json& cfg, const Mesh& m,
                             const Operators& ops,
                             const BackgroundCurvature& bg) {
  const auto& pr = cfg["prescription"];
  const CurvatureData data = make_prescription(
      m, pr["p0_angle"].get<double>(), pr["amplitude_f"].get<double>(),
      pr["amplitude_h"].get<double>());
  EnergyModel em = make_model(m, ops, bg, data);
  return with_parameters(em, cfg["parameters"]["mu"].get<double>(),
                         cfg["parameters"]["lambda"].get<double>());
}

json point_record(const CriticalPoint& cp) {
  return json{{"converged", cp.converged},
              {"energy", cp.energy},
              {"grad_norm", cp.grad_norm},
              {"gb_residual", cp.gb_residual},
              {"min_eigenvalue", cp.min_eigenvalue},
              {"iterations", cp.iterations},
              {"kind", cp.kind == PointKind::minimizer
                           ? "minimizer"
                           : (cp.kind == PointKind::saddle ? "saddle"
                                                           : "unknown")},
              {"note", cp.note}};
}

void write_field_csv(const fs::path& p, const Mesh& m, const Vec& u) {
  std::FILE* f = std::fopen(p.string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::fprintf(f, "x,y,u\n");
  for (int i = 0; i < m.num_vertices(); ++i) {
    std::fprintf(f, "%.17g,%.17g,%.17g\n", m.vertices(i, 0), m.vertices(i, 1),
                 u[i]);
  }
  std::fclose(f);
}

int cmd_mesh(const Workspace& ws) {
  const Mesh m = build_mesh_from(ws.cfg);
  const Operators ops = assemble_operators(m);
  const BackgroundCurvature bg = background_curvature(m, ops);
  {
    std::ofstream mf(ws.out / "mesh.txt");
    write_mesh(mf, m);
  }
  double area = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) area += m.area(t);
  json rep{{"n", m.n},
           {"rho", m.hole_radius},
           {"num_vertices", m.num_vertices()},
           {"num_triangles", m.num_triangles()},
           {"num_edges", m.num_edges()},
           {"euler_characteristic", m.euler_characteristic()},
           {"boundary_vertices", static_cast<int>(m.boundary_loop.size())},
           {"defect_sum", bg.defect_sum},
           {"perimeter", m.boundary_length()},
           {"area", area},
           {"min_angle_deg", m.min_angle_deg()}};
  write_json(ws.out / "mesh_report.json", rep);
  return 0;
}

int cmd_solve(const Workspace& ws) {
  const Mesh m = build_mesh_from(ws.cfg);
  const Operators ops = assemble_operators(m);
  const BackgroundCurvature bg = background_curvature(m, ops);
  const EnergyModel em = build_model_from(ws.cfg, m, ops, bg);
  const auto& sv = ws.cfg["solver"];
  const CriticalPoint cp =
      solve_minimizer_pair(em, sv["tol"].get<double>(),
                           sv["max_iter"].get<int>(), ws.seed);
  json rep = point_record(cp);
  rep["mu"] = em.data.mu;
  rep["lambda"] = em.data.lambda;
  rep["u_min"] = cp.u.size() ? cp.u.minCoeff() : 0.0;
  rep["u_max"] = cp.u.size() ? cp.u.maxCoeff() : 0.0;
  const bool ok = cp.converged && cp.kind == PointKind::minimizer;
  rep["certified"] = ok;
  write_json(ws.out / "solve_report.json", rep);
  write_field_csv(ws.out / "solution.csv", m, cp.u);
  return ok ? 0 : 3;
}

int cmd_mpass(const Workspace& ws) {
  const Mesh m = build_mesh_from(ws.cfg);
  const Operators ops = assemble_operators(m);
  const BackgroundCurvature bg = background_curvature(m, ops);
  const EnergyModel em = build_model_from(ws.cfg, m, ops, bg);
  const auto& sv = ws.cfg["solver"];
  const auto& mp = ws.cfg["mpass"];

  const EnergyModel zero = with_parameters(em, 0.0, 0.0);
  const CriticalPoint u0 = newton(zero, Vec::Zero(m.num_vertices()),
                                  sv["tol"].get<double>(),
                                  sv["max_iter"].get<int>(), false);
  if (!u0.converged) throw std::runtime_error("base (0,0) solve failed");
  const CriticalPoint umin =
      newton(em, u0.u, sv["tol"].get<double>(), sv["max_iter"].get<int>(),
             true, sv["k_eigen"].get<int>(), ws.seed);

  TestFunctionSpec tf;
  tf.mu = em.data.mu;
  const V2 q = m.vertices.row(em.data.p0).transpose();
  const Vec w = build_test_function(m, q, tf);
  const FarEndpoint fe = find_far_endpoint(em, u0.u, w);

  MountainPassOptions opts;
  opts.tol_path = mp["tol_path"].get<double>();
  opts.deform.max_sweeps = mp["max_sweeps"].get<int>();
  opts.deform.eta0 = mp["eta0"].get<double>();
  opts.newton_tol = sv["tol"].get<double>();
  opts.newton_max_iter = sv["max_iter"].get<int>();
  opts.k_eigen = sv["k_eigen"].get<int>();
  opts.seed = ws.seed;

  json rep{{"mu", em.data.mu},
           {"lambda", em.data.lambda},
           {"s_used", fe.s_used},
           {"minimizer", point_record(umin)},
           {"minimizer_negative_count", 0}};
  int code = 0;
  try {
    const MountainPassResult r =
        mountain_pass(em, u0.u, fe.v, mp["P"].get<int>(), opts);
    const Vec diff = r.saddle.u - umin.u;
    const double sep =
        std::sqrt(ops.mass.dot(Vec(diff.array().square().matrix())));
    rep["saddle"] = point_record(r.saddle);
    rep["c_level"] = r.c_level;
    rep["sigma_min"] = r.certificate.sigma_min;
    rep["negative_count"] = r.certificate.negative_count;
    rep["area_mass"] = r.area_mass;
    rep["boundary_mass"] = r.boundary_mass;
    rep["separation_mass_norm"] = sep;
    rep["sweeps"] = r.sweeps;
    rep["note"] = r.note;

    std::FILE* f =
        std::fopen((ws.out / "path_energies.csv").string().c_str(), "w");
    if (f) {
      std::fprintf(f, "sweep,max_energy\n");
      for (std::size_t i = 0; i < r.max_energy_history.size(); ++i) {
        std::fprintf(f, "%zu,%.17g\n", i + 1, r.max_energy_history[i]);
      }
      std::fclose(f);
    }
    f = std::fopen((ws.out / "path_final.csv").string().c_str(), "w");
    if (f) {
      std::fprintf(f, "node,energy\n");
      for (std::size_t i = 0; i < r.path.energies.size(); ++i) {
        std::fprintf(f, "%zu,%.17g\n", i, r.path.energies[i]);
      }
      std::fclose(f);
    }
    write_field_csv(ws.out / "saddle.csv", m, r.saddle.u);

    const bool ok = r.converged && umin.converged &&
                    umin.kind == PointKind::minimizer &&
                    r.certificate.negative_count >= 1;
    rep["certified_pair"] = ok;
    code = ok ? 0 : 3;
  } catch (const CollapseError& e) {
    rep["error"] = e.what();
    code = 3;
  }
  write_field_csv(ws.out / "minimizer.csv", m, umin.u);
  write_json(ws.out / "mpass_report.json", rep);
  return code;
}

int cmd_sweep(const Workspace& ws) {
  const Mesh m = build_mesh_from(ws.cfg);
  const Operators ops = assemble_operators(m);
  const BackgroundCurvature bg = background_curvature(m, ops);
  const EnergyModel em = build_model_from(ws.cfg, m, ops, bg);

  SweepSchedule sch;
  sch.lambda0 = ws.cfg["schedule"]["lambda0"].get<double>();
  sch.levels = ws.cfg["schedule"]["levels"].get<int>();
  const SweepResult sw =
      sweep(em, sch, ws.cfg["mpass"]["P"].get<int>(), ws.seed);

  json levels = json::array();
  std::FILE* f = std::fopen((ws.out / "sweep.csv").string().c_str(), "w");
  if (f) {
    std::fprintf(f,
                 "level,mu,lambda,converged,c_level,umax,area_mass,"
                 "boundary_mass,mass_sum,total_curvature,r_n,r_over_lambda,"
                 "Lambda,s0,t0,c_inf,d_inf,rms\n");
  }
  bool all_converged = !sw.levels.empty();
  for (const auto& rec : sw.levels) {
    json jl{{"k", rec.k},
            {"mu", rec.mu},
            {"lambda", rec.lambda},
            {"converged", rec.converged},
            {"minimizer_energy", rec.minimizer_energy},
            {"c_level", rec.c_level},
            {"sigma_min", rec.sigma_min},
            {"negative_count", rec.negative_count},
            {"umax", rec.umax},
            {"area_mass", rec.area_mass},
            {"boundary_mass", rec.boundary_mass},
            {"total_curvature", rec.total_curvature},
            {"r_n", rec.r_n},
            {"r_over_lambda", rec.r_over_lambda},
            {"note", rec.note}};
    if (rec.profile) {
      jl["peak"] = {rec.profile->x_n.x(), rec.profile->x_n.y()};
      jl["t0_est"] = rec.profile->t0_est;
      jl["peak_on_wrong_region"] = rec.profile->peak_on_wrong_region;
    }
    if (rec.fit) {
      jl["fit"] = {{"Lambda", rec.fit->Lambda}, {"s0", rec.fit->s0},
                   {"t0", rec.fit->t0},         {"c_inf", rec.fit->c_inf},
                   {"d_inf", rec.fit->d_inf},   {"rms", rec.fit->rms_residual}};
    }
    levels.push_back(jl);
    all_converged = all_converged && rec.converged;
    if (f) {
      std::fprintf(
          f, "%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
             "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
          rec.k, rec.mu, rec.lambda, rec.converged ? 1 : 0, rec.c_level,
          rec.umax, rec.area_mass, rec.boundary_mass,
          rec.area_mass + rec.boundary_mass, rec.total_curvature, rec.r_n,
          rec.r_over_lambda, rec.fit ? rec.fit->Lambda : 0.0,
          rec.fit ? rec.fit->s0 : 0.0, rec.fit ? rec.fit->t0 : 0.0,
          rec.fit ? rec.fit->c_inf : 0.0, rec.fit ? rec.fit->d_inf : 0.0,
          rec.fit ? rec.fit->rms_residual : 0.0);
    }
  }
  if (f) std::fclose(f);

  const BlowupCount bc = count_blowup_points(
      sw, ws.cfg["schedule"]["cluster_threshold"].get<double>());
  json centers = json::array();
  for (const auto& c : bc.centers) centers.push_back({c.x(), c.y()});
  json rep{{"levels", levels},
           {"mass_bounds_ok", sw.mass_bounds_ok},
           {"max_total_curvature", sw.max_total_curvature},
           {"umax_increasing", sw.umax_increasing},
           {"r_ratio_decreasing_last4", sw.r_ratio_decreasing_last4},
           {"blowup_points", bc.N},
           {"blowup_centers", centers},
           {"blowup_n_le_3", bc.n_le_3},
           {"blowup_case_consistent", bc.case_consistent},
           {"peak_distance_constant", bc.C_peak}};
  write_json(ws.out / "sweep_report.json", rep);
  return all_converged ? 0 : 3;
}

int cmd_liouville(const Workspace& ws) {
  const auto& lv = ws.cfg["liouville"];
  json rep;
  int code = 0;

  if (lv["grid"].get<bool>()) {
    std::FILE* f =
        std::fopen((ws.out / "liouville_grid.csv").string().c_str(), "w");
    if (f) {
      std::fprintf(f,
                   "c_inf,d_inf,V0,H0,K0,d,beta,err_boundary_identity,"
                   "err_area_identity,pohozaev_residual\n");
    }
    double max_err = 0.0;
    bool all_tails = true;
    const double vals[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double c : vals) {
      for (double d : vals) {
        if (c == 0.0 && d == 0.0) continue;
        const HalfPlaneProfile p = bubble_closed_form(
            lv["Lambda"].get<double>(), lv["s0"].get<double>(),
            lv["t0"].get<double>(), c, d);
        const LiouvilleReport r = pohozaev_residual(p);
        const double beta = 2.0 * kPi * d / std::sqrt(d * d + c);
        const double e1 = std::abs(d * r.H0 - beta);
        const double e2 = std::abs(c * r.V0 - (2.0 * kPi - beta));
        max_err = std::max(max_err, std::max(e1, e2));
        all_tails = all_tails && r.tail_converged;
        if (f) {
          std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                          "%.17g,%.17g\n",
                       c, d, r.V0, r.H0, r.K0, r.d, beta, e1, e2, r.residual);
        }
      }
    }
    if (f) std::fclose(f);
    rep["beta_identity_max_error"] = max_err;
    rep["tails_converged"] = all_tails;
    if (max_err > 1e-4 || !all_tails) code = 3;
  } else {
    const HalfPlaneProfile p = bubble_closed_form(
        lv["Lambda"].get<double>(), lv["s0"].get<double>(),
        lv["t0"].get<double>(), lv["c_inf"].get<double>(),
        lv["d_inf"].get<double>());
    const LiouvilleReport r = pohozaev_residual(p);
    rep["report"] = {{"V0", r.V0},
                     {"H0", r.H0},
                     {"K0", r.K0},
                     {"d", r.d},
                     {"beta", r.beta},
                     {"pohozaev_lhs", r.pohozaev_lhs},
                     {"residual", r.residual},
                     {"tail_converged", r.tail_converged}};
    if (!r.tail_converged) code = 3;
  }

  const Eigen::Matrix2d A = -Eigen::Matrix2d::Identity();
  const HalfPlaneProfile cand = fit_system_candidate(A);
  const CertificateResult cert =
      nonexistence_certificate(A, cand, lv["pde_tol"].get<double>());
  rep["certificate"] = {
      {"verdict", cert.verdict == CertVerdict::Inconsistent
                      ? "inconsistent"
                      : (cert.verdict == CertVerdict::Inapplicable
                             ? "inapplicable"
                             : "consistent")},
      {"max_pde_residual", cert.max_pde_residual},
      {"d", cert.report.d},
      {"pohozaev_lhs", cert.report.pohozaev_lhs},
      {"note", cert.note},
      {"candidate",
       {{"Lambda", cand.params.Lambda},
        {"s0", cand.params.s0},
        {"t0", cand.params.t0},
        {"c_inf", cand.params.c_inf},
        {"d_inf", cand.params.d_inf}}}};
  write_json(ws.out / "liouville_report.json", rep);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curvature boundary-value laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir = "out";
  int workers = 0;  // accepted for interface stability; scans run sequentially
  int seed_flag = -1;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", outdir, "output directory");
  app.add_option("--workers", workers, "worker count hint");
  app.add_option("--seed", seed_flag, "override config seed");

  auto* c_mesh = app.add_subcommand("mesh", "build mesh, report invariants");
  auto* c_solve = app.add_subcommand("solve", "certified minimizer solve");
  auto* c_mpass = app.add_subcommand("mpass", "mountain-pass saddle search");
  auto* c_sweep = app.add_subcommand("sweep", "coupled parameter sweep");
  auto* c_liou = app.add_subcommand("liouville", "half-plane analytics");
  for (auto* c : {c_mesh, c_solve, c_mpass, c_sweep, c_liou}) {
    c->fallthrough();  // --config/--out may follow the subcommand name
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const Workspace ws = prepare(config_path, outdir, seed_flag);
    if (c_mesh->parsed()) return cmd_mesh(ws);
    if (c_solve->parsed()) return cmd_solve(ws);
    if (c_mpass->parsed()) return cmd_mpass(ws);
    if (c_sweep->parsed()) return cmd_sweep(ws);
    if (c_liou->parsed()) return cmd_liouville(ws);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ScanExhausted& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 3;
  } catch (const NonConvergentTail& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
