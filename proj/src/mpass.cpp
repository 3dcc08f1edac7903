#include "curvlab/mpass.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace curvlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Vec build_test_function(const Mesh& mesh, const V2& p0,
                        const TestFunctionSpec& spec) {
  if (!(spec.mu > 0.0) || spec.mu >= 1.0) {
    throw std::invalid_argument("test function needs mu in (0,1)");
  }
  const double rho = mesh.hole_radius;
  double L = spec.L;
  if (L == 0.0) L = std::sqrt(spec.mu) / (0.499 * rho);
  const double support = std::sqrt(spec.mu) / L;
  if (!(support < 0.5 * rho)) {
    throw std::invalid_argument("test function support must stay below rho/2");
  }

  Vec w = Vec::Zero(mesh.num_vertices());
  int inside = 0;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const V2 d = wrap_delta(mesh.vertices.row(i).transpose(), p0);
    const double y = L * d.norm() / std::sqrt(spec.mu);
    if (y >= 1.0) continue;
    ++inside;
    w[i] = spec.s * ((y <= spec.mu) ? -std::log(spec.mu) : -std::log(y));
  }
  if (inside < 8) {
    throw ResolutionError(
        "test function support resolved by fewer than 8 vertices; raise n or mu");
  }
  return w;
}

FarEndpoint find_far_endpoint(const EnergyModel& em, const Vec& u0,
                              const Vec& w) {
  const CriticalPoint min_cp = newton(em, u0, 1e-10, 60, /*certify=*/false);
  if (!min_cp.converged) {
    throw std::runtime_error("far endpoint scan: minimizer solve failed");
  }
  const double floor = min_cp.energy - 1.0;
  for (double s = 1.0; s <= 1048576.0; s *= 2.0) {
    const Vec v = u0 + s * w;
    const auto E = energy(em, v);
    if (!E) {
      throw ScanExhausted("far endpoint overflowed before the energy drop");
    }
    if (*E < floor) return FarEndpoint{v, s, *E, floor};
  }
  throw ScanExhausted(
      "no energy drop up to s = 2^20 (mu too small for this mesh)");
}

DeformResult deform_path(const PathEnergy& pe, const Vec& p0, const Vec& p1,
                         int P, double tol_path, const DeformOptions& opts) {
  if (P < 4) throw std::invalid_argument("path needs at least 4 nodes");
  DeformResult res;
  auto& nodes = res.path.nodes;
  auto& energies = res.path.energies;
  nodes.resize(P);
  energies.assign(P, 0.0);
  for (int k = 0; k < P; ++k) {
    const double t = static_cast<double>(k) / (P - 1);
    nodes[k] = p0 + t * (p1 - p0);
    const auto E = pe.energy(nodes[k]);
    if (!E) throw std::invalid_argument("initial path hits an overflow node");
    energies[k] = *E;
  }

  auto interior_max = [&]() {
    int arg = 1;
    for (int k = 2; k < P - 1; ++k) {
      if (energies[k] > energies[arg]) arg = k;
    }
    return arg;
  };

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    res.sweeps = sweep;
    const int kmax = interior_max();
    res.path.max_index = kmax;
    const double emax = energies[kmax];
    const double floor = std::min(energies.front(), energies.back());
    const double gap = std::max(opts.gap_frac * (emax - floor),
                                1e-12 * (1.0 + std::abs(emax)));

    const auto gtop = pe.grad(nodes[kmax]);
    res.gmax = gtop ? gtop->norm() : std::numeric_limits<double>::infinity();
    if (res.gmax < tol_path) {
      res.converged = true;
      break;
    }

    // move every interior node downhill; the cutoff keeps the deformation
    // concentrated near the top level, nodes a full gap below stay put
    const std::vector<double> frozen = energies;
    const double eta = opts.eta0 / std::sqrt(static_cast<double>(sweep));
    for (int k = 1; k < P - 1; ++k) {
      const double s = (frozen[k] - emax) / gap;
      double phi = 0.0;
      if (s >= -0.5) {
        phi = 1.0;
      } else if (s > -1.0) {
        phi = 2.0 * (s + 1.0);
      }
      if (phi == 0.0) continue;
      const auto g = pe.grad(nodes[k]);
      if (!g) continue;
      const Vec d = pe.precond_solve(*g);
      const double dn = std::sqrt(std::max(0.0, pe.inner(d, d)));
      if (dn <= 0.0) continue;
      double step = std::min(phi * eta, dn);
      Vec cand = nodes[k] - (step / dn) * d;
      auto E = pe.energy(cand);
      while (!E && step > 1e-16) {  // truncate instead of overflowing a node
        step *= 0.5;
        cand = nodes[k] - (step / dn) * d;
        E = pe.energy(cand);
      }
      if (!E) continue;
      nodes[k] = cand;
      energies[k] = *E;
    }

    // re-equidistribute in B-arclength so nodes do not drain off the barrier
    std::vector<double> cum(P, 0.0);
    for (int k = 1; k < P; ++k) {
      const Vec d = nodes[k] - nodes[k - 1];
      cum[k] = cum[k - 1] + std::sqrt(std::max(0.0, pe.inner(d, d)));
    }
    if (cum.back() > 0.0) {
      std::vector<Vec> fresh(P);
      fresh.front() = nodes.front();
      fresh.back() = nodes.back();
      int seg = 1;
      for (int k = 1; k < P - 1; ++k) {
        const double target = cum.back() * k / (P - 1);
        while (seg < P - 1 && cum[seg] < target) ++seg;
        const double den = cum[seg] - cum[seg - 1];
        const double t = den > 0.0 ? (target - cum[seg - 1]) / den : 0.0;
        fresh[k] = (1.0 - t) * nodes[seg - 1] + t * nodes[seg];
      }
      nodes = std::move(fresh);
      for (int k = 1; k < P - 1; ++k) {
        const auto E = pe.energy(nodes[k]);
        energies[k] = E ? *E : std::numeric_limits<double>::quiet_NaN();
      }
    }

    res.path.max_index = interior_max();
    res.max_energy_history.push_back(energies[res.path.max_index]);
    const int nh = static_cast<int>(res.max_energy_history.size());
    if (sweep > 60 && nh > opts.stall_window) {
      const double now = res.max_energy_history[nh - 1];
      const double then = res.max_energy_history[nh - 1 - opts.stall_window];
      if (std::abs(now - then) < opts.stall_rel * std::max(1.0, std::abs(now))) {
        res.stalled = true;
        break;
      }
    }
  }
  res.path.max_index = interior_max();
  return res;
}

namespace {

// FEM functional behind the PathEnergy interface, H^1 preconditioner B
struct ModelPathEnergy final : PathEnergy {
  const EnergyModel* em;
  Eigen::SimplicialLDLT<SpMat> bsolve;

  explicit ModelPathEnergy(const EnergyModel& m) : em(&m) {
    bsolve.compute(m.B);
    if (bsolve.info() != Eigen::Success) {
      throw std::runtime_error("preconditioner factorization failed");
    }
  }
  int dim() const override { return em->mesh->num_vertices(); }
  std::optional<double> energy(const Vec& u) const override {
    return curvlab::energy(*em, u);
  }
  std::optional<Vec> grad(const Vec& u) const override {
    return curvlab::gradient(*em, u);
  }
  Vec precond_solve(const Vec& r) const override { return bsolve.solve(r); }
  double inner(const Vec& a, const Vec& b) const override {
    return a.dot(em->B * b);
  }
};

}  // namespace

MountainPassResult mountain_pass(const EnergyModel& em, const Vec& u0,
                                 const Vec& v, int P,
                                 const MountainPassOptions& opts) {
  if (P < 16) throw std::invalid_argument("mountain pass needs P >= 16");
  const auto E0 = energy(em, u0);
  const auto E1 = energy(em, v);
  if (!E0 || !E1 || !(*E1 < *E0)) {
    throw std::invalid_argument("far endpoint must sit strictly below u0");
  }

  ModelPathEnergy pe(em);
  MountainPassResult out;
  DeformResult dr = deform_path(pe, u0, v, P, opts.tol_path, opts.deform);
  out.path = dr.path;
  out.max_energy_history = dr.max_energy_history;
  out.sweeps = dr.sweeps;
  out.note = dr.converged ? "path gradient converged"
                          : (dr.stalled ? "path stalled; polishing from max node"
                                        : "sweep budget exhausted");

  out.saddle = newton(em, dr.path.nodes[dr.path.max_index], opts.newton_tol,
                      opts.newton_max_iter, /*certify=*/false);
  out.certificate =
      min_eigen(em, out.saddle.u, opts.k_eigen, opts.seed);
  out.saddle.min_eigenvalue = out.certificate.sigma_min;
  if (out.certificate.converged) {
    out.saddle.kind = out.certificate.negative_count == 0
                          ? PointKind::minimizer
                          : PointKind::saddle;
  }
  if (out.saddle.converged && out.certificate.negative_count == 0) {
    throw CollapseError(
        "path max refined to a point with no unstable direction; increase P");
  }

  out.c_level = out.saddle.energy;
  const Vec e2u = (2.0 * out.saddle.u.array()).exp().matrix();
  const Vec eu = out.saddle.u.array().exp().matrix();
  out.area_mass = 0.5 * em.data.mu * em.ops.mass.dot(e2u);
  out.boundary_mass = em.data.lambda * em.ops.boundary_mass.dot(eu);
  out.converged = out.saddle.converged && out.certificate.converged;
  return out;
}

LevelScanResult level_monotonicity_scan(const EnergyModel& base,
                                        const std::vector<double>& mus,
                                        const std::vector<double>& lambdas,
                                        int P, unsigned seed) {
  LevelScanResult res;
  res.mus = mus;
  res.lambdas = lambdas;
  const int nm = static_cast<int>(mus.size());
  const int nl = static_cast<int>(lambdas.size());
  res.c = Eigen::MatrixXd::Constant(nm, nl,
                                    std::numeric_limits<double>::quiet_NaN());
  res.sigma_min = res.c;

  const EnergyModel zero = with_parameters(base, 0.0, 0.0);
  const CriticalPoint u0 =
      newton(zero, Vec::Zero(base.mesh->num_vertices()), 1e-10, 60, false);
  if (!u0.converged) throw std::runtime_error("level scan: base solve failed");

  const double mu_min = *std::min_element(mus.begin(), mus.end());
  TestFunctionSpec tf;
  tf.mu = mu_min;
  const V2 q = base.mesh->vertices.row(base.data.p0).transpose();
  const Vec w = build_test_function(*base.mesh, q, tf);

  std::vector<EnergyModel> cells;
  std::vector<double> floors;
  cells.reserve(nm * nl);
  for (int i = 0; i < nm; ++i) {
    for (int j = 0; j < nl; ++j) {
      cells.push_back(with_parameters(base, mus[i], lambdas[j]));
      const CriticalPoint mc = newton(cells.back(), u0.u, 1e-10, 60, false);
      if (!mc.converged) {
        throw std::runtime_error("level scan: cell minimizer failed");
      }
      floors.push_back(mc.energy - 1.0);
    }
  }

  // one comparison endpoint for the whole grid: push s until the drop
  // condition holds in every cell at once
  double s_shared = 0.0;
  for (double s = 1.0; s <= 1048576.0; s *= 2.0) {
    bool all = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto E = energy(cells[c], u0.u + s * w);
      if (!E || !(*E < floors[c])) {
        all = false;
        break;
      }
    }
    if (all) {
      s_shared = s;
      break;
    }
  }
  if (s_shared == 0.0) {
    throw ScanExhausted("level scan: no shared endpoint up to s = 2^20");
  }
  res.s_shared = s_shared;
  const Vec v = u0.u + s_shared * w;

  MountainPassOptions opts;
  opts.seed = seed;
  res.cell_notes.assign(nm * nl, "");
  for (int i = 0; i < nm; ++i) {
    for (int j = 0; j < nl; ++j) {
      const int c = i * nl + j;
      try {
        const MountainPassResult r = mountain_pass(cells[c], u0.u, v, P, opts);
        if (r.converged) {
          res.c(i, j) = r.c_level;
          res.sigma_min(i, j) = r.certificate.sigma_min;
        } else {
          res.cell_notes[c] = "unconverged: " + r.note;
        }
      } catch (const std::exception& e) {
        res.cell_notes[c] = e.what();
      }
    }
  }

  // path-class tolerance from the node-count sensitivity of the central cell
  const int ic = nm / 2, jc = nl / 2;
  double clo = std::numeric_limits<double>::infinity(), chi = -clo;
  for (int Pk : {17, 33, 65}) {
    try {
      const MountainPassResult r =
          mountain_pass(cells[ic * nl + jc], u0.u, v, Pk, opts);
      if (r.converged) {
        clo = std::min(clo, r.c_level);
        chi = std::max(chi, r.c_level);
      }
    } catch (const std::exception&) {
    }
  }
  res.delta_path = (chi >= clo) ? (chi - clo) : std::numeric_limits<double>::quiet_NaN();

  auto mono = [&](bool along_mu) {
    const double slack = std::isfinite(res.delta_path) ? res.delta_path : 0.0;
    for (int i = 0; i < nm; ++i) {
      for (int j = 0; j < nl; ++j) {
        const int i2 = along_mu ? i + 1 : i;
        const int j2 = along_mu ? j : j + 1;
        if (i2 >= nm || j2 >= nl) continue;
        const double a = res.c(i, j), b = res.c(i2, j2);
        if (!std::isfinite(a) || !std::isfinite(b)) return false;
        if (b > a + slack + 1e-12) return false;
      }
    }
    return true;
  };
  res.monotone_mu = mono(true);
  res.monotone_lambda = mono(false);

  res.bound_ok = true;
  for (int i = 0; i < nm; ++i) {
    for (int j = 0; j < nl; ++j) {
      if (mus[i] > 1e-2) continue;
      if (!std::isfinite(res.c(i, j)) ||
          res.c(i, j) > 4.0 * kPi * std::log(2.0 / mus[i])) {
        res.bound_ok = false;
      }
    }
  }
  return res;
}

}  // namespace curvlab
