#include "curvlab/model.hpp"

#include <cmath>
#include <limits>

namespace curvlab {

namespace {
constexpr double kPi = 3.14159265358979323846;

double sin2pi(double t) {
  const double s = std::sin(kPi * t);
  return s * s;
}
}  // namespace

double prescription_f(const V2& x, const V2& q, double amplitude) {
  return -amplitude * (sin2pi(x.x() - q.x()) + sin2pi(x.y() - q.y()));
}

CurvatureData make_prescription(const Mesh& m, double p0_angle,
                                double amplitude_f, double amplitude_h) {
  if (amplitude_f <= 0.0 || amplitude_h <= 0.0) {
    throw validation_error("prescription amplitudes must be positive");
  }
  CurvatureData cd;
  cd.amplitude_f = amplitude_f;
  cd.amplitude_h = amplitude_h;

  // boundary vertex nearest the requested circle angle
  double best = 1e300;
  for (int v : m.boundary_loop) {
    const V2 d = V2(m.vertices.row(v)) - m.hole_center;
    double diff = std::atan2(d.y(), d.x()) - p0_angle;
    diff = std::remainder(diff, 2.0 * kPi);
    if (std::abs(diff) < best) {
      best = std::abs(diff);
      cd.p0 = v;
    }
  }
  const V2 q = m.vertices.row(cd.p0);

  cd.f.resize(m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v) {
    cd.f[v] = prescription_f(m.vertices.row(v), q, amplitude_f);
  }

  // arclength position of each boundary vertex, measured from p0 along the loop
  const int L = static_cast<int>(m.boundary_loop.size());
  int start = 0;
  while (m.boundary_loop[start] != cd.p0) ++start;
  cd.h = Vec::Zero(m.num_vertices());
  double s = 0.0, total = m.boundary_length();
  for (int i = 0; i < L; ++i) {
    const int a = m.boundary_loop[(start + i) % L];
    const int b = m.boundary_loop[(start + i + 1) % L];
    cd.h[a] = -amplitude_h * sin2pi(s / total);  // period = loop length
    s += wrap_delta(V2(m.vertices.row(b)), V2(m.vertices.row(a))).norm();
  }
  return cd;
}

EnergyModel make_model(const Mesh& m, Operators ops, BackgroundCurvature bg,
                       CurvatureData data) {
  EnergyModel em;
  em.mesh = &m;
  em.ops = std::move(ops);
  em.bg = std::move(bg);
  em.data = std::move(data);
  em.f_mu = em.data.f.array() + em.data.mu;
  em.h_lam = Vec::Zero(m.num_vertices());
  for (int v : m.boundary_loop) em.h_lam[v] = em.data.h[v] + em.data.lambda;
  SpMat D(m.num_vertices(), m.num_vertices());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v) {
    trips.emplace_back(v, v, em.ops.mass[v]);
  }
  D.setFromTriplets(trips.begin(), trips.end());
  em.B = em.ops.stiffness + D;
  em.B.makeCompressed();
  return em;
}

EnergyModel with_parameters(const EnergyModel& base, double mu, double lambda) {
  EnergyModel em = base;
  em.data.mu = mu;
  em.data.lambda = lambda;
  em.f_mu = em.data.f.array() + mu;
  em.h_lam.setZero();
  for (int v : base.mesh->boundary_loop) em.h_lam[v] = em.data.h[v] + lambda;
  return em;
}

std::optional<double> energy(const EnergyModel& em, const Vec& u) {
  if (diverges(u)) return std::nullopt;
  const Vec e2u = (2.0 * u).array().exp();
  const Vec eu = u.array().exp();
  const auto& M = em.ops.mass;
  const auto& Bm = em.ops.boundary_mass;
  double E = 0.5 * u.dot(em.ops.stiffness * u);
  E += (M.array() * em.bg.K_g.array() * u.array()).sum();
  E -= 0.5 * (M.array() * em.f_mu.array() * e2u.array()).sum();
  E += (Bm.array() * em.bg.kappa_g.array() * u.array()).sum();
  E -= (Bm.array() * em.h_lam.array() * eu.array()).sum();
  return E;
}

std::optional<Vec> gradient(const EnergyModel& em, const Vec& u) {
  if (diverges(u)) return std::nullopt;
  const Vec e2u = (2.0 * u).array().exp();
  const Vec eu = u.array().exp();
  Vec g = em.ops.stiffness * u;
  g.array() += em.ops.mass.array() * (em.bg.K_g.array() - em.f_mu.array() * e2u.array());
  g.array() += em.ops.boundary_mass.array() *
               (em.bg.kappa_g.array() - em.h_lam.array() * eu.array());
  return g;
}

std::optional<SpMat> hessian(const EnergyModel& em, const Vec& u) {
  if (diverges(u)) return std::nullopt;
  const Vec e2u = (2.0 * u).array().exp();
  const Vec eu = u.array().exp();
  const Vec diag = -2.0 * em.ops.mass.array() * em.f_mu.array() * e2u.array() -
                   em.ops.boundary_mass.array() * em.h_lam.array() * eu.array();
  SpMat D(u.size(), u.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(u.size());
  for (int v = 0; v < u.size(); ++v) trips.emplace_back(v, v, diag[v]);
  D.setFromTriplets(trips.begin(), trips.end());
  SpMat H = em.ops.stiffness + D;
  H.makeCompressed();
  return H;
}

std::pair<double, double> pde_residual(const EnergyModel& em, const Vec& u) {
  const auto g = gradient(em, u);
  if (!g) return {std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()};
  double interior = 0.0, boundary = 0.0;
  for (int v = 0; v < u.size(); ++v) {
    if (em.mesh->on_boundary[v]) {
      boundary += (*g)[v] * (*g)[v] / em.ops.boundary_mass[v];
    } else {
      interior += (*g)[v] * (*g)[v] / em.ops.mass[v];
    }
  }
  return {std::sqrt(interior), std::sqrt(boundary)};
}

CurvatureIntegrals curvature_integrals(const EnergyModel& em, const Vec& u) {
  const Vec e2u = (2.0 * u).array().exp();
  const Vec eu = u.array().exp();
  CurvatureIntegrals ci;
  ci.area_term = (em.ops.mass.array() * em.f_mu.array() * e2u.array()).sum();
  ci.boundary_term =
      (em.ops.boundary_mass.array() * em.h_lam.array() * eu.array()).sum();
  ci.gb_residual = ci.area_term + ci.boundary_term + 2.0 * kPi;
  return ci;
}

}  // namespace curvlab
