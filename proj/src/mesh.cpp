#include "curvlab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace curvlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Snap band half-width in cell units. Slightly above 1/sqrt(2) so that the
// two grid vertices of any cell edge crossing the circle cannot both escape
// the band; keeps the polygonal boundary inscribed in the circle.
constexpr double kSnapBand = 0.7072;

// Boundary chords shorter than this fraction of a cell edge get collapsed;
// they would otherwise carry the worst angles of the whole mesh.
constexpr double kCollapseFrac = 0.5;

constexpr double kOnCircleTol = 1e-12;

struct EdgeKey {
  int a, b;
  EdgeKey(int u, int v) : a(std::min(u, v)), b(std::max(u, v)) {}
  bool operator<(const EdgeKey& o) const {
    return a != o.a ? a < o.a : b < o.b;
  }
};

using Pts = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Tris = Eigen::Matrix<int, Eigen::Dynamic, 3>;

// boundary edges = edges incident to exactly one triangle
std::vector<std::pair<int, int>> boundary_edges(const Tris& tris) {
  std::map<EdgeKey, int> count;
  for (int t = 0; t < tris.rows(); ++t) {
    for (int k = 0; k < 3; ++k) {
      ++count[EdgeKey(tris(t, k), tris(t, (k + 1) % 3))];
    }
  }
  std::vector<std::pair<int, int>> out;
  for (const auto& [e, c] : count) {
    if (c == 1) out.emplace_back(e.a, e.b);
  }
  return out;
}

// drop unused vertices, remap triangle indices
void compact(Pts& pos, Tris& tris) {
  const int nv = static_cast<int>(pos.rows());
  std::vector<int> remap(nv, -1);
  int next = 0;
  for (int t = 0; t < tris.rows(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int& v = tris(t, k);
      if (remap[v] < 0) remap[v] = next++;
    }
  }
  // keep original ordering (grid order) rather than first-use order
  next = 0;
  for (int v = 0; v < nv; ++v) {
    if (remap[v] >= 0) remap[v] = next++;
  }
  Pts np(next, 2);
  for (int v = 0; v < nv; ++v) {
    if (remap[v] >= 0) np.row(remap[v]) = pos.row(v);
  }
  for (int t = 0; t < tris.rows(); ++t) {
    for (int k = 0; k < 3; ++k) tris(t, k) = remap[tris(t, k)];
  }
  pos = std::move(np);
}

V2 project_to_circle(const V2& p, const V2& c, double rho) {
  V2 d = p - c;
  return c + d * (rho / d.norm());
}

}  // namespace

int Mesh::num_edges() const {
  std::set<EdgeKey> edges;
  for (int t = 0; t < triangles.rows(); ++t) {
    for (int k = 0; k < 3; ++k) {
      edges.insert(EdgeKey(triangles(t, k), triangles(t, (k + 1) % 3)));
    }
  }
  return static_cast<int>(edges.size());
}

int Mesh::euler_characteristic() const {
  return num_vertices() - num_edges() + num_triangles();
}

Eigen::Matrix<double, 3, 2> Mesh::corners(int t) const {
  Eigen::Matrix<double, 3, 2> q;
  const V2 p0 = vertices.row(triangles(t, 0));
  q.row(0) = p0;
  for (int k = 1; k < 3; ++k) {
    const V2 pk = vertices.row(triangles(t, k));
    q.row(k) = p0 + wrap_delta(pk, p0);
  }
  return q;
}

double Mesh::area(int t) const {
  const auto q = corners(t);
  const V2 e1 = q.row(1) - q.row(0);
  const V2 e2 = q.row(2) - q.row(0);
  return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
}

Eigen::Vector3d Mesh::angles(int t) const {
  const auto q = corners(t);
  Eigen::Vector3d a;
  for (int k = 0; k < 3; ++k) {
    const V2 u = q.row((k + 1) % 3) - q.row(k);
    const V2 v = q.row((k + 2) % 3) - q.row(k);
    a[k] = std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
  }
  return a;
}

double Mesh::min_angle_deg() const {
  double amin = kPi;
  for (int t = 0; t < num_triangles(); ++t) {
    amin = std::min(amin, angles(t).minCoeff());
  }
  return amin * 180.0 / kPi;
}

double Mesh::boundary_length() const {
  double s = 0.0;
  const int L = static_cast<int>(boundary_loop.size());
  for (int i = 0; i < L; ++i) {
    const V2 a = vertices.row(boundary_loop[i]);
    const V2 b = vertices.row(boundary_loop[(i + 1) % L]);
    s += wrap_delta(b, a).norm();
  }
  return s;
}

Mesh build_torus_with_hole(int n, double rho, double min_angle_floor_deg) {
  if (n < 16) throw validation_error("grid resolution n must be >= 16");
  if (!(rho > 0.0 && rho < 0.45)) {
    throw validation_error("hole radius rho must lie in (0, 0.45)");
  }
  const double h = 1.0 / n;
  const double band = kSnapBand * h;
  const V2 c(0.5, 0.5);
  if (rho + band >= 0.5 - h) {
    throw validation_error("hole too large for this resolution");
  }

  // structured periodic grid
  Pts pos(n * n, 2);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      pos.row(j * n + i) = V2(i * h, j * h);
    }
  }

  // snap near-circle vertices radially onto the circle
  int snapped = 0;
  for (int v = 0; v < pos.rows(); ++v) {
    const V2 p = pos.row(v);
    const double d = (p - c).norm();
    if (std::abs(d - rho) < band) {
      pos.row(v) = project_to_circle(p, c, rho);
      ++snapped;
    }
  }
  if (snapped < 8.0 * n * rho) {
    throw validation_error("hole boundary passes through too few vertices");
  }

  // two triangles per cell, both positively oriented in the chart
  Tris tris(2 * n * n, 3);
  int tcount = 0;
  auto idx = [n](int i, int j) { return ((j % n + n) % n) * n + ((i % n + n) % n); };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = idx(i, j), b = idx(i + 1, j), d2 = idx(i + 1, j + 1), e = idx(i, j + 1);
      tris.row(tcount++) << a, b, d2;
      tris.row(tcount++) << a, d2, e;
    }
  }

  // remove triangles whose three corners all lie on or inside the circle
  auto inside = [&](int v) {
    return (V2(pos.row(v)) - c).norm() <= rho + kOnCircleTol;
  };
  int keep = 0;
  for (int t = 0; t < tris.rows(); ++t) {
    if (!(inside(tris(t, 0)) && inside(tris(t, 1)) && inside(tris(t, 2)))) {
      tris.row(keep++) = tris.row(t);
    }
  }
  tris.conservativeResize(keep, 3);
  compact(pos, tris);

  // collapse short boundary chords (batched disjoint merges per pass)
  const double collapse_tol = kCollapseFrac * h;
  for (int pass = 0; pass < 20; ++pass) {
    auto bedges = boundary_edges(tris);
    std::vector<std::uint8_t> touched(pos.rows(), 0);
    std::vector<std::pair<int, int>> merges;  // (keep, drop)
    for (const auto& [a, b] : bedges) {
      if (touched[a] || touched[b]) continue;
      const V2 pa = pos.row(a);
      const V2 pb = pos.row(b);
      if (wrap_delta(pb, pa).norm() < collapse_tol) {
        touched[a] = touched[b] = 1;
        merges.emplace_back(a, b);
      }
    }
    if (merges.empty()) break;
    for (const auto& [a, b] : merges) {
      const V2 pa = pos.row(a);
      const V2 pb = pos.row(b);
      const V2 mid = pa + 0.5 * wrap_delta(pb, pa);
      pos.row(a) = project_to_circle(V2(wrap01(mid.x()), wrap01(mid.y())), c, rho);
      for (int t = 0; t < tris.rows(); ++t) {
        for (int k = 0; k < 3; ++k) {
          if (tris(t, k) == b) tris(t, k) = a;
        }
      }
    }
    // drop triangles degenerated by the merges
    keep = 0;
    for (int t = 0; t < tris.rows(); ++t) {
      const int a = tris(t, 0), b = tris(t, 1), d2 = tris(t, 2);
      if (a != b && b != d2 && a != d2) tris.row(keep++) = tris.row(t);
    }
    tris.conservativeResize(keep, 3);
    compact(pos, tris);
  }

  Mesh m;
  m.vertices = pos;
  m.triangles = tris;
  m.hole_center = c;
  m.hole_radius = rho;
  m.n = n;

  // boundary loop: walk the directed boundary edges as oriented by their
  // unique owning triangle
  auto bedges = boundary_edges(m.triangles);
  std::map<EdgeKey, std::pair<int, int>> directed;
  for (int t = 0; t < m.triangles.rows(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int u = m.triangles(t, k), v = m.triangles(t, (k + 1) % 3);
      directed[EdgeKey(u, v)] = {u, v};
    }
  }
  std::map<int, int> succ;
  m.on_boundary.assign(m.num_vertices(), 0);
  for (const auto& [a, b] : bedges) {
    const auto [u, v] = directed.at(EdgeKey(a, b));
    if (succ.count(u)) throw quality_error("boundary is not a simple cycle");
    succ[u] = v;
    m.on_boundary[u] = m.on_boundary[v] = 1;
  }
  if (succ.empty()) throw quality_error("mesh has no boundary");
  const int start = succ.begin()->first;
  int cur = start;
  do {
    m.boundary_loop.push_back(cur);
    auto it = succ.find(cur);
    if (it == succ.end()) throw quality_error("boundary walk broke");
    cur = it->second;
  } while (cur != start && m.boundary_loop.size() <= succ.size());
  if (m.boundary_loop.size() != succ.size()) {
    throw quality_error("boundary has more than one loop");
  }

  // invariants
  if (m.euler_characteristic() != -1) {
    throw quality_error("Euler characteristic is not -1");
  }
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (m.area(t) <= 0.0) throw quality_error("nonpositive triangle area");
  }
  if (m.min_angle_deg() < min_angle_floor_deg) {
    std::ostringstream os;
    os << "min angle " << m.min_angle_deg() << " below floor "
       << min_angle_floor_deg;
    throw quality_error(os.str());
  }
  for (int v : m.boundary_loop) {
    const double d = (V2(m.vertices.row(v)) - c).norm();
    if (std::abs(d - rho) > 1e-9) {
      throw quality_error("boundary vertex off the circle");
    }
  }
  return m;
}

Eigen::Matrix3d local_stiffness(const Mesh& m, int t) {
  const auto q = m.corners(t);
  Eigen::Matrix3d K = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) {
    const int a = (k + 1) % 3, b = (k + 2) % 3;
    const V2 u = q.row(a) - q.row(k);
    const V2 v = q.row(b) - q.row(k);
    const double cross = u.x() * v.y() - u.y() * v.x();
    const double w = 0.5 * u.dot(v) / std::abs(cross);
    K(a, a) += w;
    K(b, b) += w;
    K(a, b) -= w;
    K(b, a) -= w;
  }
  return K;
}

Operators assemble_operators(const Mesh& m) {
  Operators ops;
  const int nv = m.num_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(12 * m.num_triangles());
  ops.mass = Vec::Zero(nv);
  ops.negative_cotan_edges = 0;

  for (int t = 0; t < m.num_triangles(); ++t) {
    const Eigen::Matrix3d K = local_stiffness(m, t);
    const double A = m.area(t);
    for (int k = 0; k < 3; ++k) {
      const int a = (k + 1) % 3, b = (k + 2) % 3;
      if (K(a, b) > 0.0) ++ops.negative_cotan_edges;  // cot < 0 at corner k
      ops.mass[m.triangles(t, k)] += A / 3.0;
      for (int l = 0; l < 3; ++l) {
        trips.emplace_back(m.triangles(t, k), m.triangles(t, l), K(k, l));
      }
    }
  }
  ops.stiffness.resize(nv, nv);
  ops.stiffness.setFromTriplets(trips.begin(), trips.end());

  ops.boundary_mass = Vec::Zero(nv);
  const int L = static_cast<int>(m.boundary_loop.size());
  for (int i = 0; i < L; ++i) {
    const int a = m.boundary_loop[i], b = m.boundary_loop[(i + 1) % L];
    const V2 pa = m.vertices.row(a);
    const V2 pb = m.vertices.row(b);
    const double len = wrap_delta(pb, pa).norm();
    ops.boundary_mass[a] += 0.5 * len;
    ops.boundary_mass[b] += 0.5 * len;
  }

  ops.boundary_normals.setZero(nv, 2);
  for (int v : m.boundary_loop) {
    const V2 d = m.hole_center - V2(m.vertices.row(v));
    ops.boundary_normals.row(v) = d.normalized();
  }
  return ops;
}

BackgroundCurvature background_curvature(const Mesh& m, const Operators& ops) {
  const int nv = m.num_vertices();
  Vec angle_sum = Vec::Zero(nv);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const Eigen::Vector3d a = m.angles(t);
    for (int k = 0; k < 3; ++k) angle_sum[m.triangles(t, k)] += a[k];
  }
  BackgroundCurvature bg;
  bg.K_g = Vec::Zero(nv);
  bg.kappa_g = Vec::Zero(nv);
  bg.defect = Vec::Zero(nv);
  for (int v = 0; v < nv; ++v) {
    if (m.on_boundary[v]) {
      bg.defect[v] = kPi - angle_sum[v];
      bg.kappa_g[v] = bg.defect[v] / ops.boundary_mass[v];
    } else {
      bg.defect[v] = 2.0 * kPi - angle_sum[v];
      bg.K_g[v] = bg.defect[v] / ops.mass[v];
    }
  }
  bg.defect_sum = bg.defect.sum();
  return bg;
}

void write_mesh(std::ostream& os, const Mesh& m) {
  os.precision(17);
  os << "torus-hole " << m.n << " " << m.hole_radius << "\n";
  os << "vertices " << m.num_vertices() << "\n";
  for (int v = 0; v < m.num_vertices(); ++v) {
    os << v << " " << m.vertices(v, 0) << " " << m.vertices(v, 1) << " "
       << int(m.on_boundary[v]) << "\n";
  }
  os << "triangles " << m.num_triangles() << "\n";
  for (int t = 0; t < m.num_triangles(); ++t) {
    os << m.triangles(t, 0) << " " << m.triangles(t, 1) << " "
       << m.triangles(t, 2) << "\n";
  }
  os << "loop " << m.boundary_loop.size() << "\n";
  for (std::size_t i = 0; i < m.boundary_loop.size(); ++i) {
    os << m.boundary_loop[i] << (i + 1 < m.boundary_loop.size() ? ' ' : '\n');
  }
}

Mesh read_mesh(std::istream& is) {
  Mesh m;
  std::string tag;
  if (!(is >> tag) || tag != "torus-hole") {
    throw validation_error("bad mesh header");
  }
  is >> m.n >> m.hole_radius;
  int nv = 0, nt = 0, nl = 0;
  is >> tag >> nv;
  if (tag != "vertices") throw validation_error("bad mesh vertex table");
  m.vertices.resize(nv, 2);
  m.on_boundary.assign(nv, 0);
  for (int v = 0; v < nv; ++v) {
    int id, flag;
    is >> id >> m.vertices(v, 0) >> m.vertices(v, 1) >> flag;
    m.on_boundary[v] = static_cast<std::uint8_t>(flag);
  }
  is >> tag >> nt;
  if (tag != "triangles") throw validation_error("bad mesh triangle table");
  m.triangles.resize(nt, 3);
  for (int t = 0; t < nt; ++t) {
    is >> m.triangles(t, 0) >> m.triangles(t, 1) >> m.triangles(t, 2);
  }
  is >> tag >> nl;
  if (tag != "loop") throw validation_error("bad mesh loop table");
  m.boundary_loop.resize(nl);
  for (int i = 0; i < nl; ++i) is >> m.boundary_loop[i];
  if (!is) throw validation_error("truncated mesh file");
  return m;
}

Locator::Locator(const Mesh& m) : mesh_(m) {
  nb_ = std::max(8, 2 * m.n);
  bins_.assign(static_cast<std::size_t>(nb_) * nb_, {});
  lifted_.reserve(m.num_triangles());
  auto bin_of = [this](int bi, int bj) {
    return ((bj % nb_ + nb_) % nb_) * nb_ + ((bi % nb_ + nb_) % nb_);
  };
  for (int t = 0; t < m.num_triangles(); ++t) {
    lifted_.push_back(m.corners(t));
    const auto& q = lifted_.back();
    const double pad = 1e-12;
    const int i0 = static_cast<int>(std::floor((q.col(0).minCoeff() - pad) * nb_));
    const int i1 = static_cast<int>(std::floor((q.col(0).maxCoeff() + pad) * nb_));
    const int j0 = static_cast<int>(std::floor((q.col(1).minCoeff() - pad) * nb_));
    const int j1 = static_cast<int>(std::floor((q.col(1).maxCoeff() + pad) * nb_));
    for (int bj = j0; bj <= j1; ++bj) {
      for (int bi = i0; bi <= i1; ++bi) {
        bins_[bin_of(bi, bj)].push_back(t);
      }
    }
  }
}

int Locator::find(const V2& p_in, Eigen::Vector3d* bary) const {
  const V2 p(wrap01(p_in.x()), wrap01(p_in.y()));
  const int bi = std::min(nb_ - 1, static_cast<int>(p.x() * nb_));
  const int bj = std::min(nb_ - 1, static_cast<int>(p.y() * nb_));
  constexpr double tol = -1e-10;
  for (int dj = 0; dj <= 2; ++dj) {
    for (int di = 0; di <= 2; ++di) {
      // own bin first, then the 8 neighbors
      const int ii = (bi + (di == 0 ? 0 : (di == 1 ? -1 : 1)) + nb_) % nb_;
      const int jj = (bj + (dj == 0 ? 0 : (dj == 1 ? -1 : 1)) + nb_) % nb_;
      for (int t : bins_[static_cast<std::size_t>(jj) * nb_ + ii]) {
        const auto& q = lifted_[t];
        const V2 p0 = mesh_.vertices.row(mesh_.triangles(t, 0));
        const V2 d = V2(q.row(0)) + wrap_delta(p, p0);
        const V2 e1 = q.row(1) - q.row(0);
        const V2 e2 = q.row(2) - q.row(0);
        const V2 dp = d - V2(q.row(0));
        const double det = e1.x() * e2.y() - e1.y() * e2.x();
        const double b1 = (dp.x() * e2.y() - dp.y() * e2.x()) / det;
        const double b2 = (e1.x() * dp.y() - e1.y() * dp.x()) / det;
        const double b0 = 1.0 - b1 - b2;
        if (b0 >= tol && b1 >= tol && b2 >= tol) {
          if (bary) *bary = Eigen::Vector3d(b0, b1, b2);
          return t;
        }
      }
    }
  }
  return -1;
}

double Locator::interpolate(const Vec& u, const V2& p) const {
  Eigen::Vector3d b;
  const int t = find(p, &b);
  if (t < 0) throw quality_error("interpolation point not covered by the mesh");
  return b[0] * u[mesh_.triangles(t, 0)] + b[1] * u[mesh_.triangles(t, 1)] +
         b[2] * u[mesh_.triangles(t, 2)];
}

}  // namespace curvlab
