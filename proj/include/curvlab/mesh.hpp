#pragma once

// Discrete model surface: flat unit torus with a round hole (chi = -1, one
// boundary circle) plus the geometric operators living on it.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvlab {

using Vec = Eigen::VectorXd;
using V2 = Eigen::Vector2d;
using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// errors

// bad user input (ranges, config values)
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// a construction ran but produced something unusable
struct quality_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// periodic chart helpers on the unit square

inline double wrap01(double x) {
  double y = x - std::floor(x);
  return (y >= 1.0) ? 0.0 : y;
}

// shortest representative of a - b under the periodic identification
inline V2 wrap_delta(const V2& a, const V2& b) {
  V2 d = a - b;
  for (int c = 0; c < 2; ++c) {
    d[c] -= std::round(d[c]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// mesh

struct Mesh {
  // chart positions in [0,1)^2; edges crossing the square sides wrap
  Eigen::Matrix<double, Eigen::Dynamic, 2> vertices;
  // positively oriented index triples
  Eigen::Matrix<int, Eigen::Dynamic, 3> triangles;
  // ordered cyclic list of boundary vertices tracing the hole
  std::vector<int> boundary_loop;
  std::vector<std::uint8_t> on_boundary;

  V2 hole_center{0.5, 0.5};
  double hole_radius = 0.25;
  int n = 0;  // grid resolution per side

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.rows()); }
  int num_edges() const;
  int euler_characteristic() const;

  // triangle corners lifted to a common chart copy (anchor = corner 0)
  Eigen::Matrix<double, 3, 2> corners(int t) const;
  double area(int t) const;
  Eigen::Vector3d angles(int t) const;  // radians, per corner
  double min_angle_deg() const;

  // boundary polygon length (sum of chord lengths along the loop)
  double boundary_length() const;
};

// Structured periodic grid, vertices near the circle snapped onto it,
// triangles inside the hole removed, short boundary chords collapsed.
// Throws validation_error on bad (n, rho) and quality_error when the result
// violates the mesh invariants (single loop, chi = -1, positive areas,
// min angle >= floor).
Mesh build_torus_with_hole(int n, double rho, double min_angle_floor_deg = 20.0);

// ---------------------------------------------------------------------------
// operators

struct Operators {
  SpMat stiffness;                                    // cotangent weights, PSD
  Vec mass;                                           // lumped vertex areas
  Vec boundary_mass;                                  // lumped chord lengths, 0 off-boundary
  Eigen::Matrix<double, Eigen::Dynamic, 2> boundary_normals;  // outward (into the hole)
  int negative_cotan_edges = 0;                       // recorded, not fatal
};

Operators assemble_operators(const Mesh& m);

// local 3x3 stiffness of one triangle (rows/cols follow m.triangles(t, *))
Eigen::Matrix3d local_stiffness(const Mesh& m, int t);

struct BackgroundCurvature {
  Vec K_g;      // angle defect / lumped area; zero at boundary vertices
  Vec kappa_g;  // (pi - angle sum) / lumped boundary length; zero off-boundary
  Vec defect;   // raw defects: 2*pi - sum(theta) interior, pi - sum(theta) boundary
  double defect_sum = 0.0;
};

BackgroundCurvature background_curvature(const Mesh& m, const Operators& ops);

// ---------------------------------------------------------------------------
// serialization: plain text, header `torus-hole n rho`

void write_mesh(std::ostream& os, const Mesh& m);
Mesh read_mesh(std::istream& is);

// ---------------------------------------------------------------------------
// point location + piecewise-linear interpolation in the periodic chart

class Locator {
 public:
  explicit Locator(const Mesh& m);

  // triangle containing p (chart coords, wrapped internally); -1 if none
  // (i.e. p lies in the hole). Fills barycentric coords when found.
  int find(const V2& p, Eigen::Vector3d* bary = nullptr) const;

  // piecewise-linear interpolation of a nodal field; throws quality_error
  // when p is not covered by any triangle
  double interpolate(const Vec& u, const V2& p) const;

 private:
  const Mesh& mesh_;
  int nb_ = 0;                               // bins per side
  std::vector<std::vector<int>> bins_;       // triangle ids per bin
  std::vector<Eigen::Matrix<double, 3, 2>> lifted_;  // anchored corner coords
};

}  // namespace curvlab
