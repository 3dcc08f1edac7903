#include "curvlab/mpass.hpp"

#include <cmath>

#include "doctest.h"

using namespace curvlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Fixture {
  Mesh m;
  Operators ops;
  BackgroundCurvature bg;
  EnergyModel em;
  Fixture(int n, double mu, double lambda)
      : m(build_torus_with_hole(n, 0.25)),
        ops(assemble_operators(m)),
        bg(background_curvature(m, ops)) {
    const CurvatureData data = make_prescription(m, 0.0, 1.0, 1.0);
    em = with_parameters(make_model(m, ops, bg, data), mu, lambda);
  }
  V2 p0() const { return m.vertices.row(em.data.p0).transpose(); }
};

// tilted double well in two variables: E = (x^2-1)^2 + t*x + y^2. The middle
// root of the gradient is the saddle; the deformation core plus a two-variable
// Newton polish must recover it.
struct TiltedWell final : PathEnergy {
  double t = 0.3;
  int dim() const override { return 2; }
  std::optional<double> energy(const Vec& u) const override {
    const double x = u[0], y = u[1];
    return (x * x - 1.0) * (x * x - 1.0) + t * x + y * y;
  }
  std::optional<Vec> grad(const Vec& u) const override {
    Vec g(2);
    g[0] = 4.0 * u[0] * (u[0] * u[0] - 1.0) + t;
    g[1] = 2.0 * u[1];
    return g;
  }
  Vec precond_solve(const Vec& r) const override { return r; }
  double inner(const Vec& a, const Vec& b) const override { return a.dot(b); }

  double root_near(double x) const {  // Newton on the cubic, oracle-grade
    for (int i = 0; i < 60; ++i) {
      const double f = 4.0 * x * (x * x - 1.0) + t;
      const double df = 12.0 * x * x - 4.0;
      x -= f / df;
    }
    return x;
  }
};

}  // namespace

TEST_CASE("logarithmic spike: values, support, Dirichlet energy") {
  const Fixture fx(128, 1e-2, 1e-1);
  TestFunctionSpec spec;
  spec.mu = 1e-2;
  const Vec w = build_test_function(fx.m, fx.p0(), spec);

  const double support = 0.499 * 0.25;  // default L puts the cutoff here
  CHECK(w[fx.em.data.p0] == doctest::Approx(-std::log(spec.mu)));
  CHECK(w.minCoeff() == 0.0);
  for (int v = 0; v < fx.m.num_vertices(); ++v) {
    const double r = wrap_delta(fx.m.vertices.row(v).transpose(), fx.p0()).norm();
    if (w[v] > 0.0) {
      CHECK(r < support + 1e-12);
    } else if (r > support) {
      CHECK(w[v] == 0.0);
    }
  }

  // half-disk Dirichlet energy of the truncated logarithm
  const double dirichlet = w.dot(fx.ops.stiffness * w);
  const double target = -kPi * std::log(spec.mu);
  CHECK(dirichlet == doctest::Approx(target).epsilon(0.10));
}

TEST_CASE("spike needs enough vertices under its support") {
  const Fixture fx(16, 1e-2, 1e-1);
  TestFunctionSpec spec;
  spec.mu = 1e-2;
  spec.L = std::sqrt(spec.mu) / 0.02;  // support radius 0.02 < h/3
  CHECK_THROWS_AS(build_test_function(fx.m, fx.p0(), spec), ResolutionError);
  spec.L = std::sqrt(spec.mu) / 0.2;  // support radius 0.2 > rho/2
  CHECK_THROWS_AS(build_test_function(fx.m, fx.p0(), spec),
                  std::invalid_argument);
}

TEST_CASE("far endpoint scan lands strictly below the minimizer") {
  const Fixture fx(32, 1e-2, 1e-1);
  const EnergyModel zero = with_parameters(fx.em, 0.0, 0.0);
  const CriticalPoint u0 =
      newton(zero, Vec::Zero(fx.m.num_vertices()), 1e-10, 60, false);
  REQUIRE(u0.converged);

  TestFunctionSpec spec;
  spec.mu = 1e-2;
  const Vec w = build_test_function(fx.m, fx.p0(), spec);
  const FarEndpoint fe = find_far_endpoint(fx.em, u0.u, w);

  CHECK(fe.energy < fe.energy_floor);
  CHECK(*energy(fx.em, fe.v) == doctest::Approx(fe.energy));
  CHECK(std::log2(fe.s_used) == doctest::Approx(std::round(std::log2(fe.s_used))));

  // mu = lambda = 0 removes every positive region: the scan must exhaust
  const EnergyModel flat = with_parameters(fx.em, 0.0, 0.0);
  CHECK_THROWS_AS(find_far_endpoint(flat, u0.u, w), ScanExhausted);
}

TEST_CASE("deformation core resolves the tilted double well saddle") {
  TiltedWell well;
  const double xm = well.root_near(-1.0);   // deep minimum
  const double xp = well.root_near(1.0);    // shallow minimum
  const double xs = well.root_near(0.1);    // saddle (middle root)
  REQUIRE(xm < -0.9);
  REQUIRE(xp > 0.9);
  REQUIRE(std::abs(xs) < 0.2);

  Vec a(2), b(2);
  a << xp, 0.0;
  b << xm, 0.0;
  REQUIRE(*well.energy(b) < *well.energy(a));

  const DeformResult dr = deform_path(well, a, b, 33, 1e-5);
  const Vec top = dr.path.nodes[dr.path.max_index];
  CHECK(std::abs(top[0] - xs) < 0.05);
  CHECK(std::abs(top[1]) < 0.05);

  // the discrete path max brackets the saddle level: nodes straddle the ridge
  // (up to O(spacing^2) from below) and the deformation never lifts the level
  // far above it
  Vec sp(2);
  sp << xs, 0.0;
  const double e_saddle = *well.energy(sp);
  CHECK(dr.path.energies[dr.path.max_index] >= e_saddle - 5e-3);
  CHECK(dr.path.energies[dr.path.max_index] <= e_saddle + 0.02);

  // every recorded level stays pinned to the saddle band: descent below it is
  // impossible for a connecting path, ascent above it means the flow failed
  for (const double level : dr.max_energy_history) {
    CHECK(level >= e_saddle - 1e-2);
    CHECK(level <= e_saddle + 5e-2);
  }

  // endpoints pinned
  CHECK((dr.path.nodes.front() - a).norm() == 0.0);
  CHECK((dr.path.nodes.back() - b).norm() == 0.0);

  // analytic Newton polish from the path maximum hits the exact saddle
  Vec z = top;
  for (int i = 0; i < 50; ++i) {
    const Vec g = *well.grad(z);
    z[0] -= g[0] / (12.0 * z[0] * z[0] - 4.0);
    z[1] -= g[1] / 2.0;
  }
  CHECK(std::abs(z[0] - xs) < 1e-8);
  CHECK(std::abs(z[1]) < 1e-8);
}

TEST_CASE("mountain pass certifies a second critical point") {
  // n = 24 is the coarsest grid that resolves the default spike support
  const Fixture fx(24, 1e-2, 1e-1);
  const EnergyModel zero = with_parameters(fx.em, 0.0, 0.0);
  const CriticalPoint u0 =
      newton(zero, Vec::Zero(fx.m.num_vertices()), 1e-10, 60, false);
  REQUIRE(u0.converged);
  const CriticalPoint umin = newton(fx.em, u0.u, 1e-10, 60, true, 4, 0);
  REQUIRE(umin.converged);
  REQUIRE(umin.kind == PointKind::minimizer);

  TestFunctionSpec spec;
  spec.mu = 1e-2;
  const Vec w = build_test_function(fx.m, fx.p0(), spec);
  const FarEndpoint fe = find_far_endpoint(fx.em, u0.u, w);

  MountainPassOptions opts;
  const MountainPassResult r = mountain_pass(fx.em, u0.u, fe.v, 33, opts);
  CHECK(r.converged);
  CHECK(r.saddle.converged);
  CHECK(r.certificate.negative_count >= 1);
  CHECK(r.certificate.sigma_min < 0.0);
  CHECK(r.c_level > umin.energy);

  const Vec diff = r.saddle.u - umin.u;
  const double sep = std::sqrt(fx.ops.mass.dot(Vec(diff.array().square().matrix())));
  CHECK(sep > 1e-2);

  CHECK(std::abs(r.saddle.gb_residual) < 1e-6);
  CHECK(r.area_mass > 0.0);
  CHECK(r.boundary_mass > 0.0);
}

TEST_CASE("a path between basin mates collapses onto the minimizer") {
  const Fixture fx(16, 1e-2, 1e-1);
  const EnergyModel zero = with_parameters(fx.em, 0.0, 0.0);
  const CriticalPoint u0 =
      newton(zero, Vec::Zero(fx.m.num_vertices()), 1e-10, 60, false);
  REQUIRE(u0.converged);
  const CriticalPoint umin = newton(fx.em, u0.u, 1e-10, 60, false);
  REQUIRE(umin.converged);
  REQUIRE(*energy(fx.em, umin.u) < *energy(fx.em, u0.u));
  CHECK_THROWS_AS(mountain_pass(fx.em, u0.u, umin.u, 17, {}), CollapseError);
}

TEST_CASE("level scan: bound, monotonicity, shared endpoint") {
  const Fixture fx(24, 1e-2, 1e-1);
  const std::vector<double> mus{5e-3, 1e-2};
  const std::vector<double> lambdas{5e-2, 1e-1};
  const LevelScanResult scan = level_monotonicity_scan(fx.em, mus, lambdas, 17, 0);

  REQUIRE(scan.c.rows() == 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(std::isfinite(scan.c(i, j)));
      CHECK(scan.sigma_min(i, j) < 0.0);
      CHECK(scan.c(i, j) <= 4.0 * kPi * std::log(2.0 / mus[i]));
    }
  }
  CHECK(scan.s_shared >= 1.0);
  CHECK(std::isfinite(scan.delta_path));
  CHECK(scan.bound_ok);
  CHECK(scan.monotone_mu);
  CHECK(scan.monotone_lambda);
}
