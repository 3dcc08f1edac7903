#include "curvlab/liouville.hpp"

#include <cmath>

#include "doctest.h"

using namespace curvlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

double beta_of(double c, double d) {
  return 2.0 * kPi * d / std::sqrt(d * d + c);
}

}  // namespace

TEST_CASE("closed-form bubble: values and domain guards") {
  const HalfPlaneProfile p = bubble_closed_form(2.0, 0.0, 0.0, 1.0, 0.0);
  CHECK(p.w(0.0, 0.0) == doctest::Approx(0.0));  // log(4) - log(4)
  CHECK(p.w(1.0, 0.0) == p.w(-1.0, 0.0));
  CHECK(p.is_bubble);
  CHECK(p.curv_weight == 1.0);
  CHECK(p.bdry_weight == 0.0);

  CHECK_THROWS_AS(bubble_closed_form(0.0, 0, 0, 1, 1), std::domain_error);
  CHECK_THROWS_AS(bubble_closed_form(-1.0, 0, 0, 1, 1), std::domain_error);
  CHECK_THROWS_AS(bubble_closed_form(1.0, 0, 0, 1.5, 1), std::domain_error);
  CHECK_THROWS_AS(bubble_closed_form(1.0, 0, 0, 1, -0.1), std::domain_error);
  CHECK_THROWS_AS(bubble_closed_form(1.0, 0, 0, 0, 0), std::domain_error);
}

TEST_CASE("bubbles solve their Liouville system to machine precision") {
  const double cs[] = {1.0, 0.0, 0.6, 1.0};
  const double ds[] = {1.0, 1.0, 0.8, 0.0};
  for (int k = 0; k < 4; ++k) {
    CAPTURE(k);
    const HalfPlaneProfile p =
        bubble_closed_form(1.1, 0.3, 0.2, cs[k], ds[k]);
    double worst_i = 0.0, worst_b = 0.0;
    for (int is = -15; is <= 15; ++is) {
      for (int it = 0; it <= 15; ++it) {
        const double s = 0.3 + 0.5 * is;
        const double t = 0.2 + 0.5 * it;
        worst_i = std::max(worst_i, std::abs(interior_residual(p, s, t)));
      }
      worst_b = std::max(worst_b,
                         std::abs(boundary_residual(p, 0.3 + 0.5 * is)));
    }
    CHECK(worst_i < 1e-10);
    CHECK(worst_b < 1e-10);
  }
}

TEST_CASE("finite-difference fallback matches the analytic operators") {
  const HalfPlaneProfile full = bubble_closed_form(0.9, -0.2, 0.1, 0.7, 0.5);
  HalfPlaneProfile fd = full;
  fd.grad_w = nullptr;  // forces the finite-difference path
  fd.lap_w = nullptr;

  double worst_i = 0.0, worst_b = 0.0;
  for (int is = -6; is <= 6; ++is) {
    for (int it = 1; it <= 6; ++it) {  // one-sided stencils are first order
      const double s = -0.2 + 0.7 * is;
      const double t = 0.1 + 0.7 * it;
      worst_i = std::max(worst_i, std::abs(interior_residual(fd, s, t)));
    }
    worst_b = std::max(worst_b, std::abs(boundary_residual(fd, -0.2 + 0.7 * is)));
  }
  CHECK(worst_i < 1e-5);
  CHECK(worst_b < 1e-6);
}

TEST_CASE("half-plane masses satisfy the beta identities") {
  const double cases[][2] = {{1.0, 1.0}, {1.0, 0.0}, {0.0, 1.0},
                             {0.25, 0.75}, {0.5, 0.25}};
  for (const auto& cd : cases) {
    const double c = cd[0], d = cd[1];
    CAPTURE(c);
    CAPTURE(d);
    const HalfPlaneProfile p = bubble_closed_form(1.0, 0.0, 0.0, c, d);
    const LiouvilleReport r = halfplane_masses(p);
    REQUIRE(r.tail_converged);
    const double beta = beta_of(c, d);
    CHECK(r.beta == doctest::Approx(beta).epsilon(1e-12));
    CHECK(std::abs(d * r.H0 - beta) < 1e-4);
    CHECK(std::abs(c * r.V0 - (2.0 * kPi - beta)) < 1e-4);
    CHECK(std::abs(r.d - 2.0) < 1e-4);
  }
}

TEST_CASE("the d = 0 half bubble carries the full-plane mass") {
  // the half-plane integral of the centered bubble is half of the plane
  // integral, so 2 V0 must equal 4 pi
  for (double L : {0.5, 1.0, 2.0}) {
    const HalfPlaneProfile p = bubble_closed_form(L, 0.0, 0.0, 1.0, 0.0);
    const LiouvilleReport r = halfplane_masses(p);
    REQUIRE(r.tail_converged);
    CHECK(std::abs(2.0 * r.V0 - 4.0 * kPi) < 2e-4);
  }
}

TEST_CASE("Pohozaev residual vanishes for the unperturbed system") {
  const double cases[][2] = {{1.0, 1.0}, {1.0, 0.0}, {0.6, 0.3}};
  for (const auto& cd : cases) {
    CAPTURE(cd[0]);
    CAPTURE(cd[1]);
    const HalfPlaneProfile p = bubble_closed_form(1.2, 0.1, 0.0, cd[0], cd[1]);
    const LiouvilleReport r = pohozaev_residual(p);
    REQUIRE(r.tail_converged);
    CHECK(std::abs(r.d - 2.0) < 1e-4);
    CHECK(std::abs(r.pohozaev_lhs) < 1e-6);
    CHECK(std::abs(r.residual) < 1e-5);
  }
}

TEST_CASE("negative definite A makes the Pohozaev tail log-divergent") {
  HalfPlaneProfile p = bubble_closed_form(1.0, 0.0, 0.0, 1.0, 1.0);
  p.A = -Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(pohozaev_residual(p), NonConvergentTail);
}

TEST_CASE("certificate rejects profiles that do not solve the system") {
  const HalfPlaneProfile p = bubble_closed_form(1.0, 0.0, 0.0, 1.0, 1.0);
  const Eigen::Matrix2d A = -Eigen::Matrix2d::Identity();
  const CertificateResult cert = nonexistence_certificate(A, p, 1e-3);
  CHECK(cert.verdict == CertVerdict::Inapplicable);
  CHECK(cert.max_pde_residual >= 1e-3);
  CHECK(cert.report.pohozaev_lhs < 0.0);  // truncated masses keep the sign
  CHECK_FALSE(cert.note.empty());
}

TEST_CASE("certificate requires negative definite A") {
  const HalfPlaneProfile p = bubble_closed_form(1.0, 0.0, 0.0, 1.0, 1.0);
  CHECK_THROWS_AS(
      nonexistence_certificate(Eigen::Matrix2d::Identity(), p, 0.5),
      std::invalid_argument);
  Eigen::Matrix2d indef;
  indef << -1.0, 0.0, 0.0, 0.5;
  CHECK_THROWS_AS(nonexistence_certificate(indef, p, 0.5),
                  std::invalid_argument);
}

TEST_CASE("fitted candidates for the perturbed system get falsified") {
  const Eigen::Matrix2d A = -Eigen::Matrix2d::Identity();
  const HalfPlaneProfile cand = fit_system_candidate(A);

  CHECK(cand.is_bubble);
  CHECK(cand.params.Lambda >= 0.2);
  CHECK(cand.params.Lambda <= 5.0);
  CHECK(cand.params.c_inf >= 1e-3);
  CHECK(cand.params.c_inf <= 1.0);
  CHECK(cand.params.d_inf >= 0.0);
  CHECK(cand.params.d_inf <= 1.0);
  CHECK(cand.params.t0 >= 0.0);

  const CertificateResult cert = nonexistence_certificate(A, cand, 0.5);
  CHECK(cert.max_pde_residual < 0.5);
  CHECK(cert.verdict == CertVerdict::Inconsistent);
  CHECK(cert.report.pohozaev_lhs < -cert.eps_p);
}
