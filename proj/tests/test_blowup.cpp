#include "curvlab/blowup.hpp"

#include <cmath>
#include <limits>

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

// structured half-plane samples of an exact bubble plus deterministic noise
Eigen::MatrixX3d synth_samples(const BubbleFit& truth, double noise) {
  std::vector<Eigen::Vector3d> rows;
  for (int is = 0; is <= 64; ++is) {
    const double s = -8.0 + 0.25 * is;
    for (int it = 0; it <= 32; ++it) {
      const double t = truth.t0 + 0.25 * it;
      double w = bubble_model(s, t, truth);
      w += noise * std::sin(12.9898 * s + 78.233 * t);
      rows.emplace_back(s, t, w);
    }
  }
  Eigen::MatrixX3d S(static_cast<int>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    S.row(static_cast<int>(i)) = rows[i].transpose();
  }
  return S;
}

void check_recovery(const BubbleFit& truth, double noise, double tol) {
  const Eigen::MatrixX3d S = synth_samples(truth, noise);
  const BubbleFit fit = fit_bubble_samples(S, truth.t0);
  CHECK(fit.converged);
  CHECK(std::abs(fit.Lambda - truth.Lambda) < tol);
  CHECK(std::abs(fit.s0 - truth.s0) < tol);
  CHECK(std::abs(fit.t0 - truth.t0) < tol);
  CHECK(std::abs(fit.c_inf - truth.c_inf) < tol);
  CHECK(std::abs(fit.d_inf - truth.d_inf) < tol);
  CHECK(fit.rms_residual < std::max(2.0 * noise, 1e-8));
}

BubbleFit bubble(double L, double s0, double t0, double c, double d) {
  BubbleFit b;
  b.Lambda = L;
  b.s0 = s0;
  b.t0 = t0;
  b.c_inf = c;
  b.d_inf = d;
  return b;
}

}  // namespace

TEST_CASE("sweep schedule halves lambda and squares it into mu") {
  SweepSchedule sched;
  REQUIRE(sched.pairs().size() == 5);
  double lam = 0.1;
  for (const auto& [mu, lambda] : sched.pairs()) {
    CHECK(lambda == doctest::Approx(lam).epsilon(1e-15));
    CHECK(mu == doctest::Approx(lam * lam).epsilon(1e-15));
    lam *= 0.5;
  }
  CHECK(sched.window_ok());

  SweepSchedule longer;
  longer.lambda0 = 0.2;
  longer.levels = 8;
  CHECK(longer.pairs().size() == 8);
  CHECK(longer.window_ok());
}

TEST_CASE("rescaled profile: normalization, chart, sign") {
  const Fixture fx(32, 1e-2, 1e-1);
  TestFunctionSpec spec;
  spec.mu = 1e-2;
  const Vec u = build_test_function(fx.m, fx.p0(), spec);
  const Locator loc(fx.m);

  const RescaledProfile pr = rescale_profile(fx.em, u, loc);
  CHECK_FALSE(pr.peak_on_wrong_region);
  CHECK((pr.x_n - fx.p0()).norm() == 0.0);
  CHECK(pr.u_peak == doctest::Approx(-std::log(spec.mu)));
  CHECK(pr.r_n * pr.lambda * std::exp(pr.u_peak) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(pr.t0_est) < 1e-6);  // the peak vertex sits on the circle
  REQUIRE(pr.samples.rows() > 200);

  bool saw_origin = false;
  for (int i = 0; i < pr.samples.rows(); ++i) {
    CHECK(pr.samples(i, 2) <= 1e-10);  // PL interpolant never beats the peak
    if (pr.samples(i, 0) == 0.0 && pr.samples(i, 1) == pr.t0_est) {
      saw_origin = true;
      CHECK(std::abs(pr.samples(i, 2)) < 1e-9);
    }
  }
  CHECK(saw_origin);
}

TEST_CASE("rescaled profile flags a peak outside the positive region") {
  const Fixture fx(32, 1e-2, 1e-1);
  TestFunctionSpec spec;
  spec.mu = 1e-2;
  Vec u = build_test_function(fx.m, fx.p0(), spec);

  int far = 0;
  double best = -1.0;
  for (int v = 0; v < fx.m.num_vertices(); ++v) {
    const double r = wrap_delta(fx.m.vertices.row(v).transpose(), fx.p0()).norm();
    if (r > best) {
      best = r;
      far = v;
    }
  }
  REQUIRE(fx.em.f_mu[far] < 0.0);
  u[far] = u.maxCoeff() + 1.0;

  const Locator loc(fx.m);
  const RescaledProfile pr = rescale_profile(fx.em, u, loc);
  CHECK(pr.peak_on_wrong_region);
  CHECK((pr.x_n - fx.p0()).norm() == 0.0);  // the chart stays on the region max
}

TEST_CASE("bubble fit recovers synthetic truths") {
  check_recovery(bubble(1.0, 0.0, 0.0, 1.0, 1.0), 1e-5, 1e-3);
  check_recovery(bubble(1.0, 0.0, 0.0, 1.0, 0.0), 1e-5, 1e-3);
  check_recovery(bubble(0.7, -0.3, 0.5, 0.6, 0.8), 1e-5, 1e-3);
  check_recovery(bubble(1.3, 0.4, 0.2, 0.0, 1.0), 1e-5, 1e-3);
}

TEST_CASE("bubble fit on exact data is exact") {
  const BubbleFit truth = bubble(0.9, 0.2, 0.3, 0.4, 0.6);
  const Eigen::MatrixX3d S = synth_samples(truth, 0.0);
  const BubbleFit fit = fit_bubble_samples(S, truth.t0);
  CHECK(fit.rms_residual < 1e-8);
  CHECK(std::abs(fit.Lambda - truth.Lambda) < 1e-6);
  CHECK(std::abs(fit.c_inf - truth.c_inf) < 1e-6);
  CHECK(std::abs(fit.d_inf - truth.d_inf) < 1e-6);
}

TEST_CASE("bubble fit input guards") {
  const BubbleFit truth = bubble(1.0, 0.0, 0.0, 1.0, 1.0);
  Eigen::MatrixX3d small = synth_samples(truth, 0.0).topRows(150);
  CHECK_THROWS_AS(fit_bubble_samples(small, 0.0), std::invalid_argument);

  Eigen::MatrixX3d poisoned = synth_samples(truth, 0.0);
  poisoned.col(2).setConstant(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(fit_bubble_samples(poisoned, 0.0), FitDiverged);
}

TEST_CASE("blow-up point counting clusters peaks modulo the torus") {
  SweepResult sw;
  sw.p0 = V2(0.75, 0.5);

  auto level = [](int k, const V2& x, double mu, bool conv) {
    SweepLevelRecord rec;
    rec.k = k;
    rec.mu = mu;
    rec.lambda = std::sqrt(mu);
    rec.converged = conv;
    RescaledProfile pr;
    pr.x_n = x;
    rec.profile = pr;
    return rec;
  };

  SUBCASE("single cluster with jitter") {
    for (int k = 0; k < 4; ++k) {
      const double j = 5e-4 * (k - 1.5);
      sw.levels.push_back(level(k, V2(0.75 + j, 0.5 - j), 1e-2 / (1 << (2 * k)), true));
    }
    sw.levels.push_back(level(4, V2(0.1, 0.1), 1e-6, false));  // ignored
    BubbleFit f = bubble(1.0, 0.0, 0.0, 0.5, 0.5);
    sw.levels.back().fit = f;           // unconverged level: fit ignored too
    sw.levels[3].fit = f;
    sw.levels[3].converged = true;

    const BlowupCount bc = count_blowup_points(sw, 0.05);
    CHECK(bc.N == 1);
    CHECK(bc.n_le_3);
    CHECK(bc.case_consistent);  // c > 0, d > 0 allows up to three points
    REQUIRE(bc.centers.size() == 1);
    CHECK(wrap_delta(bc.centers[0], sw.p0).norm() < 2e-3);
    CHECK(bc.C_peak > 0.0);  // jitter^2 / mu stays well under one here
    CHECK(bc.C_peak < 1.0);
  }

  SUBCASE("two clusters, concentrated case demands one") {
    for (int k = 0; k < 4; ++k) {
      const V2 x = (k % 2 == 0) ? V2(0.75, 0.5) : V2(0.25, 0.5);
      sw.levels.push_back(level(k, x, 1e-2, true));
    }
    sw.levels.back().fit = bubble(1.0, 0.0, 0.0, 0.0, 1.0);  // c = 0 case
    const BlowupCount bc = count_blowup_points(sw, 0.05);
    CHECK(bc.N == 2);
    CHECK(bc.n_le_3);
    CHECK_FALSE(bc.case_consistent);

    sw.levels.back().fit = bubble(1.0, 0.0, 0.0, 0.5, 0.0);  // d = 0 allows 2
    const BlowupCount bc2 = count_blowup_points(sw, 0.05);
    CHECK(bc2.case_consistent);
  }

  SUBCASE("clusters wrap across the periodic seam") {
    sw.levels.push_back(level(0, V2(0.995, 0.9), 1e-2, true));
    sw.levels.push_back(level(1, V2(0.005, 0.9), 1e-2, true));
    const BlowupCount bc = count_blowup_points(sw, 0.05);
    CHECK(bc.N == 1);
    CHECK(wrap_delta(bc.centers[0], V2(0.0, 0.9)).norm() < 0.02);
  }
}

TEST_CASE("three-level sweep produces certified saddles and profiles") {
  const Fixture fx(32, 1e-2, 1e-1);
  SweepSchedule sched;
  sched.levels = 3;
  const SweepResult sw = sweep(fx.em, sched, 17, 0);

  REQUIRE(sw.levels.size() == 3);
  CHECK(std::abs(wrap_delta(sw.p0, fx.m.hole_center).norm() - fx.m.hole_radius) < 1e-9);
  double prev_umax = -1e300;
  for (const auto& rec : sw.levels) {
    CHECK(rec.converged);
    CHECK(rec.negative_count >= 1);
    CHECK(rec.sigma_min < 0.0);
    CHECK(rec.c_level > rec.minimizer_energy);
    CHECK(rec.umax > prev_umax);
    prev_umax = rec.umax;
    CHECK(rec.area_mass + rec.boundary_mass <= 2.0 * kPi * 1.2);
    CHECK(rec.total_curvature > 0.0);
    REQUIRE(rec.profile.has_value());
    CHECK(rec.r_n * rec.lambda * std::exp(rec.profile->u_peak) ==
          doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rec.r_over_lambda == doctest::Approx(rec.r_n / rec.lambda));
  }
  CHECK(sw.mass_bounds_ok);
  CHECK(sw.umax_increasing);
  CHECK(sw.max_total_curvature > 0.0);

  const BlowupCount bc = count_blowup_points(sw, 0.1);
  CHECK(bc.N >= 1);
  CHECK(bc.n_le_3);
}
