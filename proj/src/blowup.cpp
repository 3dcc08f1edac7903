#include "curvlab/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace curvlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<std::pair<double, double>> SweepSchedule::pairs() const {
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < levels; ++k) {
    const double lam = lambda0 * std::pow(2.0, -k);
    out.emplace_back(lam * lam, lam);
  }
  return out;
}

bool SweepSchedule::window_ok() const {
  for (const auto& [mu, lam] : pairs()) {
    if (std::abs(mu - lam * lam) > lam * lam * lam) return false;
  }
  return true;
}

RescaledProfile rescale_profile(const EnergyModel& em, const Vec& u,
                                const Locator& loc) {
  if (!(em.data.lambda > 0.0)) {
    throw std::invalid_argument("rescaling needs lambda > 0");
  }
  const Mesh& m = *em.mesh;
  int arg_region = -1, arg_global = 0;
  for (int i = 0; i < m.num_vertices(); ++i) {
    if (u[i] > u[arg_global]) arg_global = i;
    if (em.f_mu[i] >= 0.0 && (arg_region < 0 || u[i] > u[arg_region])) {
      arg_region = i;
    }
  }
  if (arg_region < 0) {
    throw std::runtime_error("no vertex with f_mu >= 0; mu too small");
  }

  RescaledProfile pr;
  pr.peak_on_wrong_region =
      em.f_mu[arg_global] < 0.0 && u[arg_global] > u[arg_region];
  pr.x_n = m.vertices.row(arg_region).transpose();
  pr.u_peak = u[arg_region];
  pr.mu = em.data.mu;
  pr.lambda = em.data.lambda;
  pr.r_n = std::exp(-pr.u_peak) / pr.lambda;

  const V2 c = m.hole_center;
  const V2 rel = wrap_delta(pr.x_n, c);
  const double theta_n = std::atan2(rel.y(), rel.x());
  pr.t0_est = (rel.norm() - m.hole_radius) / pr.r_n;

  std::vector<Eigen::Vector3d> rows;
  rows.reserve(65 * 33);
  Eigen::Vector3d bc;
  for (int is = 0; is <= 64; ++is) {
    const double s = -8.0 + 0.25 * is;
    for (int it = 0; it <= 32; ++it) {
      const double tau = 0.25 * it;
      const double phi = theta_n + s * pr.r_n / m.hole_radius;
      const double rad = m.hole_radius + (pr.t0_est + tau) * pr.r_n;
      if (rad > 0.45) continue;
      V2 p = c + rad * V2(std::cos(phi), std::sin(phi));
      p.x() = wrap01(p.x());
      p.y() = wrap01(p.y());
      const int tri = loc.find(p, &bc);
      if (tri < 0) continue;
      double val = 0.0;
      for (int a = 0; a < 3; ++a) val += bc[a] * u[m.triangles(tri, a)];
      rows.emplace_back(s, pr.t0_est + tau, val - pr.u_peak);
    }
  }
  pr.samples.resize(static_cast<int>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pr.samples.row(static_cast<int>(i)) = rows[i].transpose();
  }
  return pr;
}

double bubble_model(double s, double t, const BubbleFit& p) {
  const double ds = s - p.s0;
  const double dt = t - p.t0 + p.d_inf * p.Lambda;
  const double D = p.c_inf * p.Lambda * p.Lambda + ds * ds + dt * dt;
  return std::log(2.0 * p.Lambda) - std::log(D);
}

namespace {

struct LmOutcome {
  BubbleFit p;
  bool ok = false;
};

double rms_of(const Eigen::MatrixX3d& S, const BubbleFit& p) {
  double acc = 0.0;
  for (int i = 0; i < S.rows(); ++i) {
    const double r = bubble_model(S(i, 0), S(i, 1), p) - S(i, 2);
    acc += r * r;
  }
  return std::sqrt(acc / S.rows());
}

void clamp_box(BubbleFit& p) {
  p.Lambda = std::max(p.Lambda, 1e-6);
  p.t0 = std::max(p.t0, 0.0);
  p.c_inf = std::min(std::max(p.c_inf, 0.0), 1.0);
  p.d_inf = std::min(std::max(p.d_inf, 0.0), 1.0);
}

// Projected Levenberg-Marquardt; `mask` freezes coordinates (used to refit
// with c = 0, d = 1 pinned).
LmOutcome lm_fit(const Eigen::MatrixX3d& S, BubbleFit start,
                 const std::array<bool, 5>& mask, int max_iter) {
  LmOutcome out;
  BubbleFit p = start;
  clamp_box(p);
  const int n = static_cast<int>(S.rows());
  Eigen::VectorXd r(n);
  Eigen::MatrixXd J(n, 5);

  auto fill = [&](const BubbleFit& q) -> bool {
    for (int i = 0; i < n; ++i) {
      const double s = S(i, 0), t = S(i, 1);
      const double ds = s - q.s0;
      const double dt = t - q.t0 + q.d_inf * q.Lambda;
      const double D = q.c_inf * q.Lambda * q.Lambda + ds * ds + dt * dt;
      if (!(D > 1e-300)) return false;
      r[i] = std::log(2.0 * q.Lambda) - std::log(D) - S(i, 2);
      J(i, 0) = 1.0 / q.Lambda -
                (2.0 * q.c_inf * q.Lambda + 2.0 * dt * q.d_inf) / D;
      J(i, 1) = 2.0 * ds / D;
      J(i, 2) = 2.0 * dt / D;
      J(i, 3) = -q.Lambda * q.Lambda / D;
      J(i, 4) = -2.0 * dt * q.Lambda / D;
    }
    for (int c = 0; c < 5; ++c) {
      if (!mask[c]) J.col(c).setZero();
    }
    return r.allFinite() && J.allFinite();
  };

  if (!fill(p)) return out;
  double cost = r.squaredNorm();
  double damp = 1e-3;
  for (int iter = 1; iter <= max_iter; ++iter) {
    p.iterations = iter;
    Eigen::MatrixXd A = J.transpose() * J;
    for (int c = 0; c < 5; ++c) {
      A(c, c) += damp * std::max(A(c, c), 1e-12) + (mask[c] ? 0.0 : 1.0);
    }
    const Eigen::VectorXd g = J.transpose() * r;
    const Eigen::VectorXd step = A.ldlt().solve(-g);
    if (!step.allFinite()) {
      damp *= 2.0;
      if (damp > 1e12) return out;
      continue;
    }
    BubbleFit q = p;
    q.Lambda += step[0];
    q.s0 += step[1];
    q.t0 += step[2];
    q.c_inf += step[3];
    q.d_inf += step[4];
    clamp_box(q);
    const Eigen::VectorXd r_old = r;
    const Eigen::MatrixXd J_old = J;
    bool ok = fill(q);
    const double cost_new = ok ? r.squaredNorm() : std::numeric_limits<double>::infinity();
    if (ok && cost_new < cost) {
      const double drop = cost - cost_new;
      q.iterations = iter;
      p = q;
      cost = cost_new;
      damp = std::max(damp / 3.0, 1e-14);
      double move = 0.0;
      move = std::max(move, std::abs(step[0]) / (1.0 + std::abs(p.Lambda)));
      move = std::max(move, std::abs(step[1]));
      move = std::max(move, std::abs(step[2]));
      move = std::max(move, std::abs(step[3]));
      move = std::max(move, std::abs(step[4]));
      if (move < 1e-12 || drop < 1e-18 * (1.0 + cost)) break;
    } else {
      r = r_old;
      J = J_old;
      damp *= 2.0;
      if (damp > 1e12) break;
    }
  }
  p.rms_residual = std::sqrt(cost / n);
  p.converged = std::isfinite(p.rms_residual);
  out.p = p;
  out.ok = p.converged;
  return out;
}

}  // namespace

BubbleFit fit_bubble_samples(const Eigen::MatrixX3d& samples, double t0_est) {
  if (samples.rows() < 200) {
    throw std::invalid_argument("bubble fit needs at least 200 samples");
  }
  const std::array<bool, 5> all{true, true, true, true, true};
  bool any = false;
  BubbleFit best;
  best.rms_residual = std::numeric_limits<double>::infinity();
  for (double L0 : {0.5, 1.0, 2.0}) {
    for (double c0 : {0.0, 0.5, 1.0}) {
      for (double d0 : {0.0, 0.5, 1.0}) {
        BubbleFit start;
        start.Lambda = L0;
        start.s0 = 0.0;
        start.t0 = t0_est;
        start.c_inf = c0;
        start.d_inf = (c0 == 0.0) ? 1.0 : d0;
        const LmOutcome o = lm_fit(samples, start, all, 200);
        if (o.ok && o.p.rms_residual < best.rms_residual) {
          best = o.p;
          any = true;
        }
      }
    }
  }
  if (!any) throw FitDiverged("all bubble-fit starts failed");

  // (t0, d_inf) only enter through t0 - d_inf*Lambda: slide along that line
  // toward the measured boundary distance to fix the gauge
  const double a = best.t0 - best.d_inf * best.Lambda;
  const double lo = std::max(0.0, -a / best.Lambda);
  double d = (t0_est - a) / best.Lambda;
  d = std::min(std::max(d, lo), 1.0);
  best.d_inf = d;
  best.t0 = a + d * best.Lambda;

  if (best.c_inf <= 1e-8) {
    BubbleFit pinned = best;
    pinned.c_inf = 0.0;
    pinned.d_inf = 1.0;
    const std::array<bool, 5> free3{true, true, true, false, false};
    const LmOutcome o = lm_fit(samples, pinned, free3, 200);
    if (o.ok && o.p.rms_residual <= best.rms_residual * (1.0 + 1e-9)) {
      best = o.p;
    }
  }
  best.rms_residual = rms_of(samples, best);
  return best;
}

BubbleFit fit_bubble(const RescaledProfile& profile) {
  return fit_bubble_samples(profile.samples, profile.t0_est);
}

SweepResult sweep(const EnergyModel& base, const SweepSchedule& schedule,
                  int P, unsigned seed) {
  if (!schedule.window_ok()) {
    throw std::invalid_argument("sweep schedule violates the mu window");
  }
  SweepResult out;
  out.schedule = schedule;
  out.p0 = base.mesh->vertices.row(base.data.p0).transpose();
  const Locator loc(*base.mesh);

  const EnergyModel zero = with_parameters(base, 0.0, 0.0);
  const CriticalPoint u00 =
      newton(zero, Vec::Zero(base.mesh->num_vertices()), 1e-10, 60, false);
  if (!u00.converged) throw std::runtime_error("sweep: base solve failed");

  Vec prev;
  bool have_prev = false;
  for (const auto& [mu, lam] : schedule.pairs()) {
    SweepLevelRecord rec;
    rec.k = static_cast<int>(out.levels.size());
    rec.mu = mu;
    rec.lambda = lam;
    const EnergyModel em = with_parameters(base, mu, lam);

    const CriticalPoint mc = newton(em, u00.u, 1e-10, 60, false);
    rec.minimizer_energy = mc.energy;

    CriticalPoint sad;
    SpectralCertificate cert;
    try {
      if (!have_prev) {
        TestFunctionSpec tf;
        tf.mu = mu;
        const Vec w = build_test_function(*base.mesh, out.p0, tf);
        const FarEndpoint fe = find_far_endpoint(em, u00.u, w);
        MountainPassOptions opts;
        opts.seed = seed;
        const MountainPassResult mp = mountain_pass(em, u00.u, fe.v, P, opts);
        sad = mp.saddle;
        cert = mp.certificate;
        rec.note = "mountain pass: " + mp.note;
      } else {
        sad = newton(em, prev, 1e-10, 60, false);
        cert = min_eigen(em, sad.u, 4, seed);
        rec.note = "warm start from previous level saddle";
      }
    } catch (const std::exception& e) {
      rec.note = e.what();
      out.levels.push_back(std::move(rec));
      continue;
    }
    if (!sad.converged || cert.negative_count < 1) {
      rec.note += "; saddle rejected (converged=" +
                  std::to_string(sad.converged ? 1 : 0) +
                  ", negative_count=" + std::to_string(cert.negative_count) +
                  ")";
      out.levels.push_back(std::move(rec));
      continue;
    }

    rec.converged = true;
    rec.c_level = sad.energy;
    rec.sigma_min = cert.sigma_min;
    rec.negative_count = cert.negative_count;
    rec.saddle_u = sad.u;
    rec.umax = sad.u.maxCoeff();
    const Vec e2u = (2.0 * sad.u.array()).exp().matrix();
    const Vec eu = sad.u.array().exp().matrix();
    rec.area_mass = 0.5 * mu * em.ops.mass.dot(e2u);
    rec.boundary_mass = lam * em.ops.boundary_mass.dot(eu);
    rec.total_curvature =
        em.ops.mass.dot(Vec(em.f_mu.array().abs() * e2u.array())) +
        em.ops.boundary_mass.dot(Vec(em.h_lam.array().abs() * eu.array()));
    try {
      rec.profile = rescale_profile(em, sad.u, loc);
      rec.r_n = rec.profile->r_n;
      rec.r_over_lambda = rec.r_n / lam;
      if (rec.profile->samples.rows() >= 200) {
        rec.fit = fit_bubble(*rec.profile);
      } else {
        rec.note += "; profile under-sampled, fit skipped";
      }
    } catch (const std::exception& e) {
      rec.note += std::string("; profile/fit: ") + e.what();
    }

    prev = sad.u;
    have_prev = true;
    out.levels.push_back(std::move(rec));
  }

  out.mass_bounds_ok = true;
  double umax_prev = -std::numeric_limits<double>::infinity();
  out.umax_increasing = true;
  std::vector<double> ratios;
  bool any_converged = false;
  for (const auto& rec : out.levels) {
    if (!rec.converged) continue;
    any_converged = true;
    if (rec.area_mass + rec.boundary_mass > 2.0 * kPi * 1.2) {
      out.mass_bounds_ok = false;
    }
    out.max_total_curvature =
        std::max(out.max_total_curvature, rec.total_curvature);
    if (!(rec.umax > umax_prev)) out.umax_increasing = false;
    umax_prev = rec.umax;
    if (rec.r_over_lambda > 0.0) ratios.push_back(rec.r_over_lambda);
  }
  if (!any_converged) {
    out.mass_bounds_ok = false;
    out.umax_increasing = false;
  }
  out.r_ratio_decreasing_last4 = ratios.size() >= 4;
  for (std::size_t i = ratios.size() >= 4 ? ratios.size() - 4 : 0;
       i + 1 < ratios.size(); ++i) {
    if (!(ratios[i + 1] < ratios[i])) out.r_ratio_decreasing_last4 = false;
  }
  return out;
}

BlowupCount count_blowup_points(const SweepResult& sw, double threshold) {
  BlowupCount out;
  std::vector<V2> anchors;
  std::vector<V2> sums;
  std::vector<int> counts;
  for (const auto& rec : sw.levels) {
    if (!rec.converged || !rec.profile) continue;
    const V2 x = rec.profile->x_n;
    out.C_peak = std::max(
        out.C_peak, wrap_delta(x, sw.p0).squaredNorm() / std::max(rec.mu, 1e-300));
    int hit = -1;
    for (std::size_t c = 0; c < anchors.size(); ++c) {
      if (wrap_delta(x, anchors[c]).norm() < threshold) {
        hit = static_cast<int>(c);
        break;
      }
    }
    if (hit < 0) {
      anchors.push_back(x);
      sums.push_back(V2::Zero());
      counts.push_back(0);
      hit = static_cast<int>(anchors.size()) - 1;
    }
    sums[hit] += wrap_delta(x, anchors[hit]);
    counts[hit] += 1;
  }
  for (std::size_t c = 0; c < anchors.size(); ++c) {
    V2 ctr = anchors[c] + sums[c] / std::max(counts[c], 1);
    ctr.x() = wrap01(ctr.x());
    ctr.y() = wrap01(ctr.y());
    out.centers.push_back(ctr);
  }
  out.N = static_cast<int>(out.centers.size());
  out.n_le_3 = out.N >= 1 && out.N <= 3;

  const BubbleFit* last = nullptr;
  for (const auto& rec : sw.levels) {
    if (rec.converged && rec.fit) last = &*rec.fit;
  }
  if (last) {
    if (last->c_inf <= 1e-8) {
      out.case_consistent = out.N == 1;
    } else if (last->d_inf <= 1e-8) {
      out.case_consistent = out.N <= 2;
    } else {
      out.case_consistent = out.N <= 3;
    }
  }
  return out;
}

}  // namespace curvlab
