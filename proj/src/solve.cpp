#include "curvlab/solve.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <map>

namespace curvlab {

namespace {

// deterministic gaussian stream (library distributions are not portable)
struct Rng {
  std::uint64_t s;
  explicit Rng(unsigned seed) : s(0x9e3779b97f4a7c15ULL ^ (seed + 1)) {}
  double uniform() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return (s >> 11) * 0x1.0p-53;
  }
  double gaussian() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586 * u2);
  }
};

struct PencilInertia {
  bool ok = false;
  int below = 0;
};

PencilInertia inertia_below(const SpMat& H, const SpMat& B, double shift) {
  PencilInertia out;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const double s = shift + attempt * std::max(1e-12, 1e-10 * std::abs(shift));
    SpMat A = H - s * B;
    Eigen::SimplicialLDLT<SpMat> ldlt(A);
    if (ldlt.info() != Eigen::Success) continue;
    const Vec d = ldlt.vectorD();
    if (!d.allFinite()) continue;
    // pivots at roundoff scale (flat pencil probed on its kernel) count as zero
    const double floor = 1e-12 * d.cwiseAbs().maxCoeff();
    out.below = static_cast<int>((d.array() < -floor).count());
    out.ok = true;
    return out;
  }
  return out;
}

}  // namespace

int eigen_count_below(const EnergyModel& em, const Vec& u, double shift) {
  const auto H = hessian(em, u);
  if (!H) throw quality_error("Hessian unavailable (divergent field)");
  const auto r = inertia_below(*H, em.B, shift);
  if (!r.ok) throw quality_error("inertia factorization failed");
  return r.below;
}

SpectralCertificate min_eigen(const EnergyModel& em, const Vec& u, int k,
                              unsigned seed) {
  SpectralCertificate cert;
  const auto Hopt = hessian(em, u);
  if (!Hopt) return cert;
  const SpMat& H = *Hopt;
  const SpMat& B = em.B;
  const int nv = static_cast<int>(u.size());
  k = std::min(k, nv);
  if (k < 1) return cert;

  // The pencil spectrum accumulates at 1 (H and B share the stiffness part),
  // which stalls Ritz iterations with any fixed subspace size. Instead each of
  // the k lowest eigenvalues is located by inertia bisection, then resolved by
  // inverse iteration shifted just below its bracket.
  Eigen::SimplicialLDLT<SpMat> probe;
  bool analyzed = false;
  std::map<double, int> counts;  // probe cache, shared across brackets
  auto count_below = [&](double s) -> int {
    if (auto it = counts.find(s); it != counts.end()) return it->second;
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double ss = s + attempt * std::max(1e-12, 1e-10 * std::abs(s));
      SpMat A = H - ss * B;
      A.makeCompressed();
      if (!analyzed) {
        probe.analyzePattern(A);
        analyzed = true;
      }
      probe.factorize(A);
      if (probe.info() != Eigen::Success) continue;
      const Vec d = probe.vectorD();
      if (!d.allFinite()) continue;
      const double floor = 1e-12 * d.cwiseAbs().maxCoeff();
      const int below = static_cast<int>((d.array() < -floor).count());
      counts[s] = below;
      return below;
    }
    return -1;
  };

  cert.negative_count = count_below(0.0);

  // window: no eigenvalue below lo, at least k below hi
  double lo = -1.0, hi = 1.0;
  for (int i = 0; i <= 60; ++i) {
    const int c = count_below(lo);
    if (c < 0 || i == 60) return cert;
    if (c == 0) break;
    lo *= 4.0;
  }
  for (int i = 0; i <= 60; ++i) {
    const int c = count_below(hi);
    if (c < 0 || i == 60) return cert;
    if (c >= k) break;
    hi *= 4.0;
  }

  // j-th eigenvalue (1-based) = inf{s : count(s) >= j}, bracketed to ~1e-9
  auto locate = [&](int j, double& a, double& b) -> bool {
    a = lo;
    b = hi;
    for (const auto& [s, c] : counts) {
      if (c >= 0 && c < j && s > a) a = s;
      if (c >= j && s < b) b = s;
    }
    while (b - a > 1e-9 * (1.0 + std::abs(a) + std::abs(b))) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      const int c = count_below(mid);
      if (c < 0) return false;
      (c < j ? a : b) = mid;
    }
    return true;
  };

  Rng rng(seed);
  Eigen::MatrixXd V(nv, k);
  Vec theta = Vec::Zero(k);
  Eigen::SparseLU<SpMat> lu;
  double sigma = 0.0;
  bool have_lu = false;

  // twice-through classical Gram-Schmidt against the accepted columns
  auto b_deflate = [&](Vec& x, int j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i < j; ++i) x -= V.col(i).dot(B * x) * V.col(i);
    }
  };

  for (int j = 0; j < k; ++j) {
    double a, b;
    if (!locate(j + 1, a, b)) return cert;
    const double margin = 1e-9 * (1.0 + std::abs(a));
    const double want = a - margin;
    // inside a tight cluster keep the previous factorization; deflation
    // separates the mates
    const bool reuse = have_lu && j > 0 && want <= theta[j - 1] + 2.0 * margin;
    if (!reuse) {
      SpMat A = H - want * B;
      A.makeCompressed();
      lu.compute(A);
      if (lu.info() != Eigen::Success) return cert;
      sigma = want;
      have_lu = true;
    }

    Vec x(nv);
    for (int i = 0; i < nv; ++i) x[i] = rng.gaussian();
    b_deflate(x, j);
    double n2 = x.dot(Vec(B * x));
    if (!(n2 > 0.0)) return cert;
    x /= std::sqrt(n2);

    double best_res = std::numeric_limits<double>::infinity();
    Vec best = x;
    double best_theta = 0.0;
    for (int it = 0; it < 50; ++it) {
      ++cert.iterations;
      Vec y = lu.solve(Vec(B * x));
      if (!y.allFinite()) break;
      b_deflate(y, j);
      n2 = y.dot(Vec(B * y));
      if (!(n2 > 0.0) || !std::isfinite(n2)) break;
      x = y / std::sqrt(n2);
      const Vec hx = H * x;
      const Vec bx = B * x;
      const double th = x.dot(hx);
      const double res = (hx - th * bx).norm() / bx.norm();
      if (res < best_res) {
        best_res = res;
        best = x;
        best_theta = th;
      }
      if (res <= 2.5e-9) break;
    }
    V.col(j) = best;
    theta[j] = best_theta;
    (void)sigma;
  }

  // Rayleigh-Ritz over the accepted block: sorts the values and cleans any
  // residual mixing inside clusters
  Eigen::MatrixXd Hp = V.transpose() * (H * V);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Hp + Hp.transpose()));
  theta = es.eigenvalues();
  V = V * es.eigenvectors();

  double worst = 0.0;
  for (int j = 0; j < k; ++j) {
    const Vec hx = H * V.col(j);
    const Vec bx = B * V.col(j);
    worst = std::max(worst, (hx - theta[j] * bx).norm() / bx.norm());
  }
  cert.residual = worst;
  cert.converged = worst <= 1e-8;

  cert.eigenvalues = theta;
  cert.sigma_min = theta[0];
  cert.eigenfield = V.col(0);
  if (cert.negative_count < 0) {
    cert.negative_count =
        static_cast<int>((cert.eigenvalues.array() < 0.0).count());
  }
  return cert;
}

CriticalPoint newton(const EnergyModel& em, const Vec& u_init, double tol,
                     int max_iter, bool certify, int k_eigen, unsigned seed) {
  CriticalPoint cp;
  cp.u = u_init;
  if (diverges(u_init)) {
    cp.note = "divergent start";
    return cp;
  }

  Vec g = *gradient(em, cp.u);
  cp.grad_norm = g.norm();
  for (int it = 0; it < max_iter && cp.grad_norm >= tol; ++it) {
    cp.iterations = it + 1;
    const SpMat H = *hessian(em, cp.u);
    Eigen::SparseLU<SpMat> lu;
    SpMat A = H;
    A.makeCompressed();
    lu.compute(A);
    Vec step;
    bool have_step = false;
    if (lu.info() == Eigen::Success) {
      step = lu.solve(Vec(-g));
      have_step = step.allFinite();
    }
    if (!have_step) {
      // minimal Tikhonov fallback, tried once per iteration
      A = H + 1e-10 * em.B;
      A.makeCompressed();
      lu.compute(A);
      if (lu.info() != Eigen::Success) {
        cp.note = "linear solve failure";
        break;
      }
      step = lu.solve(Vec(-g));
      if (!step.allFinite()) {
        cp.note = "linear solve failure";
        break;
      }
      cp.note = "regularized Hessian step";
    }

    // Armijo on the merit 1/2||g||^2; the Newton direction gives slope -2*merit
    const double merit = 0.5 * cp.grad_norm * cp.grad_norm;
    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-12) {
      const Vec ut = cp.u + alpha * step;
      const auto gt = gradient(em, ut);
      if (gt && 0.5 * gt->squaredNorm() <= (1.0 - 2e-4 * alpha) * merit) {
        cp.u = ut;
        g = *gt;
        cp.grad_norm = g.norm();
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      cp.note = "line search stalled";
      break;
    }
  }
  cp.converged = cp.grad_norm < tol;

  const auto E = energy(em, cp.u);
  cp.energy = E ? *E : std::numeric_limits<double>::quiet_NaN();
  cp.gb_residual = curvature_integrals(em, cp.u).gb_residual;

  if (certify && cp.converged) {
    const auto cert = min_eigen(em, cp.u, k_eigen, seed);
    cp.min_eigenvalue = cert.sigma_min;
    if (cert.converged) {
      if (cert.negative_count == 0 && cert.sigma_min > 0.0) {
        cp.kind = PointKind::minimizer;
      } else if (cert.negative_count >= 1 && cert.sigma_min < 0.0) {
        cp.kind = PointKind::saddle;
      }
    }
  }
  return cp;
}

CriticalPoint solve_minimizer_pair(const EnergyModel& em, double tol,
                                   int max_iter, unsigned seed) {
  const EnergyModel base = with_parameters(em, 0.0, 0.0);
  CriticalPoint u0 = newton(base, Vec::Zero(em.mesh->num_vertices()), tol,
                            max_iter, /*certify=*/false);
  if (!u0.converged) {
    u0.note = "base (0,0) solve failed: " + u0.note;
    return u0;
  }
  CriticalPoint cp = newton(em, u0.u, tol, max_iter, /*certify=*/true, 4, seed);
  if (cp.converged && cp.kind != PointKind::minimizer) {
    cp.note = "continuation limit is not a certified minimizer";
  }
  if (!cp.converged) {
    cp.note = "continuation failed (Gauss-Bonnet obstruction regime): " + cp.note;
  }
  return cp;
}

}  // namespace curvlab
