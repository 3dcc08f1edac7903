#pragma once

#include <array>
#include <functional>

#include "curvlab/blowup.hpp"

namespace curvlab {

struct NonConvergentTail : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalar field on the half plane {t >= t0}; gradient/Laplacian optional
// (finite differences otherwise). A enters through F(x) = 1 + (Ax, x) with
// x = (s - 0, t - t0) measured from the boundary.
struct HalfPlaneProfile {
  std::function<double(double, double)> w;
  std::function<V2(double, double)> grad_w;
  std::function<double(double, double)> lap_w;
  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  double t0 = 0.0;
  double s_center = 0.0;          // polar center along the boundary
  double curv_weight = 1.0;       // c_inf for closed-form bubbles, else 1
  double bdry_weight = 1.0;       // d_inf for closed-form bubbles, else 1
  std::array<double, 3> radii{40.0, 80.0, 160.0};
  double quad_tol = 1e-9;
  double tail_tol = 1e-4;
  bool is_bubble = false;
  BubbleFit params;               // meaningful when is_bubble
};

// w = log(2L) - log(cL^2 + (s-s0)^2 + (t-t0+dL)^2) with analytic gradient
// and Laplacian. Requires L > 0, (c,d) in [0,1]^2, not both zero.
HalfPlaneProfile bubble_closed_form(double Lambda, double s0, double t0,
                                    double c_inf, double d_inf);

// -lap(w) - cw * F * e^{2w} at an interior point, and the outward-normal
// boundary residual dw/dnu - bw * e^w at t = t0; weights default to the
// profile's own, overridable for testing a profile against another system.
double interior_residual(const HalfPlaneProfile& p, double s, double t);
double boundary_residual(const HalfPlaneProfile& p, double s);

struct LiouvilleReport {
  double V0 = 0.0, V0_err = 0.0;   // integral of e^{2w}
  double H0 = 0.0, H0_err = 0.0;   // boundary integral of e^{w}
  double K0 = 0.0, K0_err = 0.0;   // curv_weight * integral of F e^{2w}
  double d = 0.0, d_err = 0.0;     // (K0 + bdry_weight * H0) / pi
  double beta = 0.0;               // 2 pi d / sqrt(d^2 + c), bubbles only
  double pohozaev_lhs = 0.0, lhs_err = 0.0;  // (1/pi) int 2(Ax,x) e^{2w}
  double residual = 0.0;           // pohozaev_lhs - d (d - 2)
  bool tail_converged = false;
  std::array<double, 3> radii{0.0, 0.0, 0.0};
};

// Truncated masses on half-disks R1 < R2 < R3 with geometric-ratio
// Richardson extrapolation per component. Throws NonConvergentTail when the
// extrapolants disagree badly (log-divergent tails do this by design).
LiouvilleReport halfplane_masses(const HalfPlaneProfile& p);
LiouvilleReport pohozaev_residual(const HalfPlaneProfile& p);

enum class CertVerdict { Inconsistent, Inapplicable, Consistent };

struct CertificateResult {
  CertVerdict verdict = CertVerdict::Inapplicable;
  LiouvilleReport report;
  double max_pde_residual = 0.0;
  double eps_d = 0.05;
  double eps_p = 1e-3;
  std::string note;
};

// Pohozaev contradiction check for the system -lap(w) = F e^{2w},
// dw/dnu = e^w with F = 1 + (Ax,x), A negative definite. A profile that
// fails the pointwise PDE residual gate is Inapplicable; one that passes it
// and exhibits the sign contradiction is Inconsistent. Consistent would be a
// counterexample and is never expected.
CertificateResult nonexistence_certificate(const Eigen::Matrix2d& A,
                                           const HalfPlaneProfile& profile,
                                           double pde_tol);

// Best-effort least-squares candidate for the A-system inside the bubble
// family (box Lambda in [0.2, 5], c,d in [0,1], t0 >= 0); used to feed the
// certificate with near-solutions.
HalfPlaneProfile fit_system_candidate(const Eigen::Matrix2d& A);

}  // namespace curvlab
