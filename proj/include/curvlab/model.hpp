#pragma once

// Curvature prescriptions with a shared nondegenerate boundary maximum, and
// the discrete energy functional
//
//   I(u) = 1/2 <u,Su> + <K_g,u>_M - 1/2 <f_mu, e^{2u}>_M
//        + <kappa_g,u>_B - <h_lambda, e^u>_B
//
// whose critical points solve the prescribed-curvature system on the holed
// torus. Nonlinear terms use lumped (nodal) quadrature, which makes the
// parameter-comparison identities exact at the discrete level.

#include "curvlab/mesh.hpp"

#include <optional>

namespace curvlab {

struct CurvatureData {
  Vec f;            // per-vertex, max 0 attained at p0 only
  Vec h;            // per-vertex, supported on the boundary, max 0 at p0
  double mu = 0.0;      // f_mu = f + mu
  double lambda = 0.0;  // h_lambda = h + lambda
  int p0 = -1;          // boundary vertex carrying the shared maximum
  double amplitude_f = 1.0;
  double amplitude_h = 1.0;
};

// f(x) = -amp_f (sin^2(pi(x1-q1)) + sin^2(pi(x2-q2))), q = boundary vertex
// nearest the given circle angle; h follows the analogous arclength profile
// along the boundary loop. Both are smooth, nonpositive, zero only at q.
CurvatureData make_prescription(const Mesh& m, double p0_angle,
                                double amplitude_f, double amplitude_h);

// the analytic torus profile behind f (tests probe its Hessian at q)
double prescription_f(const V2& x, const V2& q, double amplitude);

struct EnergyModel {
  const Mesh* mesh = nullptr;
  Operators ops;
  BackgroundCurvature bg;
  CurvatureData data;
  Vec f_mu;   // f + mu
  Vec h_lam;  // h + lambda on boundary vertices, 0 elsewhere
  SpMat B;    // stiffness + diag(mass): the discrete H^1 Gram matrix
};

EnergyModel make_model(const Mesh& m, Operators ops, BackgroundCurvature bg,
                       CurvatureData data);

// same mesh/prescription, new (mu, lambda)
EnergyModel with_parameters(const EnergyModel& base, double mu, double lambda);

// Overflow policy: e^{2u} is not representable once max(2u) > 700; energy,
// gradient and Hessian then return nullopt, a typed divergence signal that
// path/scan code treats as "energy = -inf direction encountered".
constexpr double kOverflowThreshold = 700.0;

inline bool diverges(const Vec& u) {
  return !u.allFinite() || 2.0 * u.maxCoeff() > kOverflowThreshold;
}

std::optional<double> energy(const EnergyModel& em, const Vec& u);
std::optional<Vec> gradient(const EnergyModel& em, const Vec& u);
std::optional<SpMat> hessian(const EnergyModel& em, const Vec& u);

// mass-weighted norms of the nodal strong-form residuals (interior equation,
// boundary equation); both small certifies a discrete solution
std::pair<double, double> pde_residual(const EnergyModel& em, const Vec& u);

struct CurvatureIntegrals {
  double area_term;      // int f_mu e^{2u} dv
  double boundary_term;  // int h_lambda e^u dsigma
  double gb_residual;    // area + boundary - (-2*pi)
};

CurvatureIntegrals curvature_integrals(const EnergyModel& em, const Vec& u);

}  // namespace curvlab
