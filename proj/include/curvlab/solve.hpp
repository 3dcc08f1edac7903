#pragma once

// Damped Newton solver for critical points of the discrete energy and
// spectral certification of their type via the H^1-pencil
//
//   H(u) m = sigma (S + M) m.

#include "curvlab/model.hpp"

namespace curvlab {

enum class PointKind { minimizer, saddle, unknown };

struct SpectralCertificate {
  double sigma_min = 0.0;
  Vec eigenfield;
  int negative_count = 0;  // pencil eigenvalues below zero (by inertia)
  Vec eigenvalues;         // the k smallest, ascending
  int iterations = 0;
  double residual = 0.0;   // max ||H m - sigma B m|| / ||B m|| over computed pairs
  bool converged = false;
};

struct CriticalPoint {
  Vec u;
  double energy = 0.0;
  double grad_norm = 0.0;
  PointKind kind = PointKind::unknown;
  double min_eigenvalue = 0.0;
  double gb_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string note;
};

// Backtracking (factor 1/2, Armijo 1e-4) on the merit 1/2||grad I||^2; a
// singular Hessian is perturbed once by 1e-10 B and retried. Returns the best
// iterate with converged=false instead of throwing when the tolerance is not
// reached. When certify is set the spectral certificate fills kind/sigma_min.
CriticalPoint newton(const EnergyModel& em, const Vec& u_init,
                     double tol = 1e-10, int max_iter = 60,
                     bool certify = true, int k_eigen = 4, unsigned seed = 0);

// k smallest pencil eigenvalues: each one is bracketed by LDLT inertia
// bisection and resolved by shifted inverse iteration with B-deflation (the
// spectrum accumulates at 1, so Ritz iterations are avoided entirely);
// negative_count comes from the inertia at zero. Deterministic for a fixed
// seed.
SpectralCertificate min_eigen(const EnergyModel& em, const Vec& u, int k = 4,
                              unsigned seed = 0);

// number of pencil eigenvalues strictly below the shift (LDLT inertia)
int eigen_count_below(const EnergyModel& em, const Vec& u, double shift);

// Continuation from the unique (mu=0, lambda=0) solution: Newton warm-started
// at u0 on the perturbed model, certified. converged=false flags the expected
// Gauss-Bonnet obstruction when (mu, lambda) is too large.
CriticalPoint solve_minimizer_pair(const EnergyModel& em, double tol = 1e-10,
                                   int max_iter = 60, unsigned seed = 0);

}  // namespace curvlab
