#pragma once

#include <stdexcept>
#include <vector>

#include "curvlab/solve.hpp"

namespace curvlab {

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScanExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CollapseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Logarithmic spike supported in a half-disk around a boundary point.
struct TestFunctionSpec {
  double mu = 1e-2;
  double L = 0.0;       // 0 -> largest admissible support, radius 0.499*rho
  double s = 1.0;       // amplitude multiplier
};

// Nodal sampling of s * z_mu(L|x - p0|/sqrt(mu)) where z_mu is the truncated
// logarithm: -log(mu) inside |y| <= mu, -log|y| up to 1, zero outside.
Vec build_test_function(const Mesh& mesh, const V2& p0,
                        const TestFunctionSpec& spec);

struct FarEndpoint {
  Vec v;
  double s_used = 0.0;
  double energy = 0.0;
  double energy_floor = 0.0;  // minimizer energy the scan had to undercut
};

// Doubles s until I(u0 + s*w) < I(minimizer) - 1.
FarEndpoint find_far_endpoint(const EnergyModel& em, const Vec& u0,
                              const Vec& w);

// Abstract energy over a path node; lets the deformation core be exercised on
// closed-form landscapes as well as the FEM functional.
struct PathEnergy {
  virtual ~PathEnergy() = default;
  virtual int dim() const = 0;
  virtual std::optional<double> energy(const Vec& u) const = 0;
  virtual std::optional<Vec> grad(const Vec& u) const = 0;
  virtual Vec precond_solve(const Vec& r) const = 0;       // B^{-1} r
  virtual double inner(const Vec& a, const Vec& b) const = 0;  // <a, B b>
};

struct PathState {
  std::vector<Vec> nodes;
  std::vector<double> energies;
  int max_index = 0;
};

struct DeformOptions {
  int max_sweeps = 400;
  double eta0 = 0.3;
  double gap_frac = 0.25;     // cutoff window as fraction of barrier height
  int stall_window = 30;
  double stall_rel = 1e-9;
};

struct DeformResult {
  PathState path;
  std::vector<double> max_energy_history;
  int sweeps = 0;
  bool converged = false;   // max-node gradient went below tol_path
  bool stalled = false;
  double gmax = 0.0;
};

DeformResult deform_path(const PathEnergy& pe, const Vec& p0, const Vec& p1,
                         int P, double tol_path,
                         const DeformOptions& opts = {});

struct MountainPassOptions {
  DeformOptions deform;
  double tol_path = 1e-3;
  double newton_tol = 1e-10;
  int newton_max_iter = 60;
  int k_eigen = 4;
  unsigned seed = 0;
};

struct MountainPassResult {
  double c_level = 0.0;
  CriticalPoint saddle;
  SpectralCertificate certificate;
  PathState path;
  std::vector<double> max_energy_history;
  double area_mass = 0.0;      // (mu/2) * integral of e^{2u} at the saddle
  double boundary_mass = 0.0;  // lambda * integral of e^{u} at the saddle
  int sweeps = 0;
  bool converged = false;
  std::string note;
};

// Deforms the path u0 -> v, then Newton-refines from the interior max node
// and certifies the result. Throws CollapseError when the refined point has
// no negative directions (path fell onto the minimizer basin).
MountainPassResult mountain_pass(const EnergyModel& em, const Vec& u0,
                                 const Vec& v, int P = 33,
                                 const MountainPassOptions& opts = {});

struct LevelScanResult {
  std::vector<double> mus;
  std::vector<double> lambdas;
  Eigen::MatrixXd c;             // c(i,j) for (mus[i], lambdas[j])
  Eigen::MatrixXd sigma_min;
  double delta_path = 0.0;       // c_level spread across P in {17,33,65}
  double s_shared = 0.0;
  bool monotone_mu = false;      // non-increasing in mu within delta_path
  bool monotone_lambda = false;
  bool bound_ok = false;         // c <= 4*pi*log(2/mu) per cell
  std::vector<std::string> cell_notes;
};

// Runs mountain_pass on every (mu, lambda) cell with one shared start u0 and
// one shared far endpoint (s chosen so the drop condition holds in every
// cell), so level comparisons see the same competitor path class.
LevelScanResult level_monotonicity_scan(const EnergyModel& base,
                                        const std::vector<double>& mus,
                                        const std::vector<double>& lambdas,
                                        int P = 33, unsigned seed = 0);

}  // namespace curvlab
