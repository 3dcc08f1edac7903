#pragma once

#include <optional>
#include <string>
#include <vector>

#include "curvlab/mpass.hpp"

namespace curvlab {

struct FitDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// lambda_k = lambda0 * 2^{ -k }, mu_k = lambda_k^2 (window midpoint)
struct SweepSchedule {
  double lambda0 = 0.1;
  int levels = 5;

  std::vector<std::pair<double, double>> pairs() const;  // (mu_k, lambda_k)
  bool window_ok() const;  // |mu_k - lambda_k^2| <= lambda_k^3 for every k
};

// Blow-up rescaling w(x) = u(x_n + r_n x) - u(x_n) sampled on a structured
// half-plane grid in the boundary chart (s along the circle, t radial).
struct RescaledProfile {
  V2 x_n = V2::Zero();          // chart location of the peak (a vertex)
  double r_n = 0.0;             // from r_n * lambda * e^{u(x_n)} = 1
  double t0_est = 0.0;          // (|x_n - center| - rho) / r_n
  double mu = 0.0;
  double lambda = 0.0;
  double u_peak = 0.0;
  Eigen::MatrixX3d samples;     // rows (s, t, w), w <= 0, w = 0 at the peak
  bool peak_on_wrong_region = false;  // global argmax fell where f_mu < 0
};

RescaledProfile rescale_profile(const EnergyModel& em, const Vec& u,
                                const Locator& loc);

struct BubbleFit {
  double Lambda = 1.0;
  double s0 = 0.0;
  double t0 = 0.0;
  double c_inf = 1.0;
  double d_inf = 1.0;
  double rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// log(2L) - log(cL^2 + (s-s0)^2 + (t-t0+dL)^2) evaluated pointwise
double bubble_model(double s, double t, const BubbleFit& p);

// Box-constrained Levenberg-Marquardt over (Lambda, s0, t0, c_inf, d_inf),
// multi-started over (Lambda, c, d) in {0.5,1,2} x {0,1/2,1} x {0,1/2,1}
// with d forced to 1 whenever c starts at 0. Throws FitDiverged if every
// start fails.
BubbleFit fit_bubble_samples(const Eigen::MatrixX3d& samples, double t0_est);
BubbleFit fit_bubble(const RescaledProfile& profile);

struct SweepLevelRecord {
  int k = 0;
  double mu = 0.0;
  double lambda = 0.0;
  bool converged = false;
  double minimizer_energy = 0.0;
  double c_level = 0.0;
  double sigma_min = 0.0;
  int negative_count = 0;
  double umax = 0.0;
  double area_mass = 0.0;      // (mu/2) integral e^{2u}
  double boundary_mass = 0.0;  // lambda integral e^{u}
  double total_curvature = 0.0;
  double r_n = 0.0;
  double r_over_lambda = 0.0;
  Vec saddle_u;
  std::optional<RescaledProfile> profile;
  std::optional<BubbleFit> fit;
  std::string note;
};

struct SweepResult {
  SweepSchedule schedule;
  V2 p0 = V2::Zero();
  std::vector<SweepLevelRecord> levels;
  bool mass_bounds_ok = false;        // area + boundary mass <= 2*pi*1.2
  double max_total_curvature = 0.0;
  bool umax_increasing = false;       // strictly, across converged levels
  bool r_ratio_decreasing_last4 = false;
};

// Level 0 runs the full mountain pass from the (0,0) solution; later levels
// warm-start Newton from the previous saddle (branch following, disclosed in
// the record notes). Per-level failures are recorded and the sweep continues.
SweepResult sweep(const EnergyModel& base, const SweepSchedule& schedule,
                  int P = 33, unsigned seed = 0);

struct BlowupCount {
  int N = 0;
  std::vector<V2> centers;
  bool n_le_3 = false;
  bool case_consistent = false;  // against the (c_inf, d_inf) case table
  double C_peak = 0.0;           // max |x_n - p0|^2 / mu over levels
};

BlowupCount count_blowup_points(const SweepResult& sw, double threshold);

}  // namespace curvlab
