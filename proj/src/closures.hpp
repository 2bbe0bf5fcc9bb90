#pragma once

// Closed six-moment ODE systems of the minimal model (conditional and
// Kirkwood closures), their stationary sets, linear and nonlinear stability
// checks, and the continuation of the polarized family to small cross-link
// creation rates.

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moments.hpp"

namespace coevo {

inline constexpr double kConsensusDelta = 1e-10;
inline constexpr double kClampFloor = -1e-9;

namespace detail {

inline double value_of(double x) { return x; }
template <class T>
double value_of(const T& x) {
  return x.value();
}

}  // namespace detail

/// Right-hand side on the array (f_pp, g_pp, f_mm, g_mm, f_pm, g_pm).
/// Generic in the scalar type so Jacobians can be taken by automatic
/// differentiation. Throws ConsensusBoundary when rho_p rho_m <= delta.
template <class T>
std::array<T, 6> closure_rhs_generic(const std::array<T, 6>& y, const MinimalParams& p, ClosureKind kind,
                                     double delta = kConsensusDelta) {
  const T& fpp = y[0];
  const T& gpp = y[1];
  const T& fmm = y[2];
  const T& gmm = y[3];
  const T& fpm = y[4];
  const T& gpm = y[5];
  const T rp = fpp + gpp + fpm + gpm;
  const T rm = fmm + gmm + fpm + gpm;
  if (!(detail::value_of(rp) * detail::value_of(rm) > delta))
    throw ConsensusBoundary("rho_p * rho_m reached the consensus threshold");
  const double apm = p.alpha_pm, amp = p.alpha_mp;

  // Kirkwood weights the "+" gain, cross and "-" gain channels by pair
  // correlations; the conditional closure leaves them at 1.
  T kpp = T(1.0), kpm = T(1.0), kmm = T(1.0);
  if (kind == ClosureKind::kirkwood) {
    kpp = (fpp + gpp) / (rp * rp);
    kpm = (fpm + gpm) / (rp * rm);
    kmm = (fmm + gmm) / (rm * rm);
  }

  std::array<T, 6> d;
  d[0] = amp * fpm * fpm / rm * kpp - apm * fpp * fpm / rp * kpm + p.beta_pp * gpp - p.gamma_pp * fpp;
  d[1] = amp * gpm * fpm / rm * kpp - apm * gpp * fpm / rp * kpm - p.beta_pp * gpp + p.gamma_pp * fpp;
  d[2] = apm * fpm * fpm / rp * kmm - amp * fmm * fpm / rm * kpm + p.beta_mm * gmm - p.gamma_mm * fmm;
  d[3] = apm * gpm * fpm / rp * kmm - amp * gmm * fpm / rm * kpm - p.beta_mm * gmm + p.gamma_mm * fmm;
  d[4] = -amp * fpm * fpm / (2.0 * rm) * kpp + apm * fpp * fpm / (2.0 * rp) * kpm -
         apm * fpm * fpm / (2.0 * rp) * kmm + amp * fmm * fpm / (2.0 * rm) * kpm + p.beta_pm * gpm -
         p.gamma_pm * fpm;
  d[5] = -amp * gpm * fpm / (2.0 * rm) * kpp + apm * gpp * fpm / (2.0 * rp) * kpm -
         apm * gpm * fpm / (2.0 * rp) * kmm + amp * gmm * fpm / (2.0 * rm) * kpm - p.beta_pm * gpm +
         p.gamma_pm * fpm;
  return d;
}

std::array<double, 6> closure_rhs(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind,
                                  double delta = kConsensusDelta);

struct HValues {
  double h_pp = 0, h_mm = 0, h_pm = 0;
};

/// Closed h-equations; dh_pm = -(dh_pp + dh_mm) / 2.
HValues weight_averaged_rhs(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind);
/// Same equations with the single-particle densities supplied explicitly
/// (rho_m = 1 - rho_p) instead of being derived from h.
HValues weight_averaged_rhs(const HValues& h, double f_pm, double rho_p, const MinimalParams& p, ClosureKind kind);

struct ClosureOptions {
  double dt = 1e-3;
  double T = 1.0;
  double delta = kConsensusDelta;
  std::size_t record_every = 1;
};

struct ClosureTrajectory {
  std::vector<double> t;
  std::vector<MinimalMoments> moments;
  bool consensus_reached = false;  // stopped at rho_p rho_m < delta
  std::size_t clamp_events = 0;    // components pulled from (-1e-9, 0) to 0
  /// h_pp + h_mm < 1e-3 while rho_p rho_m > 0.1 at some sample.
  bool kirkwood_artifact = false;
  double max_normalization_drift = 0.0;  // sup |rho_p + rho_m - 1|
  double max_rho_drift = 0.0;            // sup |rho_p(t) - rho_p(0)|
};

/// RK4 at fixed step. Conservation of rho_p + rho_m (and of rho_p itself for
/// equal flip rates) is asserted to 1e-8; undershoots below -1e-9 raise
/// IntegrationError.
ClosureTrajectory integrate_closure(const MinimalMoments& m0, const MinimalParams& p, ClosureKind kind,
                                    const ClosureOptions& opts);

/// Polarized stationary point: f_pm = 0 and the same-state pairs split by
/// beta/(beta+gamma). Requires beta_pm = 0.
MinimalMoments stationary_polarized(const MinimalParams& p, double rho_p, double g_pm);

/// Weight-averaged densities of the mixed stationary state of the conditional
/// closure (Kirkwood admits one only for equal flip rates). For equal flip
/// rates returns (rho_p^2, rho_m^2, rho_p rho_m) directly.
HValues stationary_mixed_h(const MinimalParams& p, double rho_p);

struct Linearization {
  Eigen::Matrix<double, 6, 6> jacobian;
  std::vector<std::complex<double>> eigenvalues;
  double lambda_pm = 0.0;  // the f_pm diagonal entry
};

/// Closed-form linearization about a stationary point with f_pm = 0.
/// Throws ModelError if the point is not stationary (residual > 1e-10).
Linearization linearized_jacobian(const MinimalParams& p, const MinimalMoments& m_star, ClosureKind kind);

/// Central-difference Jacobian of closure_rhs.
Eigen::Matrix<double, 6, 6> numerical_jacobian(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind,
                                               double h = 1e-6);
/// Jacobian of closure_rhs by forward-mode automatic differentiation.
Eigen::Matrix<double, 6, 6> exact_jacobian(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind);

struct StabilityMargin {
  bool stable = false;
  double lhs = 0.0;  // gamma_pm
  double rhs = 0.0;
  double margin = 0.0;  // lhs - rhs
};

/// Sufficient linear-stability inequality for the polarized family at rho_p,
/// evaluated as displayed (gamma_pm against the beta-weighted alpha terms).
StabilityMargin polarization_stable(const MinimalParams& p, double rho_p);

struct DecayReport {
  bool holds = true;
  double rate = 0.0;         // gamma_pm - (alpha_pm + alpha_mp)/2, or without the 1/2 for Kirkwood
  double worst_ratio = 0.0;  // max_t f_pm(t) / (e^{-rate t} f_pm(0))
  std::size_t samples = 0;
  std::size_t first_violation = 0;  // index, valid when !holds
};

/// Checks f_pm(t) <= e^{-rate t} f_pm(0) (1 + 1e-9) at every sample.
DecayReport decay_envelope_check(const ClosureTrajectory& traj, const MinimalParams& p, ClosureKind kind);

struct StationaryBranch {
  double eps = 0.0;  // beta_pm
  MinimalMoments moments;
  double dfdeps = 0.0;
  double residual = 0.0;  // sup-norm of the full six-component right-hand side
  int iterations = 0;
  std::vector<std::string> notes;
};

struct ContinuationOptions {
  /// g_pm of the eps = 0 seed; negative selects the mixed-state value
  /// h_pm(rho_p), the point the f_pm > 0 branch emanates from.
  double g_pm_seed = -1.0;
  int max_iterations = 50;
  double tolerance = 1e-10;
};

/// Newton continuation of the polarized family to beta_pm = p.beta_pm on
/// the reduced system in (f_pp, f_mm, f_pm, g_pm), with g_pp and g_mm fixed
/// by rho_p. Steps are minimum-norm least-squares solutions, so the method
/// copes with the rank deficiency at eps = 0. Throws ContinuationFailed when
/// Newton does not converge or the full residual exceeds the tolerance.
StationaryBranch continue_small_epsilon(const MinimalParams& p, double rho_p, ClosureKind kind,
                                        const ContinuationOptions& opts = {});

}  // namespace coevo
