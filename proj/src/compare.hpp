#pragma once

// Micro-versus-closure comparison on the minimal model, and the fast-weight
// epsilon sweep of the continuous system.

#include <array>
#include <vector>

#include "closures.hpp"
#include "jumpsim.hpp"
#include "microsim.hpp"

namespace coevo {

/// Independent Bernoulli states and independent links with per-type
/// densities; the expected initial moments are then known exactly.
struct RandomMinimalInit {
  double rho_p = 0.5;
  double link_pp = 0.5, link_mm = 0.5, link_pm = 0.5;

  void validate() const;
  DiscreteConfiguration sample(std::size_t n, Rng& rng) const;
  /// E[minimal_moments] of a sampled configuration.
  MinimalMoments expected_moments() const;
};

struct ComparisonOptions {
  std::size_t n = 100;
  std::size_t runs = 10;
  double T = 1.0;
  double dt = 0.1;  // sampling grid; T must be a multiple of dt
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  JumpMethod method = JumpMethod::gillespie;
  /// Flip rates of the closures are alpha_scale times the micro rates. The
  /// micro flip rate alpha L/N gives d rho_p / dt = (alpha_mp - alpha_pm) f_pm,
  /// the closures carry (alpha_mp - alpha_pm) f_pm / 2, hence 2.
  double alpha_scale = 2.0;
  double closure_dt = 1e-3;  // upper bound for the RK4 step
};

struct ComparisonReport {
  MinimalParams params;          // micro rates
  MinimalParams closure_params;  // rates handed to the closures
  RandomMinimalInit init;
  ComparisonOptions options;

  std::vector<double> t;
  std::vector<MinimalMoments> mean;      // ensemble mean per sample
  std::vector<std::array<double, 6>> standard_error;  // sd / sqrt(runs) per component
  std::vector<MinimalMoments> conditional, kirkwood;
  /// |mean - closure| per component and sample.
  std::vector<std::array<double, 6>> error_conditional, error_kirkwood;

  double sup_error_conditional = 0.0;
  double sup_error_kirkwood = 0.0;
  double monte_carlo_stderr = 0.0;  // sup over samples and components
  /// rho_p gaps, sup over samples.
  double rho_error_conditional = 0.0, rho_error_kirkwood = 0.0;
  /// Standard error of the mean rho_p increment rho_p(t) - rho_p(0), sup over
  /// samples.
  double rho_stderr = 0.0;
  /// sup |rho_p + rho_m - 1| of the ensemble mean.
  double normalization_error = 0.0;
  bool conditional_consensus = false, kirkwood_consensus = false;
};

/// Runs `runs` replicas (streams of `seed` indexed by r), averages
/// minimal_moments on the dt grid and integrates both closures from the
/// ensemble-mean initial moments.
/// Replica r depends only on (seed, r), so reports are identical for any
/// worker count.
ComparisonReport run_comparison(const MinimalParams& p, const RandomMinimalInit& init, const ComparisonOptions& opts);

struct EpsilonGap {
  double eps = 0.0;
  double gap = 0.0;  // sup_i |s_i^micro(T) - s_i^reduced(T)|
};

struct EpsilonSweep {
  std::vector<EpsilonGap> gaps;
  /// Entries are sorted by decreasing eps; the flags refer to that order.
  bool strictly_decreasing = true;
  bool non_increasing = true;
};

/// Weights start on the nullcline omega(s_i, s_j) plus `weight_offset`, then
/// integrate_micro(eps_w = eps) is compared with integrate_reduced at T.
EpsilonSweep run_epsilon_sweep(const SmoothModel& model, const AgentConfiguration& cfg0,
                               const std::vector<double>& eps_list, double dt, double T, double weight_offset = 0.0);

}  // namespace coevo
