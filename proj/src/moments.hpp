#pragma once

// Empirical one- and two-particle marginals, the six-moment summary of the
// minimal model, and the closed triplet collision integrals on the discrete
// pair space {-1,+1} x {-1,+1} x {0,1}.

#include <array>
#include <functional>
#include <vector>

#include "jumpsim.hpp"
#include "microsim.hpp"

namespace coevo {

/// Mass 1/(N(N-1)) per ordered pair (i, j), i != j, deposited at
/// (s_i, s_j, w_ij). Raw counts are kept as exact integers so marginals
/// computed from them round identically to direct single-particle counts.
struct PairHistogram {
  std::vector<double> state_edges;   // sorted, bins [e_k, e_{k+1}), last bin closed
  std::vector<double> weight_edges;
  std::vector<double> raw;           // ns x ns x nw ordered-pair counts
  std::size_t n = 0;
  double total = 0.0;                // N (N - 1)
  double overflow = 0.0;             // ordered pairs falling outside the bins

  std::size_t ns() const { return state_edges.size() - 1; }
  std::size_t nw() const { return weight_edges.size() - 1; }
  std::size_t index(std::size_t a, std::size_t b, std::size_t c) const { return (a * ns() + b) * nw() + c; }
  double mass(std::size_t a, std::size_t b, std::size_t c) const { return raw[index(a, b, c)] / total; }
  double overflow_mass() const { return overflow / total; }
};

struct StateHistogram {
  std::vector<double> edges;
  std::vector<double> raw;  // agent counts
  double total = 0.0;       // N
  double overflow = 0.0;

  std::size_t bins() const { return edges.size() - 1; }
  double mass(std::size_t k) const { return raw[k] / total; }
};

/// Bin index of x, or -1 when x lies outside [edges.front(), edges.back()].
long bin_of(const std::vector<double>& edges, double x);
std::vector<double> uniform_edges(double lo, double hi, std::size_t bins);

PairHistogram empirical_pair(const AgentConfiguration& cfg, const std::vector<double>& state_edges,
                             const std::vector<double>& weight_edges);
/// Discrete support: state bins (-, +) and weight bins (0, 1).
PairHistogram empirical_pair(const DiscreteConfiguration& cfg);

StateHistogram empirical_marginal1(const AgentConfiguration& cfg, const std::vector<double>& edges);
StateHistogram empirical_marginal1(const DiscreteConfiguration& cfg);
/// Sum over the second state and the weight.
StateHistogram first_marginal(const PairHistogram& h);
/// Sum over the first state and the weight.
StateHistogram second_marginal(const PairHistogram& h);

/// (f_pp, g_pp, f_mm, g_mm, f_pm, g_pm): f for linked, g for unlinked
/// ordered pairs; f_pm is the ordered (+, -) mass, equal to the (-, +) mass.
struct MinimalMoments {
  double f_pp = 0, g_pp = 0, f_mm = 0, g_mm = 0, f_pm = 0, g_pm = 0;

  double rho_p() const { return f_pp + g_pp + f_pm + g_pm; }
  double rho_m() const { return f_mm + g_mm + f_pm + g_pm; }
  double h_pp() const { return f_pp + g_pp; }
  double h_mm() const { return f_mm + g_mm; }
  double h_pm() const { return f_pm + g_pm; }
  double normalization() const { return h_pp() + h_mm() + 2.0 * h_pm(); }

  std::array<double, 6> to_array() const { return {f_pp, g_pp, f_mm, g_mm, f_pm, g_pm}; }
  static MinimalMoments from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

  /// Nonnegativity and h_pp + h_mm + 2 h_pm = 1 within tol. Throws
  /// InvariantViolation.
  void validate(double tol = 1e-12) const;
};

MinimalMoments minimal_moments(const DiscreteConfiguration& cfg);
MinimalMoments minimal_moments(const PairClassCounts& counts);

enum class ClosureKind { conditional, kirkwood };
const char* to_string(ClosureKind kind);

/// Pair mass on the 8-point discrete space, indexed by (s1, s2, w).
struct DiscretePairMass {
  std::array<double, 8> mass{};

  static std::size_t index(int s1, int s2, int w) { return (s1 < 0 ? 4 : 0) + (s2 < 0 ? 2 : 0) + (w ? 1 : 0); }
  double operator()(int s1, int s2, int w) const { return mass[index(s1, s2, w)]; }
  double rho(int s) const;           // first marginal
  double h(int s1, int s2) const;    // weight-averaged pair mass

  static DiscretePairMass from_moments(const MinimalMoments& m);
  static DiscretePairMass from_histogram(const PairHistogram& h);  // discrete support only
};

/// Kernel U(s1, s3, w13) of the triplet collision term.
using DiscreteKernel = std::function<double(int s1, int s3, int w13)>;

/// Closed approximation of the triplet integral
///   I(s1, s2, w12) = sum_{s3, w13, w23} U(s1, s3, w13) mu3(s1, s2, s3, w12, w13, w23)
/// with mu3 replaced by the conditional closure
///   mu2(s1, s2, w12) mu2(s1, s3, w13) / mu1(s1)
/// or the Kirkwood closure
///   mu2(s1, s2, w12) mu2(s1, s3, w13) mu2(s2, s3, w23) / (mu1(s1) mu1(s2) mu1(s3)).
/// Throws ClosureSingular when a required single-particle mass vanishes.
DiscretePairMass triplet_integral(const DiscretePairMass& mu2, const DiscreteKernel& U, ClosureKind kind);

/// Rate at which agent 1 of the pair flips: alpha(s1 -> -s1) w13 [s3 != s1].
DiscreteKernel flip_kernel(const MinimalParams& p);

/// State-flip contribution to d/dt of the six moments, assembled from the
/// closed triplet integrals as half the symmetric sum over both pair
/// members of (gain from the flipped pair) - (loss from this pair).
std::array<double, 6> flip_collision_terms(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind);

}  // namespace coevo
