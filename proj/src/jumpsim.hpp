#pragma once

// Stochastic simulation of the binary-weight model families: the minimal
// model (exact Gillespie and tau-leaping), the co-evolving voter model and
// the hybrid bounded-confidence model.
//
// Flip-rate subscripts: alpha_pm is the rate at which a "+" agent linked to a
// "-" agent flips to "-", so agent i in state + flips at
//   r_i = (1/N) sum_{j != i} w_ij alpha_pm [s_j = -]
// and symmetrically with alpha_mp for "-" agents. A "-" agent turning "+"
// is what feeds f_pp through the alpha_mp f_pm^2 / rho_m gain term of the
// conditional closure.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"
#include "models.hpp"
#include "rng.hpp"

namespace coevo {

/// States in {-1, +1}, symmetric 0/1 adjacency with zero diagonal.
struct DiscreteConfiguration {
  std::size_t n = 0;
  std::vector<std::int8_t> states;
  std::vector<std::uint8_t> weights;  // n x n
  double t = 0.0;

  /// All agents "+", no links.
  static DiscreteConfiguration empty(std::size_t n);

  int s(std::size_t i) const { return states[i]; }
  bool w(std::size_t i, std::size_t j) const { return weights[i * n + j] != 0; }
  void set_link(std::size_t i, std::size_t j, bool on);
  std::size_t degree(std::size_t i) const;

  void validate() const;  // throws InvariantViolation
};

/// Continuous states (N x m) with a symmetric 0/1 adjacency.
struct HybridConfiguration {
  std::size_t n = 0;
  std::size_t m = 1;
  std::vector<double> states;
  std::vector<std::uint8_t> weights;
  double t = 0.0;

  static HybridConfiguration zeros(std::size_t n, std::size_t m = 1);
  ConstVec state(std::size_t i) const { return {states.data() + i * m, m}; }
  bool w(std::size_t i, std::size_t j) const { return weights[i * n + j] != 0; }
  void set_link(std::size_t i, std::size_t j, bool on);
  void validate() const;
};

enum class PairType { pp = 0, mm = 1, pm = 2 };
PairType pair_type(int a, int b);

struct PairRate {
  std::size_t i, j;  // i < j
  bool create;       // false: removal of an existing link
  double rate;
};

struct RateTable {
  std::vector<double> flip;     // per agent
  std::vector<PairRate> pairs;  // one entry per unordered pair
  double total = 0.0;
};

RateTable minimal_rates(const DiscreteConfiguration& cfg, const MinimalParams& p);

/// Aggregate pair-class counts, maintained incrementally by the simulators
/// so ensemble statistics never need an O(N^2) rescan.
struct PairClassCounts {
  std::size_t n = 0;
  std::size_t n_plus = 0;
  std::size_t links_pp = 0, links_mm = 0, links_pm = 0;  // unordered linked pairs
};

PairClassCounts count_pair_classes(const DiscreteConfiguration& cfg);

enum class EventType { flip, create, remove };
const char* to_string(EventType type);

struct JumpEvent {
  double t;
  EventType type;
  std::size_t i;
  std::size_t j;  // equals i for flips
};

enum class JumpMethod { gillespie, tau_leap };

struct JumpOptions {
  double T = 1.0;
  std::uint64_t seed = 0;
  JumpMethod method = JumpMethod::gillespie;
  /// Tau-leap step. Ignored by gillespie.
  double dt = 0.01;
  /// Gillespie only: if positive, record on the grid k * sample_dt instead
  /// of after every event.
  double sample_dt = 0.0;
};

using DiscreteObserver = std::function<void(const DiscreteConfiguration&, const PairClassCounts&)>;
using EventObserver = std::function<void(const JumpEvent&)>;

/// Records the initial configuration, then either every event (gillespie
/// without sample_dt), the sample grid, or every tau-leap step; the final
/// record is always at t = T. A zero total rate fast-forwards to T.
void simulate_minimal(const DiscreteConfiguration& cfg, const MinimalParams& p, const JumpOptions& opts,
                      const DiscreteObserver& observer, const EventObserver& events = nullptr);
std::vector<DiscreteConfiguration> simulate_minimal(const DiscreteConfiguration& cfg, const MinimalParams& p,
                                                    const JumpOptions& opts);

enum class VoterVariant { pq, original };

struct VoterOptions {
  double p = 0.0;  // rewiring probability
  double q = 0.0;  // pq variant: probability of cutting the discordant link
  VoterVariant variant = VoterVariant::pq;
  double T = 1.0;
  std::uint64_t seed = 0;
  /// If positive, record on a grid; otherwise after every clock firing.
  double sample_dt = 0.0;
};

/// Applies the interaction rule of agent i with its selected neighbor j.
/// Concordant pairs do nothing. Returns the events performed.
std::vector<JumpEvent> voter_interaction(DiscreteConfiguration& cfg, std::size_t i, std::size_t j,
                                         const VoterOptions& opts, Rng& rng);

/// Every agent carries a unit-rate clock; an isolated agent's firing is
/// consumed without effect.
void simulate_voter(const DiscreteConfiguration& cfg, const VoterOptions& opts, const DiscreteObserver& observer,
                    const EventObserver& events = nullptr);
std::vector<DiscreteConfiguration> simulate_voter(const DiscreteConfiguration& cfg, const VoterOptions& opts);

enum class RemovalRule {
  /// Links break at rate (1 - r(|s_i - s_j|)) / tau, so the fast-link limit
  /// has w_ij = r(|s_i - s_j|) with r in [0, 1].
  complementary,
  /// Links break at the constant rate 1 / tau.
  constant,
};

struct HybridOptions {
  double tau = 1.0;  // may be +inf (frozen links)
  double dt = 1e-3;
  double T = 1.0;
  std::uint64_t seed = 0;
  RemovalRule removal = RemovalRule::complementary;
  std::size_t record_every = 1;
};

struct HybridRunInfo {
  std::vector<std::string> warnings;
  std::size_t link_events = 0;
};

using HybridObserver = std::function<void(const HybridConfiguration&)>;

/// Splitting per dt: RK4 on ds_i/dt = (1/N) sum_j w_ij (F(s_j) - s_i), then
/// each pair toggles with probability 1 - exp(-rate dt).
HybridRunInfo simulate_hybrid_bc(const HybridConfiguration& cfg, const ExternalForce& F, const ScalarFn& r,
                                 const HybridOptions& opts, const HybridObserver& observer);

}  // namespace coevo
