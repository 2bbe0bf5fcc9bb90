#pragma once

// Particle discretization of the mean-field characteristic systems. An
// ensemble carries M anchors S_i with masses and an M x M matrix of pair
// weights; anchor i's drift averages U over its partners j with masses m_j.

#include <functional>
#include <vector>

#include "microsim.hpp"

namespace coevo {

struct CharacteristicEnsemble {
  std::size_t M = 0;
  std::size_t m = 1;
  std::vector<double> anchors;       // M x m
  std::vector<double> pair_weights;  // M x M, zero diagonal
  std::vector<double> masses;        // sum to 1
  double t = 0.0;

  /// Equal masses 1/M, zero weights.
  static CharacteristicEnsemble uniform(std::size_t M, std::size_t m);

  ConstVec anchor(std::size_t i) const { return {anchors.data() + i * m, m}; }
  MutVec anchor(std::size_t i) { return {anchors.data() + i * m, m}; }
  double w(std::size_t i, std::size_t j) const { return pair_weights[i * M + j]; }
  double& w(std::size_t i, std::size_t j) { return pair_weights[i * M + j]; }

  /// Sizes, finiteness, masses >= 0 summing to 1 (1e-12) and zero diagonal.
  /// Throws InvariantViolation.
  void validate() const;
};

/// Initial pair weight as a function of the two anchor states.
using WeightProfile = std::function<double(ConstVec s, ConstVec sigma)>;

struct CharacteristicOptions {
  double dt = 1e-2;
  double T = 1.0;
  std::size_t record_every = 1;
  /// Abort when two initially distinct anchors come closer than this.
  double collision_distance = 0.0;
};

struct CharacteristicRun {
  std::vector<CharacteristicEnsemble> snapshots;
  /// Smallest distance between initially distinct anchors, per snapshot
  /// (infinity when there is no such pair).
  std::vector<double> min_distance;
};

/// RK4 on dS_i/dt = sum_{j != i} m_j U(S_i, S_j, W_ij) + U0(S_i),
/// dW_ij/dt = V(S_i, S_j, W_ij), with the pair weights free. With symmetric V
/// and symmetric initial weights the upper triangle is mirrored, so symmetry
/// is kept bitwise. Throws IntegrationError on non-finite values and
/// InvariantViolation on an anchor collision.
CharacteristicRun integrate_characteristics_conditional(const CharacteristicEnsemble& ens0,
                                                        const SmoothModel& model,
                                                        const CharacteristicOptions& opts);

/// Weight-concentration variant: pair weights start at W0(S_i, S_j) and are
/// then carried along the same flow.
CharacteristicRun integrate_characteristics_wc(const CharacteristicEnsemble& ens0, const SmoothModel& model,
                                               const WeightProfile& W0, const CharacteristicOptions& opts);

using SingleObservable = std::function<double(ConstVec s)>;
using PairObservable = std::function<double(ConstVec s, ConstVec sigma, double w)>;

/// sum_i m_i phi(S_i).
double pushforward(const CharacteristicEnsemble& ens, const SingleObservable& phi);
/// sum_{i != j} m_i m_j phi(S_i, S_j, W_ij), divided by
/// Z = sum_{i != j} m_i m_j when normalized (the default).
double pushforward_pair(const CharacteristicEnsemble& ens, const PairObservable& phi, bool normalized = true);
double pair_normalization(const CharacteristicEnsemble& ens);

struct PairEnergy {
  double energy = 0.0;  // normalized pair pushforward of F
  /// (1/Z) [2 sum_i m_i |sum_{j != i} m_j grad_s F(S_i, S_j, W_ij)|^2
  ///        + c sum_{i != j} m_i m_j (dF/dw)^2], equal to -dE/dt along the
  /// flow of the derived forces when F is symmetric in (s, sigma).
  double dissipation = 0.0;
};

PairEnergy pair_energy_dissipation(const CharacteristicEnsemble& ens, const PotentialModel& pot);

}  // namespace coevo
