#pragma once

// Continuous microscopic dynamics
//   ds_i/dt  = (1/eps_s) (1/N) sum_{j != i} U(s_i, s_j, w_ij) + U0(s_i)
//   dw_ij/dt = (1/eps_w) V(s_i, s_j, w_ij)
// with deterministic (RK4 / Euler / RKF45) and Euler-Maruyama integrators,
// energy/dissipation accounting for potential models, and the reduced
// dynamics on the weight nullcline.

#include <cstdint>
#include <functional>
#include <vector>

#include "error.hpp"
#include "models.hpp"

namespace coevo {

/// N agent states in R^m (row-major N x m) and the dense N x N weight
/// matrix. Symmetric systems store the full matrix.
struct AgentConfiguration {
  std::size_t n = 0;
  std::size_t m = 1;
  std::vector<double> states;
  std::vector<double> weights;
  bool symmetric = true;
  double t = 0.0;

  static AgentConfiguration zeros(std::size_t n, std::size_t m, bool symmetric = true);

  ConstVec state(std::size_t i) const { return {states.data() + i * m, m}; }
  MutVec state(std::size_t i) { return {states.data() + i * m, m}; }
  double w(std::size_t i, std::size_t j) const { return weights[i * n + j]; }
  double& w(std::size_t i, std::size_t j) { return weights[i * n + j]; }
  /// Sets w_ij, and w_ji too when the configuration is symmetric.
  void set_weight(std::size_t i, std::size_t j, double value);

  /// Throws InvariantViolation on a zero diagonal, symmetry, N >= 2 or
  /// finiteness failure.
  void validate() const;
  double max_asymmetry() const;
};

enum class Integrator { rk4, euler, rkf45 };

struct MicroOptions {
  double dt = 1e-3;
  double T = 0.0;
  double eps_w = 1.0;
  double eps_s = 1.0;
  Integrator method = Integrator::rk4;
  /// Emit every k-th step (the initial and final configurations are always
  /// emitted).
  std::size_t record_every = 1;
  double abs_tol = 1e-8;  // rkf45 only
  double rel_tol = 1e-6;
};

using ConfigObserver = std::function<void(const AgentConfiguration&)>;

struct MicroDerivative {
  std::vector<double> states;   // N x m
  std::vector<double> weights;  // N x N, zero diagonal
};

MicroDerivative micro_rhs(const AgentConfiguration& cfg, const SmoothModel& model, double eps_w = 1.0,
                          double eps_s = 1.0);

/// Thrown when a step produces a non-finite value; carries the last valid
/// configuration.
class MicroIntegrationError : public IntegrationError {
 public:
  MicroIntegrationError(const std::string& what, AgentConfiguration last)
      : IntegrationError(what, last.t), last_valid_(std::move(last)) {}
  const AgentConfiguration& last_valid() const noexcept { return last_valid_; }

 private:
  AgentConfiguration last_valid_;
};

/// Samples at multiples of dt. Symmetric V with symmetric initial data is
/// integrated on the upper triangle and mirrored, so symmetry is bitwise.
void integrate_micro(const AgentConfiguration& cfg, const SmoothModel& model, const MicroOptions& opts,
                     const ConfigObserver& observer);
std::vector<AgentConfiguration> integrate_micro(const AgentConfiguration& cfg, const SmoothModel& model,
                                                const MicroOptions& opts);

/// Euler-Maruyama: drift * dt + sqrt(2 Q(s_i) dt) xi per state component;
/// weights take the deterministic V step (plus sqrt(2 R dt) xi if the model
/// carries R). Deterministic for a fixed seed.
void simulate_diffusive(const AgentConfiguration& cfg, const SmoothModel& model, double dt, double T,
                        std::uint64_t seed, std::size_t record_every, const ConfigObserver& observer);
std::vector<AgentConfiguration> simulate_diffusive(const AgentConfiguration& cfg, const SmoothModel& model,
                                                   double dt, double T, std::uint64_t seed,
                                                   std::size_t record_every = 1);

struct EnergyReport {
  double energy = 0.0;
  /// Mean-field-velocity form: sum_i |v_i|^2 + c/(2N) sum_{i!=j} (dF/dw)^2
  /// with v_i = (1/N) sum_j grad_s F. Equals -dE/dt along trajectories.
  double dissipation = 0.0;
  /// Alternative pairwise integrand sum_{i!=j} |grad_s F|^2 + c (dF/dw)^2.
  double dissipation_pairwise = 0.0;
  double t = 0.0;
};

EnergyReport energy_report(const AgentConfiguration& cfg, const PotentialModel& pot);

/// Root of w -> V(s, sigma, w): expanding bracket search, bisection, then a
/// Newton polish until |V| <= 1e-12. Throws NullclineNotFound when no sign
/// change is found.
double solve_weight_nullcline(const SmoothModel& model, ConstVec s, ConstVec sigma);

using StateObserver = std::function<void(double t, const std::vector<double>& states)>;

/// RK4 on ds_i/dt = (1/N) sum_{j != i} U(s_i, s_j, omega(s_i, s_j)) + U0(s_i).
void integrate_reduced(const std::vector<double>& states, std::size_t m, const SmoothModel& model, double dt,
                       double T, std::size_t record_every, const StateObserver& observer);
/// Final states only.
std::vector<double> integrate_reduced(const std::vector<double>& states, std::size_t m, const SmoothModel& model,
                                      double dt, double T);

}  // namespace coevo
