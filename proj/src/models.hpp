#pragma once

// Model catalog: force bundles for the continuous dynamics, the potential to
// force derivation, and the rate bundle of the binary minimal model.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace coevo {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

/// Pair state drift U(s, sigma, w), written into `out` (length m).
using StateKernel = std::function<void(ConstVec s, ConstVec sigma, double w, MutVec out)>;
/// Pair scalar function (s, sigma, w) -> R, used for V, R and potentials.
using PairScalar = std::function<double(ConstVec s, ConstVec sigma, double w)>;
using ExternalForce = std::function<void(ConstVec s, MutVec out)>;
using SiteScalar = std::function<double(ConstVec s)>;
using ScalarFn = std::function<double(double)>;

/// Force bundle (U, V, U0, Q, R) of the continuous co-evolving system.
/// Immutable after construction; share freely across threads.
struct SmoothModel {
  std::size_t m = 1;
  StateKernel U;
  PairScalar V;
  ExternalForce U0;  // optional
  SiteScalar Q;      // optional, state diffusion coefficient
  PairScalar R;      // optional, weight diffusion coefficient
  std::optional<double> lipschitz_hint;
  bool symmetric_V = false;
  std::string name = "custom";

  /// Checks dimensions, callables and (if symmetric_V) the symmetry of V on
  /// a seeded random probe set. Throws ModelError.
  void validate(std::size_t probes = 1000) const;
};

/// Pair potential F with mobility c. Analytic derivatives are optional; when
/// absent, gradients fall back to central differences with step 1e-5.
struct PotentialModel {
  std::size_t m = 1;
  PairScalar F;
  double c = 1.0;
  StateKernel grad_s;  // optional analytic grad_s F
  PairScalar dF_dw;    // optional analytic dF/dw
  std::string name = "custom";
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kForceMatchTolerance = 1e-6;

/// grad_s F at (s, sigma, w), analytic if available.
void potential_grad_s(const PotentialModel& pot, ConstVec s, ConstVec sigma, double w, MutVec out);
double potential_dw(const PotentialModel& pot, ConstVec s, ConstVec sigma, double w);

/// U = -grad_s F, V = -c dF/dw. Probes F for finiteness and, if analytic
/// derivatives are supplied, cross-checks them against central differences.
SmoothModel derive_forces(const PotentialModel& pot);

// Catalog constructors. Kernels act componentwise (K) or on the Euclidean
// norm of the argument (eta, G); for m = 1 both coincide.
SmoothModel kernel_relaxation(ScalarFn K, ScalarFn eta, double kappa, std::size_t m = 1);
SmoothModel boschi(ScalarFn g, double J0, double gamma, double sigma_noise);
PotentialModel quadratic_potential(double kappa, double c, std::size_t m = 1);
/// F = w G(|s - sigma|) + kappa w^2 / (2c); G radial with derivative dG.
PotentialModel kernel_potential(ScalarFn G, ScalarFn dG, double kappa, double c, std::size_t m = 1);

/// Scalar kernel from a JSON spec such as {"type": "gaussian", "a": 1, "b": 1}.
/// Types: zero, constant, identity, linear, gaussian, sigmoid, tanh,
/// indicator.
ScalarFn make_kernel(const nlohmann::json& spec, const std::string& field);

/// Catalog lookup: kernel-relaxation, boschi, quadratic-potential.
SmoothModel catalog(std::string_view name, const nlohmann::json& params);
/// The potential behind a potential-based catalog entry (quadratic-potential).
PotentialModel catalog_potential(std::string_view name, const nlohmann::json& params);

/// Rates of the binary minimal model. alpha_pm is the rate at which a "+"
/// agent in contact with a "-" agent flips to "-"; alpha_mp the reverse.
/// beta/gamma are link creation/removal rates per unordered pair type.
struct MinimalParams {
  double alpha_pm = 0, alpha_mp = 0;
  double beta_pp = 0, beta_mm = 0, beta_pm = 0;
  double gamma_pp = 0, gamma_mm = 0, gamma_pm = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  static MinimalParams from_json(const nlohmann::json& j);
};

}  // namespace coevo
