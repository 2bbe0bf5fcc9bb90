#include "closures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/AutoDiff>

#include "ode.hpp"

namespace coevo {

std::array<double, 6> closure_rhs(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind, double delta) {
  return closure_rhs_generic<double>(m.to_array(), p, kind, delta);
}

HValues weight_averaged_rhs(const HValues& h, double f_pm, double rho_p, const MinimalParams& p, ClosureKind kind) {
  const double rp = rho_p, rm = 1.0 - rho_p;
  if (!(rp * rm > kConsensusDelta)) throw ConsensusBoundary("rho_p * rho_m reached the consensus threshold");
  double kpp = 1.0, kpm = 1.0, kmm = 1.0;
  if (kind == ClosureKind::kirkwood) {
    kpp = h.h_pp / (rp * rp);
    kpm = h.h_pm / (rp * rm);
    kmm = h.h_mm / (rm * rm);
  }
  HValues d;
  d.h_pp = p.alpha_mp * h.h_pm * f_pm / rm * kpp - p.alpha_pm * h.h_pp * f_pm / rp * kpm;
  d.h_mm = p.alpha_pm * h.h_pm * f_pm / rp * kmm - p.alpha_mp * h.h_mm * f_pm / rm * kpm;
  d.h_pm = -0.5 * (d.h_pp + d.h_mm);
  return d;
}

HValues weight_averaged_rhs(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind) {
  const double rp = m.rho_p(), rm = m.rho_m();
  if (!(rp * rm > kConsensusDelta)) throw ConsensusBoundary("rho_p * rho_m reached the consensus threshold");
  const double hpp = m.h_pp(), hmm = m.h_mm(), hpm = m.h_pm(), fpm = m.f_pm;
  double kpp = 1.0, kpm = 1.0, kmm = 1.0;
  if (kind == ClosureKind::kirkwood) {
    kpp = hpp / (rp * rp);
    kpm = hpm / (rp * rm);
    kmm = hmm / (rm * rm);
  }
  HValues d;
  d.h_pp = p.alpha_mp * hpm * fpm / rm * kpp - p.alpha_pm * hpp * fpm / rp * kpm;
  d.h_mm = p.alpha_pm * hpm * fpm / rp * kmm - p.alpha_mp * hmm * fpm / rm * kpm;
  d.h_pm = -0.5 * (d.h_pp + d.h_mm);
  return d;
}

ClosureTrajectory integrate_closure(const MinimalMoments& m0, const MinimalParams& p, ClosureKind kind,
                                    const ClosureOptions& opts) {
  p.validate();
  m0.validate(1e-9);
  const double rho0 = m0.rho_p();
  if (!(rho0 > 0.0 && rho0 < 1.0)) throw ModelError("closure integration needs rho_p(0) in (0, 1)", "rho_p");
  require(opts.dt > 0.0 && std::isfinite(opts.dt), "dt must be positive", "dt");
  require(opts.T >= 0.0 && std::isfinite(opts.T), "T must be finite and nonnegative", "T");
  const bool equal_rates = p.alpha_pm == p.alpha_mp;
  const std::size_t every = std::max<std::size_t>(1, opts.record_every);

  ClosureTrajectory out;
  const auto a0 = m0.to_array();
  std::vector<double> y(a0.begin(), a0.end());
  auto as_moments = [](const std::vector<double>& v) { return MinimalMoments{v[0], v[1], v[2], v[3], v[4], v[5]}; };
  auto record = [&](double t, const MinimalMoments& m) {
    out.t.push_back(t);
    out.moments.push_back(m);
    const double rp = m.rho_p(), rm = m.rho_m();
    out.max_normalization_drift = std::max(out.max_normalization_drift, std::abs(rp + rm - 1.0));
    out.max_rho_drift = std::max(out.max_rho_drift, std::abs(rp - rho0));
    if (m.h_pp() + m.h_mm() < 1e-3 && rp * rm > 0.1) out.kirkwood_artifact = true;
  };
  record(0.0, m0);
  if (!(rho0 * (1.0 - rho0) > opts.delta)) {
    out.consensus_reached = true;
    return out;
  }

  auto rhs = [&](double, std::span<const double> v, std::span<double> dv) {
    const auto d = closure_rhs_generic<double>({v[0], v[1], v[2], v[3], v[4], v[5]}, p, kind, 0.0);
    std::copy(d.begin(), d.end(), dv.begin());
  };
  ode::Rk4 rk4(6);
  const std::size_t steps = opts.T == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(opts.T / opts.dt - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * opts.dt;
    const double t1 = k == steps ? opts.T : static_cast<double>(k) * opts.dt;
    rk4.step(rhs, t0, y, t1 - t0);
    if (!ode::all_finite(y)) throw IntegrationError("non-finite closure state", t0);
    for (double& v : y) {
      if (v >= 0.0) continue;
      if (v < kClampFloor) throw IntegrationError("closure component undershot -1e-9; reduce dt", t0);
      v = 0.0;
      ++out.clamp_events;
    }
    const MinimalMoments m = as_moments(y);
    const double rp = m.rho_p(), rm = m.rho_m();
    if (std::abs(rp + rm - 1.0) > 1e-8) throw InvariantViolation("closure integration lost rho_p + rho_m = 1");
    if (equal_rates && std::abs(rp - rho0) > 1e-8)
      throw InvariantViolation("closure integration lost rho_p conservation at equal flip rates");
    const bool consensus = !(rp * rm >= opts.delta);
    if (k % every == 0 || k == steps || consensus) record(t1, m);
    if (consensus) {
      out.consensus_reached = true;
      break;
    }
  }
  return out;
}

MinimalMoments stationary_polarized(const MinimalParams& p, double rho_p, double g_pm) {
  p.validate();
  if (p.beta_pm != 0.0) throw ModelError("polarized stationary family needs beta_pm = 0", "params.beta_pm");
  if (!(p.beta_pp + p.gamma_pp > 0.0)) throw ModelError("need beta_pp + gamma_pp > 0", "params.beta_pp");
  if (!(p.beta_mm + p.gamma_mm > 0.0)) throw ModelError("need beta_mm + gamma_mm > 0", "params.beta_mm");
  require(rho_p >= 0.0 && rho_p <= 1.0, "rho_p must lie in [0, 1]", "rho_p");
  require(g_pm >= 0.0 && g_pm <= std::min(rho_p, 1.0 - rho_p), "g_pm must lie in [0, min(rho_p, 1 - rho_p)]",
          "g_pm");
  const double plus = rho_p - g_pm, minus = (1.0 - rho_p) - g_pm;
  MinimalMoments m;
  m.f_pp = p.beta_pp / (p.beta_pp + p.gamma_pp) * plus;
  m.g_pp = p.gamma_pp / (p.beta_pp + p.gamma_pp) * plus;
  m.f_mm = p.beta_mm / (p.beta_mm + p.gamma_mm) * minus;
  m.g_mm = p.gamma_mm / (p.beta_mm + p.gamma_mm) * minus;
  m.f_pm = 0.0;
  m.g_pm = g_pm;
  return m;
}

HValues stationary_mixed_h(const MinimalParams& p, double rho_p) {
  require(rho_p >= 0.0 && rho_p <= 1.0, "rho_p must lie in [0, 1]", "rho_p");
  if (!(p.alpha_pm > 0.0 && p.alpha_mp > 0.0))
    throw ModelError("mixed stationary state needs positive flip rates", "params.alpha_pm");
  const double rm = 1.0 - rho_p;
  if (p.alpha_pm == p.alpha_mp) return {rho_p * rho_p, rm * rm, rho_p * rm};
  const double D = p.alpha_mp * rho_p + p.alpha_pm * rm;
  if (D == 0.0) throw ModelError("mixed stationary state is undefined (D = 0)");
  const double D2 = D * D;
  return {p.alpha_mp * p.alpha_mp * rho_p * rho_p / D2, p.alpha_pm * p.alpha_pm * rm * rm / D2,
          p.alpha_mp * p.alpha_pm * rho_p * rm / D2};
}

namespace {

double sup_norm(const std::array<double, 6>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

Linearization linearized_jacobian(const MinimalParams& p, const MinimalMoments& s, ClosureKind kind) {
  p.validate();
  if (s.f_pm != 0.0) throw ModelError("linearization point must have f_pm = 0", "f_pm");
  const double residual = sup_norm(closure_rhs(s, p, kind));
  if (residual > 1e-10) throw ModelError("linearization point is not stationary (residual " +
                                         std::to_string(residual) + ")");
  const double rp = s.rho_p(), rm = s.rho_m();
  const double apm = p.alpha_pm, amp = p.alpha_mp;
  double kpp = 1.0, kpm = 1.0, kmm = 1.0;
  if (kind == ClosureKind::kirkwood) {
    kpp = s.h_pp() / (rp * rp);
    kpm = s.h_pm() / (rp * rm);
    kmm = s.h_mm() / (rm * rm);
  }
  enum { FPP, GPP, FMM, GMM, FPM, GPM };
  Linearization lin;
  auto& J = lin.jacobian;
  J.setZero();
  J(FPP, FPP) = -p.gamma_pp;
  J(FPP, GPP) = p.beta_pp;
  J(FPP, FPM) = -apm * s.f_pp / rp * kpm;
  J(GPP, FPP) = p.gamma_pp;
  J(GPP, GPP) = -p.beta_pp;
  J(GPP, FPM) = amp * s.g_pm / rm * kpp - apm * s.g_pp / rp * kpm;
  J(FMM, FMM) = -p.gamma_mm;
  J(FMM, GMM) = p.beta_mm;
  J(FMM, FPM) = -amp * s.f_mm / rm * kpm;
  J(GMM, FMM) = p.gamma_mm;
  J(GMM, GMM) = -p.beta_mm;
  J(GMM, FPM) = apm * s.g_pm / rp * kmm - amp * s.g_mm / rm * kpm;
  J(FPM, FPM) = apm * s.f_pp / (2.0 * rp) * kpm + amp * s.f_mm / (2.0 * rm) * kpm - p.gamma_pm;
  J(FPM, GPM) = p.beta_pm;
  J(GPM, FPM) = -amp * s.g_pm / (2.0 * rm) * kpp + apm * s.g_pp / (2.0 * rp) * kpm -
                apm * s.g_pm / (2.0 * rp) * kmm + amp * s.g_mm / (2.0 * rm) * kpm + p.gamma_pm;
  J(GPM, GPM) = -p.beta_pm;
  lin.lambda_pm = J(FPM, FPM);
  Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> solver(J, false);
  const auto& ev = solver.eigenvalues();
  for (int k = 0; k < 6; ++k) lin.eigenvalues.push_back(ev(k));
  return lin;
}

Eigen::Matrix<double, 6, 6> numerical_jacobian(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind,
                                               double h) {
  Eigen::Matrix<double, 6, 6> J;
  const auto y = m.to_array();
  for (int c = 0; c < 6; ++c) {
    auto yp = y, ym = y;
    yp[c] += h;
    ym[c] -= h;
    const auto fp = closure_rhs_generic<double>(yp, p, kind, 0.0);
    const auto fm = closure_rhs_generic<double>(ym, p, kind, 0.0);
    for (int r = 0; r < 6; ++r) J(r, c) = (fp[r] - fm[r]) / (2.0 * h);
  }
  return J;
}

Eigen::Matrix<double, 6, 6> exact_jacobian(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind) {
  using AD = Eigen::AutoDiffScalar<Eigen::Matrix<double, 6, 1>>;
  const auto y = m.to_array();
  std::array<AD, 6> x;
  for (int k = 0; k < 6; ++k) x[k] = AD(y[k], 6, k);
  const auto d = closure_rhs_generic<AD>(x, p, kind, 0.0);
  Eigen::Matrix<double, 6, 6> J;
  for (int r = 0; r < 6; ++r) J.row(r) = d[r].derivatives().transpose();
  return J;
}

StabilityMargin polarization_stable(const MinimalParams& p, double rho_p) {
  p.validate();
  require(rho_p >= 0.0 && rho_p <= 1.0, "rho_p must lie in [0, 1]", "rho_p");
  const double apm = p.alpha_pm, amp = p.alpha_mp, rm = 1.0 - rho_p;
  const double D = amp * rho_p + apm * rm;
  StabilityMargin s;
  s.lhs = p.gamma_pm;
  if (D > 0.0) {
    const double D2 = 2.0 * D * D;
    if (p.beta_pp > 0.0) s.rhs += p.beta_pp / (p.beta_pp + p.gamma_pp) * apm * amp * amp * rho_p / D2;
    if (p.beta_mm > 0.0) s.rhs += p.beta_mm / (p.beta_mm + p.gamma_mm) * amp * apm * apm * rm * rm / D2;
  }
  s.margin = s.lhs - s.rhs;
  s.stable = s.margin > 0.0;
  return s;
}

DecayReport decay_envelope_check(const ClosureTrajectory& traj, const MinimalParams& p, ClosureKind kind) {
  DecayReport rep;
  const double flips = p.alpha_pm + p.alpha_mp;
  rep.rate = kind == ClosureKind::conditional ? p.gamma_pm - 0.5 * flips : p.gamma_pm - flips;
  require(rep.rate > 0.0, "decay envelope needs a positive rate", "params.gamma_pm");
  require(p.beta_pm == 0.0, "decay envelope assumes no cross-link creation (beta_pm = 0)", "params.beta_pm");
  rep.samples = traj.moments.size();
  if (traj.moments.empty()) return rep;
  const double f0 = traj.moments.front().f_pm;
  for (std::size_t k = 0; k < traj.moments.size(); ++k) {
    const double bound = std::exp(-rep.rate * traj.t[k]) * f0;
    const double f = traj.moments[k].f_pm;
    if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, f / bound);
    if (f > bound * (1.0 + 1e-9) && rep.holds) {
      rep.holds = false;
      rep.first_violation = k;
    }
  }
  return rep;
}

namespace {

using AD4 = Eigen::AutoDiffScalar<Eigen::Matrix<double, 4, 1>>;

// Unknowns x = (f_pp, f_mm, f_pm, g_pm); g_pp and g_mm follow from rho_p.
template <class T>
std::array<T, 6> expand(const std::array<T, 4>& x, double rho_p) {
  const T gpp = T(rho_p) - x[2] - x[3] - x[0];
  const T gmm = T(1.0 - rho_p) - x[2] - x[3] - x[1];
  return {x[0], gpp, x[1], gmm, x[2], x[3]};
}

template <class T>
std::array<T, 4> reduced_residual(const std::array<T, 4>& x, double rho_p, const MinimalParams& p,
                                  ClosureKind kind) {
  const auto d = closure_rhs_generic<T>(expand(x, rho_p), p, kind, 0.0);
  return {d[0], d[2], d[4], d[5]};
}

struct NewtonResult {
  std::array<double, 4> x;
  double reduced_norm;
  int iterations;
};

NewtonResult newton(std::array<double, 4> x, double rho_p, const MinimalParams& p, ClosureKind kind,
                    const ContinuationOptions& opts) {
  for (int it = 0; it <= opts.max_iterations; ++it) {
    std::array<AD4, 4> ax;
    for (int k = 0; k < 4; ++k) ax[k] = AD4(x[k], 4, k);
    const auto r = reduced_residual(ax, rho_p, p, kind);
    Eigen::Vector4d F;
    Eigen::Matrix4d J;
    for (int k = 0; k < 4; ++k) {
      F(k) = r[k].value();
      J.row(k) = r[k].derivatives().transpose();
    }
    const double norm = F.cwiseAbs().maxCoeff();
    if (!std::isfinite(norm)) break;
    if (norm <= 1e-15) return {x, norm, it};
    if (it == opts.max_iterations) break;
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix4d> cod(J);
    cod.setThreshold(1e-13);
    const Eigen::Vector4d step = cod.solve(-F);
    double step_norm = 0.0;
    for (int k = 0; k < 4; ++k) {
      x[k] += step(k);
      step_norm = std::max(step_norm, std::abs(step(k)));
    }
    if (step_norm <= 1e-16 * (1.0 + std::abs(x[0]) + std::abs(x[3]))) {
      const auto rr = reduced_residual(x, rho_p, p, kind);
      double n2 = 0.0;
      for (double v : rr) n2 = std::max(n2, std::abs(v));
      return {x, n2, it + 1};
    }
  }
  throw ContinuationFailed("Newton iteration did not converge within " + std::to_string(opts.max_iterations) +
                           " iterations");
}

}  // namespace

StationaryBranch continue_small_epsilon(const MinimalParams& p, double rho_p, ClosureKind kind,
                                        const ContinuationOptions& opts) {
  p.validate();
  if (!(rho_p > 0.0 && rho_p < 1.0)) throw ModelError("continuation needs rho_p in (0, 1)", "rho_p");
  const double eps = p.beta_pm;
  StationaryBranch br;
  br.eps = eps;
  const double flips = p.alpha_pm + p.alpha_mp;
  if (kind == ClosureKind::conditional ? !(2.0 * p.gamma_pm > flips) : !(p.gamma_pm > flips))
    br.notes.push_back("stability hypothesis of the small-eps continuation is violated");
  for (double r : {p.alpha_pm, p.alpha_mp, p.beta_pp, p.beta_mm, p.gamma_pp, p.gamma_mm, p.gamma_pm})
    if (!(r > 0.0)) {
      br.notes.push_back("continuation assumes all rates other than beta_pm positive");
      break;
    }

  MinimalParams base = p;
  base.beta_pm = 0.0;
  double g_seed = opts.g_pm_seed;
  if (g_seed < 0.0) g_seed = stationary_mixed_h(base, rho_p).h_pm;
  g_seed = std::min(g_seed, std::min(rho_p, 1.0 - rho_p));
  const MinimalMoments seed = stationary_polarized(base, rho_p, g_seed);

  auto solve = [&](double e) {
    MinimalParams q = p;
    q.beta_pm = e;
    return newton({seed.f_pp, seed.f_mm, seed.f_pm, seed.g_pm}, rho_p, q, kind, opts);
  };
  const NewtonResult at = solve(eps);
  const double de = std::max(1e-7, 1e-3 * eps);
  const NewtonResult ahead = solve(eps + de);

  const auto y = expand(at.x, rho_p);
  br.moments = MinimalMoments::from_array(y);
  br.iterations = at.iterations;
  br.residual = sup_norm(closure_rhs(br.moments, p, kind));
  br.dfdeps = (ahead.x[2] - at.x[2]) / de;
  if (!(br.residual <= opts.tolerance))
    throw ContinuationFailed("branch point does not solve the full system (residual " +
                             std::to_string(br.residual) + ")");
  for (double v : y)
    if (v < 0.0) {
      br.notes.push_back("branch point has a negative component: outside the validity range");
      break;
    }
  if (p.alpha_pm != p.alpha_mp)
    br.notes.push_back("unequal flip rates: d rho_p/dt is proportional to f_pm, so only f_pm = 0 points are stationary");
  if (!(br.moments.f_pm > 0.0)) br.notes.push_back("converged to a point without linked cross pairs (f_pm <= 0)");
  if (!(br.dfdeps > 0.0)) br.notes.push_back("df_pm/deps is not positive at this eps");
  return br;
}

}  // namespace coevo
