#include "microsim.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ode.hpp"
#include "rng.hpp"

namespace coevo {
namespace {

// Flat ODE layout: [states (N*m) | weights]. Symmetric systems keep one
// entry per unordered pair (i < j); otherwise every ordered pair i != j.
class MicroSystem {
 public:
  MicroSystem(const AgentConfiguration& cfg, const SmoothModel& model, double eps_w, double eps_s)
      : model_(model), n_(cfg.n), m_(cfg.m), packed_(cfg.symmetric && model.symmetric_V),
        eps_w_(eps_w), eps_s_(eps_s), acc_(cfg.m), tmp_(cfg.m), ext_(cfg.m) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = packed_ ? i + 1 : 0; j < n_; ++j)
        if (i != j) pairs_.push_back({i, j});
  }

  bool packed() const { return packed_; }
  std::size_t size() const { return n_ * m_ + pairs_.size(); }

  std::vector<double> pack(const AgentConfiguration& cfg) const {
    std::vector<double> y(size());
    std::copy(cfg.states.begin(), cfg.states.end(), y.begin());
    for (std::size_t k = 0; k < pairs_.size(); ++k) y[n_ * m_ + k] = cfg.w(pairs_[k].i, pairs_[k].j);
    return y;
  }

  void unpack(const std::vector<double>& y, AgentConfiguration& cfg) const {
    std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n_ * m_), cfg.states.begin());
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const double w = y[n_ * m_ + k];
      cfg.w(pairs_[k].i, pairs_[k].j) = w;
      if (packed_) cfg.w(pairs_[k].j, pairs_[k].i) = w;
    }
  }

  double weight(std::span<const double> y, std::size_t i, std::size_t j) const {
    const double* w = y.data() + n_ * m_;
    if (packed_) {
      if (i > j) std::swap(i, j);
      return w[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
    }
    return w[i * (n_ - 1) + (j < i ? j : j - 1)];
  }

  void operator()(double, std::span<const double> y, std::span<double> dy) {
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      ConstVec si = y.subspan(i * m_, m_);
      std::fill(acc_.begin(), acc_.end(), 0.0);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j == i) continue;
        model_.U(si, y.subspan(j * m_, m_), weight(y, i, j), tmp_);
        for (std::size_t k = 0; k < m_; ++k) acc_[k] += tmp_[k];
      }
      if (model_.U0) model_.U0(si, ext_);
      for (std::size_t k = 0; k < m_; ++k) {
        double v = acc_[k] * inv_n / eps_s_;
        if (model_.U0) v += ext_[k];
        dy[i * m_ + k] = v;
      }
    }
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      dy[n_ * m_ + k] = model_.V(y.subspan(i * m_, m_), y.subspan(j * m_, m_), y[n_ * m_ + k]) / eps_w_;
    }
  }

  struct Pair {
    std::size_t i, j;
  };
  const std::vector<Pair>& pairs() const { return pairs_; }

 private:
  const SmoothModel& model_;
  std::size_t n_, m_;
  bool packed_;
  double eps_w_, eps_s_;
  std::vector<Pair> pairs_;
  std::vector<double> acc_, tmp_, ext_;
};

std::size_t step_count(double dt, double T) {
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive", "dt");
  require(T >= 0.0 && std::isfinite(T), "T must be nonnegative", "T");
  if (T == 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

double sample_time(std::size_t k, std::size_t steps, double dt, double T) {
  return k == steps ? T : static_cast<double>(k) * dt;
}

}  // namespace

AgentConfiguration AgentConfiguration::zeros(std::size_t n, std::size_t m, bool symmetric) {
  AgentConfiguration cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.symmetric = symmetric;
  cfg.states.assign(n * m, 0.0);
  cfg.weights.assign(n * n, 0.0);
  return cfg;
}

void AgentConfiguration::set_weight(std::size_t i, std::size_t j, double value) {
  require(i != j, "diagonal weights are fixed at zero");
  w(i, j) = value;
  if (symmetric) w(j, i) = value;
}

void AgentConfiguration::validate() const {
  if (n < 2) throw InvariantViolation("configuration needs at least two agents");
  if (m < 1) throw InvariantViolation("state dimension must be positive");
  if (states.size() != n * m || weights.size() != n * n)
    throw InvariantViolation("configuration arrays have inconsistent sizes");
  for (double x : states)
    if (!std::isfinite(x)) throw InvariantViolation("non-finite agent state");
  for (std::size_t i = 0; i < n; ++i) {
    if (w(i, i) != 0.0) throw InvariantViolation("weight diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(w(i, j))) throw InvariantViolation("non-finite weight");
      if (symmetric && w(i, j) != w(j, i)) throw InvariantViolation("symmetric configuration has w_ij != w_ji");
    }
  }
}

double AgentConfiguration::max_asymmetry() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) worst = std::max(worst, std::abs(w(i, j) - w(j, i)));
  return worst;
}

MicroDerivative micro_rhs(const AgentConfiguration& cfg, const SmoothModel& model, double eps_w, double eps_s) {
  require(eps_w > 0.0 && eps_s > 0.0, "time-scale factors must be positive", "eps");
  AgentConfiguration full = cfg;
  full.symmetric = false;  // evaluate every ordered pair
  MicroSystem sys(full, model, eps_w, eps_s);
  const auto y = sys.pack(full);
  std::vector<double> dy(y.size());
  sys(cfg.t, y, dy);
  MicroDerivative out;
  out.states.assign(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(cfg.n * cfg.m));
  out.weights.assign(cfg.n * cfg.n, 0.0);
  for (std::size_t k = 0; k < sys.pairs().size(); ++k) {
    const auto [i, j] = sys.pairs()[k];
    out.weights[i * cfg.n + j] = dy[cfg.n * cfg.m + k];
  }
  for (double x : dy)
    if (!std::isfinite(x)) throw IntegrationError("non-finite force evaluation", cfg.t);
  return out;
}

void integrate_micro(const AgentConfiguration& cfg, const SmoothModel& model, const MicroOptions& opts,
                     const ConfigObserver& observer) {
  cfg.validate();
  require(cfg.m == model.m, "configuration and model state dimensions differ", "m");
  require(opts.eps_w > 0.0 && opts.eps_s > 0.0, "time-scale factors must be positive", "eps");
  const std::size_t steps = step_count(opts.dt, opts.T);
  const std::size_t every = std::max<std::size_t>(1, opts.record_every);

  MicroSystem sys(cfg, model, opts.eps_w, opts.eps_s);
  AgentConfiguration current = cfg;
  current.symmetric = sys.packed() || (cfg.symmetric && steps == 0);
  std::vector<double> y = sys.pack(cfg);
  std::vector<double> last = y;
  observer(current);

  ode::Rk4 rk4(y.size());
  ode::Euler euler(y.size());
  ode::Rkf45 rkf(y.size(), opts.abs_tol, opts.rel_tol);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = sample_time(k - 1, steps, opts.dt, opts.T);
    const double t1 = sample_time(k, steps, opts.dt, opts.T);
    switch (opts.method) {
      case Integrator::rk4: rk4.step(sys, t0, y, t1 - t0); break;
      case Integrator::euler: euler.step(sys, t0, y, t1 - t0); break;
      case Integrator::rkf45: rkf.advance(sys, t0, t1, y); break;
    }
    if (!ode::all_finite(y)) {
      sys.unpack(last, current);
      current.t = t0;
      throw MicroIntegrationError("non-finite value during micro integration at t=" + std::to_string(t1),
                                  current);
    }
    last = y;
    if (k % every == 0 || k == steps) {
      sys.unpack(y, current);
      current.t = t1;
      observer(current);
    }
  }
}

std::vector<AgentConfiguration> integrate_micro(const AgentConfiguration& cfg, const SmoothModel& model,
                                                const MicroOptions& opts) {
  std::vector<AgentConfiguration> out;
  integrate_micro(cfg, model, opts, [&](const AgentConfiguration& c) { out.push_back(c); });
  return out;
}

void simulate_diffusive(const AgentConfiguration& cfg, const SmoothModel& model, double dt, double T,
                        std::uint64_t seed, std::size_t record_every, const ConfigObserver& observer) {
  cfg.validate();
  require(cfg.m == model.m, "configuration and model state dimensions differ", "m");
  if (!model.Q) throw ModelError("diffusive simulation needs a diffusion coefficient Q", "Q");
  const std::size_t steps = step_count(dt, T);
  const std::size_t every = std::max<std::size_t>(1, record_every);
  const std::size_t n = cfg.n, m = cfg.m;

  MicroSystem sys(cfg, model, 1.0, 1.0);
  AgentConfiguration current = cfg;
  current.symmetric = sys.packed() || (cfg.symmetric && steps == 0);
  std::vector<double> y = sys.pack(cfg);
  std::vector<double> last = y;
  ode::Euler euler(y.size());
  Rng rng = make_stream(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> before(y.size());
  observer(current);

  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = sample_time(k - 1, steps, dt, T);
    const double h = sample_time(k, steps, dt, T) - t0;
    before = y;
    euler.step(sys, t0, y, h);
    for (std::size_t i = 0; i < n; ++i) {
      const double q = model.Q(ConstVec(before.data() + i * m, m));
      if (q < 0.0 || !std::isfinite(q)) throw ModelError("diffusion coefficient Q must be nonnegative", "Q");
      const double amp = std::sqrt(2.0 * q * h);
      for (std::size_t c = 0; c < m; ++c) y[i * m + c] += amp * normal(rng);
    }
    if (model.R) {
      for (std::size_t p = 0; p < sys.pairs().size(); ++p) {
        const auto [i, j] = sys.pairs()[p];
        const double r = model.R(ConstVec(before.data() + i * m, m), ConstVec(before.data() + j * m, m),
                                 before[n * m + p]);
        if (r < 0.0 || !std::isfinite(r)) throw ModelError("weight diffusion R must be nonnegative", "R");
        y[n * m + p] += std::sqrt(2.0 * r * h) * normal(rng);
      }
    }
    if (!ode::all_finite(y)) {
      sys.unpack(last, current);
      current.t = t0;
      throw MicroIntegrationError("non-finite value in diffusive simulation", current);
    }
    last = y;
    if (k % every == 0 || k == steps) {
      sys.unpack(y, current);
      current.t = t0 + h;
      observer(current);
    }
  }
}

std::vector<AgentConfiguration> simulate_diffusive(const AgentConfiguration& cfg, const SmoothModel& model,
                                                   double dt, double T, std::uint64_t seed,
                                                   std::size_t record_every) {
  std::vector<AgentConfiguration> out;
  simulate_diffusive(cfg, model, dt, T, seed, record_every, [&](const AgentConfiguration& c) { out.push_back(c); });
  return out;
}

EnergyReport energy_report(const AgentConfiguration& cfg, const PotentialModel& pot) {
  require(cfg.m == pot.m, "configuration and potential dimensions differ", "m");
  const std::size_t n = cfg.n, m = cfg.m;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad(m), velocity(m);
  double energy = 0.0, state_term = 0.0, weight_term = 0.0, pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(velocity.begin(), velocity.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = cfg.w(i, j);
      energy += pot.F(cfg.state(i), cfg.state(j), w);
      potential_grad_s(pot, cfg.state(i), cfg.state(j), w, grad);
      const double dw = potential_dw(pot, cfg.state(i), cfg.state(j), w);
      double g2 = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        velocity[k] += grad[k];
        g2 += grad[k] * grad[k];
      }
      weight_term += dw * dw;
      pairwise += g2 + pot.c * dw * dw;
    }
    for (std::size_t k = 0; k < m; ++k) state_term += (velocity[k] * inv_n) * (velocity[k] * inv_n);
  }
  EnergyReport rep;
  rep.energy = energy / (2.0 * static_cast<double>(n));
  rep.dissipation = state_term + pot.c / (2.0 * static_cast<double>(n)) * weight_term;
  rep.dissipation_pairwise = pairwise;
  rep.t = cfg.t;
  if (!std::isfinite(rep.energy) || !std::isfinite(rep.dissipation))
    throw ModelError("non-finite potential evaluation in energy report", "F");
  return rep;
}

double solve_weight_nullcline(const SmoothModel& model, ConstVec s, ConstVec sigma) {
  auto f = [&](double w) { return model.V(s, sigma, w); };
  double lo = -1.0, hi = 1.0;
  double flo = f(lo), fhi = f(hi);
  for (int expand = 0; expand < 40 && flo * fhi > 0.0; ++expand) {
    lo *= 2.0;
    hi *= 2.0;
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!(flo * fhi < 0.0)) throw NullclineNotFound("V(s, sigma, .) has no sign change on the search bracket");

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double w = 0.5 * (lo + hi);
  double fw = f(w);
  for (int it = 0; it < 20 && std::abs(fw) > 1e-12; ++it) {
    const double h = 1e-7 * std::max(1.0, std::abs(w));
    const double slope = (f(w + h) - f(w - h)) / (2.0 * h);
    if (slope == 0.0 || !std::isfinite(slope)) break;
    const double next = w - fw / slope;
    const double fn = f(next);
    if (!(std::abs(fn) < std::abs(fw))) break;
    w = next;
    fw = fn;
  }
  return w;
}

void integrate_reduced(const std::vector<double>& states, std::size_t m, const SmoothModel& model, double dt,
                       double T, std::size_t record_every, const StateObserver& observer) {
  require(m == model.m && m > 0 && states.size() % m == 0, "state array does not match model dimension", "m");
  const std::size_t n = states.size() / m;
  require(n >= 2, "reduced dynamics needs at least two agents", "N");
  const std::size_t steps = step_count(dt, T);
  const std::size_t every = std::max<std::size_t>(1, record_every);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> omega(n * n, 0.0), acc(m), tmp(m), ext(m);

  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        if (model.symmetric_V && j < i) {
          omega[i * n + j] = omega[j * n + i];
        } else {
          omega[i * n + j] = solve_weight_nullcline(model, y.subspan(i * m, m), y.subspan(j * m, m));
        }
      }
    for (std::size_t i = 0; i < n; ++i) {
      ConstVec si = y.subspan(i * m, m);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        model.U(si, y.subspan(j * m, m), omega[i * n + j], tmp);
        for (std::size_t k = 0; k < m; ++k) acc[k] += tmp[k];
      }
      if (model.U0) model.U0(si, ext);
      for (std::size_t k = 0; k < m; ++k) {
        double v = acc[k] * inv_n / 1.0;
        if (model.U0) v += ext[k];
        dy[i * m + k] = v;
      }
    }
  };

  std::vector<double> y = states;
  ode::Rk4 rk4(y.size());
  observer(0.0, y);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = sample_time(k - 1, steps, dt, T);
    const double t1 = sample_time(k, steps, dt, T);
    rk4.step(rhs, t0, y, t1 - t0);
    if (!ode::all_finite(y)) throw IntegrationError("non-finite value in reduced dynamics", t0);
    if (k % every == 0 || k == steps) observer(t1, y);
  }
}

std::vector<double> integrate_reduced(const std::vector<double>& states, std::size_t m, const SmoothModel& model,
                                      double dt, double T) {
  std::vector<double> out = states;
  integrate_reduced(states, m, model, dt, T, std::numeric_limits<std::size_t>::max(),
                    [&](double, const std::vector<double>& y) { out = y; });
  return out;
}

}  // namespace coevo
