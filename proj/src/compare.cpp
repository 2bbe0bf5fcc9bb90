#include "compare.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace coevo {

void RandomMinimalInit::validate() const {
  const std::pair<const char*, double> entries[] = {
      {"rho_p", rho_p}, {"link_pp", link_pp}, {"link_mm", link_mm}, {"link_pm", link_pm}};
  for (const auto& [key, value] : entries)
    if (!(value >= 0.0 && value <= 1.0)) throw ConfigError(std::string(key) + " must lie in [0, 1]", key);
}

DiscreteConfiguration RandomMinimalInit::sample(std::size_t n, Rng& rng) const {
  auto cfg = DiscreteConfiguration::empty(n);
  for (auto& s : cfg.states) s = uniform01(rng) < rho_p ? 1 : -1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const PairType t = pair_type(cfg.s(i), cfg.s(j));
      const double q = t == PairType::pp ? link_pp : t == PairType::mm ? link_mm : link_pm;
      if (uniform01(rng) < q) cfg.set_link(i, j, true);
    }
  return cfg;
}

MinimalMoments RandomMinimalInit::expected_moments() const {
  const double rp = rho_p, rm = 1.0 - rho_p;
  return {rp * rp * link_pp, rp * rp * (1.0 - link_pp), rm * rm * link_mm,
          rm * rm * (1.0 - link_mm), rp * rm * link_pm, rp * rm * (1.0 - link_pm)};
}

namespace {

// Per-replica samples: six moments and rho_p.
using Sample = std::array<double, 7>;

std::vector<Sample> run_replica(const MinimalParams& p, const RandomMinimalInit& init, const ComparisonOptions& opts,
                                std::size_t replica, std::size_t samples) {
  Rng rng = make_stream(opts.seed, 2 * replica);
  const auto cfg = init.sample(opts.n, rng);
  JumpOptions jo;
  jo.T = opts.T;
  jo.seed = make_stream(opts.seed, 2 * replica + 1)();
  jo.method = opts.method;
  const std::size_t stride = static_cast<std::size_t>(std::ceil(opts.dt / 0.01 - 1e-9));
  jo.dt = opts.dt / static_cast<double>(stride);
  jo.sample_dt = opts.dt;
  std::vector<Sample> out;
  out.reserve(samples);
  auto observe = [&](const DiscreteConfiguration&, const PairClassCounts& c) {
    const auto m = minimal_moments(c);
    const auto a = m.to_array();
    out.push_back({a[0], a[1], a[2], a[3], a[4], a[5], m.rho_p()});
  };
  if (opts.method == JumpMethod::gillespie) {
    simulate_minimal(cfg, p, jo, observe);
  } else {
    // tau-leap records every step; keep the ones on the sampling grid
    std::size_t k = 0;
    simulate_minimal(cfg, p, jo, [&](const DiscreteConfiguration& c, const PairClassCounts& counts) {
      if (k++ % stride == 0 || c.t >= opts.T) observe(c, counts);
    });
  }
  if (out.size() != samples)
    throw InvariantViolation("replica " + std::to_string(replica) + " produced " + std::to_string(out.size()) +
                             " samples, expected " + std::to_string(samples));
  return out;
}

std::vector<MinimalMoments> closure_on_grid(const MinimalMoments& m0, const MinimalParams& p, ClosureKind kind,
                                            const ComparisonOptions& opts, std::size_t samples, bool& consensus) {
  const std::size_t sub = static_cast<std::size_t>(std::ceil(opts.dt / opts.closure_dt - 1e-9));
  ClosureOptions co;
  co.dt = opts.dt / static_cast<double>(sub);
  co.T = opts.T;
  co.record_every = sub;
  const auto traj = integrate_closure(m0, p, kind, co);
  consensus = traj.consensus_reached;
  std::vector<MinimalMoments> out(traj.moments.begin(),
                                  traj.moments.begin() + static_cast<std::ptrdiff_t>(std::min(samples, traj.moments.size())));
  // after consensus the state is frozen at the boundary
  while (out.size() < samples) out.push_back(out.back());
  return out;
}

}  // namespace

ComparisonReport run_comparison(const MinimalParams& p, const RandomMinimalInit& init, const ComparisonOptions& opts) {
  p.validate();
  init.validate();
  if (opts.n < 10) throw ConfigError("comparison needs N >= 10", "N");
  if (opts.runs < 2) throw ConfigError("comparison needs runs >= 2", "runs");
  if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) throw ConfigError("dt must be positive", "dt");
  if (!(opts.T > 0.0) || !std::isfinite(opts.T)) throw ConfigError("T must be positive", "T");
  const double ratio = opts.T / opts.dt;
  const std::size_t steps = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("T must be an integer multiple of dt", "dt");
  if (!(opts.alpha_scale > 0.0)) throw ConfigError("alpha_scale must be positive", "alpha_scale");
  const std::size_t samples = steps + 1;

  ComparisonReport rep;
  rep.params = p;
  rep.closure_params = p;
  rep.closure_params.alpha_pm *= opts.alpha_scale;
  rep.closure_params.alpha_mp *= opts.alpha_scale;
  rep.init = init;
  rep.options = opts;

  std::vector<std::vector<Sample>> results(opts.runs);
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, opts.runs));
  if (workers == 1) {
    for (std::size_t r = 0; r < opts.runs; ++r) results[r] = run_replica(p, init, opts, r, samples);
  } else {
    std::mutex mu;
    std::exception_ptr failure;
    std::size_t next = 0;
    auto work = [&] {
      for (;;) {
        std::size_t r;
        {
          std::lock_guard lock(mu);
          if (next >= opts.runs || failure) return;
          r = next++;
        }
        try {
          auto res = run_replica(p, init, opts, r, samples);
          results[r] = std::move(res);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  // reduction in replica order keeps the sums independent of scheduling
  const double runs = static_cast<double>(opts.runs);
  std::vector<double> rho_sd(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    Sample sum{}, sq{};
    for (const auto& res : results)
      for (int c = 0; c < 7; ++c) sum[c] += res[k][c];
    Sample mean;
    for (int c = 0; c < 7; ++c) mean[c] = sum[c] / runs;
    for (const auto& res : results)
      for (int c = 0; c < 6; ++c) sq[c] += (res[k][c] - mean[c]) * (res[k][c] - mean[c]);
    // rho_p spread of the increments since t = 0: the closure starts at the
    // mean, so only the drift noise enters the rho_p gap
    double incr_mean = 0.0;
    for (const auto& res : results) incr_mean += (res[k][6] - res[0][6]) / runs;
    for (const auto& res : results) {
      const double d = res[k][6] - res[0][6] - incr_mean;
      sq[6] += d * d;
    }
    std::array<double, 6> se;
    for (int c = 0; c < 6; ++c) se[c] = std::sqrt(sq[c] / (runs - 1.0)) / std::sqrt(runs);
    rho_sd[k] = std::sqrt(sq[6] / (runs - 1.0)) / std::sqrt(runs);
    rep.t.push_back(k == steps ? opts.T : static_cast<double>(k) * opts.dt);
    rep.mean.push_back({mean[0], mean[1], mean[2], mean[3], mean[4], mean[5]});
    rep.standard_error.push_back(se);
  }

  // closures start from the ensemble-mean initial moments
  const MinimalMoments m0 = rep.mean.front();
  rep.conditional = closure_on_grid(m0, rep.closure_params, ClosureKind::conditional, opts, samples,
                                    rep.conditional_consensus);
  rep.kirkwood = closure_on_grid(m0, rep.closure_params, ClosureKind::kirkwood, opts, samples,
                                 rep.kirkwood_consensus);

  for (std::size_t k = 0; k < samples; ++k) {
    const auto mean = rep.mean[k].to_array();
    const auto c = rep.conditional[k].to_array();
    const auto q = rep.kirkwood[k].to_array();
    std::array<double, 6> ec, eq;
    for (int j = 0; j < 6; ++j) {
      ec[j] = std::abs(mean[j] - c[j]);
      eq[j] = std::abs(mean[j] - q[j]);
      rep.sup_error_conditional = std::max(rep.sup_error_conditional, ec[j]);
      rep.sup_error_kirkwood = std::max(rep.sup_error_kirkwood, eq[j]);
      rep.monte_carlo_stderr = std::max(rep.monte_carlo_stderr, rep.standard_error[k][j]);
    }
    rep.error_conditional.push_back(ec);
    rep.error_kirkwood.push_back(eq);
    rep.rho_error_conditional =
        std::max(rep.rho_error_conditional, std::abs(rep.mean[k].rho_p() - rep.conditional[k].rho_p()));
    rep.rho_error_kirkwood =
        std::max(rep.rho_error_kirkwood, std::abs(rep.mean[k].rho_p() - rep.kirkwood[k].rho_p()));
    rep.rho_stderr = std::max(rep.rho_stderr, rho_sd[k]);
    rep.normalization_error =
        std::max(rep.normalization_error, std::abs(rep.mean[k].rho_p() + rep.mean[k].rho_m() - 1.0));
  }
  return rep;
}

EpsilonSweep run_epsilon_sweep(const SmoothModel& model, const AgentConfiguration& cfg0,
                               const std::vector<double>& eps_list, double dt, double T, double weight_offset) {
  require(!eps_list.empty(), "eps list is empty", "eps");
  for (double e : eps_list) require(e > 0.0 && std::isfinite(e), "eps values must be positive", "eps");
  AgentConfiguration cfg = cfg0;
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = 0; j < cfg.n; ++j) {
      if (i == j) continue;
      if (cfg.symmetric && j < i) continue;
      const double w = solve_weight_nullcline(model, cfg.state(i), cfg.state(j)) + weight_offset;
      if (cfg.symmetric)
        cfg.set_weight(i, j, w);
      else
        cfg.w(i, j) = w;
    }
  const auto reduced = integrate_reduced(cfg.states, cfg.m, model, dt, T);

  std::vector<double> eps = eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  EpsilonSweep out;
  for (double e : eps) {
    MicroOptions mo;
    mo.dt = dt;
    mo.T = T;
    mo.eps_w = e;
    AgentConfiguration last;
    integrate_micro(cfg, model, mo, [&](const AgentConfiguration& c) { last = c; });
    double gap = 0.0;
    for (std::size_t k = 0; k < cfg.states.size(); ++k) gap = std::max(gap, std::abs(last.states[k] - reduced[k]));
    if (!out.gaps.empty()) {
      if (!(gap < out.gaps.back().gap)) out.strictly_decreasing = false;
      if (!(gap <= out.gaps.back().gap)) out.non_increasing = false;
    }
    out.gaps.push_back({e, gap});
  }
  return out;
}

}  // namespace coevo
