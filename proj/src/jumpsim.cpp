#include "jumpsim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "ode.hpp"

namespace coevo {

DiscreteConfiguration DiscreteConfiguration::empty(std::size_t n) {
  DiscreteConfiguration cfg;
  cfg.n = n;
  cfg.states.assign(n, 1);
  cfg.weights.assign(n * n, 0);
  return cfg;
}

void DiscreteConfiguration::set_link(std::size_t i, std::size_t j, bool on) {
  require(i != j && i < n && j < n, "invalid pair for set_link");
  weights[i * n + j] = weights[j * n + i] = on ? 1 : 0;
}

std::size_t DiscreteConfiguration::degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < n; ++j) d += weights[i * n + j];
  return d;
}

void DiscreteConfiguration::validate() const {
  if (n < 2) throw InvariantViolation("configuration needs at least two agents");
  if (states.size() != n || weights.size() != n * n)
    throw InvariantViolation("configuration arrays have inconsistent sizes");
  for (auto s : states)
    if (s != 1 && s != -1) throw InvariantViolation("discrete states must be -1 or +1");
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i * n + i] != 0) throw InvariantViolation("weight diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto a = weights[i * n + j], b = weights[j * n + i];
      if (a > 1) throw InvariantViolation("weights must be 0 or 1");
      if (a != b) throw InvariantViolation("weights must be symmetric");
    }
  }
}

HybridConfiguration HybridConfiguration::zeros(std::size_t n, std::size_t m) {
  HybridConfiguration cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.states.assign(n * m, 0.0);
  cfg.weights.assign(n * n, 0);
  return cfg;
}

void HybridConfiguration::set_link(std::size_t i, std::size_t j, bool on) {
  require(i != j && i < n && j < n, "invalid pair for set_link");
  weights[i * n + j] = weights[j * n + i] = on ? 1 : 0;
}

void HybridConfiguration::validate() const {
  if (n < 2) throw InvariantViolation("configuration needs at least two agents");
  if (m < 1 || states.size() != n * m || weights.size() != n * n)
    throw InvariantViolation("configuration arrays have inconsistent sizes");
  for (double x : states)
    if (!std::isfinite(x)) throw InvariantViolation("non-finite agent state");
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i * n + i] != 0) throw InvariantViolation("weight diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j)
      if (weights[i * n + j] > 1 || weights[i * n + j] != weights[j * n + i])
        throw InvariantViolation("weights must be symmetric and binary");
  }
}

PairType pair_type(int a, int b) {
  if (a != b) return PairType::pm;
  return a > 0 ? PairType::pp : PairType::mm;
}

namespace {

double beta_of(const MinimalParams& p, PairType t) {
  switch (t) {
    case PairType::pp: return p.beta_pp;
    case PairType::mm: return p.beta_mm;
    default: return p.beta_pm;
  }
}

double gamma_of(const MinimalParams& p, PairType t) {
  switch (t) {
    case PairType::pp: return p.gamma_pp;
    case PairType::mm: return p.gamma_mm;
    default: return p.gamma_pm;
  }
}

}  // namespace

RateTable minimal_rates(const DiscreteConfiguration& cfg, const MinimalParams& p) {
  cfg.validate();
  const std::size_t n = cfg.n;
  RateTable table;
  table.flip.assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = cfg.s(i) > 0 ? p.alpha_pm : p.alpha_mp;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && cfg.w(i, j) && cfg.s(j) != cfg.s(i)) acc += alpha;
    table.flip[i] = acc * inv_n;
    table.total += table.flip[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const PairType t = pair_type(cfg.s(i), cfg.s(j));
      const bool linked = cfg.w(i, j);
      const double rate = linked ? gamma_of(p, t) : beta_of(p, t);
      table.pairs.push_back({i, j, !linked, rate});
      table.total += rate;
    }
  return table;
}

PairClassCounts count_pair_classes(const DiscreteConfiguration& cfg) {
  PairClassCounts c;
  c.n = cfg.n;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (cfg.s(i) > 0) ++c.n_plus;
    for (std::size_t j = i + 1; j < cfg.n; ++j) {
      if (!cfg.w(i, j)) continue;
      switch (pair_type(cfg.s(i), cfg.s(j))) {
        case PairType::pp: ++c.links_pp; break;
        case PairType::mm: ++c.links_mm; break;
        case PairType::pm: ++c.links_pm; break;
      }
    }
  }
  return c;
}

const char* to_string(EventType type) {
  switch (type) {
    case EventType::flip: return "flip";
    case EventType::create: return "create";
    case EventType::remove: return "remove";
  }
  return "?";
}

namespace {

// Pair-class bookkeeping for the minimal model. Every unordered pair lives in
// exactly one of six member lists (linked or not, times pp/mm/pm); positions
// are tracked so moves are O(1) and a flip costs O(N).
class MinimalEngine {
 public:
  enum Channel { flip_plus, flip_minus, create_pp, create_mm, create_pm, remove_pp, remove_mm, remove_pm };
  static constexpr int kChannels = 8;

  MinimalEngine(const DiscreteConfiguration& cfg, const MinimalParams& p) : cfg_(cfg), p_(p) {
    const std::size_t n = cfg.n;
    require(n < 90000, "minimal-model simulation supports N < 90000", "N");
    row_start_.resize(n);
    for (std::size_t i = 0; i < n; ++i) row_start_[i] = i * n - i * (i + 1) / 2;
    pos_.resize(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) insert(pair_id(i, j), class_of(i, j));
    counts_ = count_pair_classes(cfg);
  }

  const DiscreteConfiguration& config() const { return cfg_; }
  DiscreteConfiguration& config() { return cfg_; }
  const PairClassCounts& counts() const { return counts_; }

  std::array<double, kChannels> rates() const {
    const double inv_n = 1.0 / static_cast<double>(cfg_.n);
    const double cross = static_cast<double>(members_[3 + 2].size());
    return {p_.alpha_pm * cross * inv_n,
            p_.alpha_mp * cross * inv_n,
            p_.beta_pp * static_cast<double>(members_[0].size()),
            p_.beta_mm * static_cast<double>(members_[1].size()),
            p_.beta_pm * static_cast<double>(members_[2].size()),
            p_.gamma_pp * static_cast<double>(members_[3].size()),
            p_.gamma_mm * static_cast<double>(members_[4].size()),
            p_.gamma_pm * static_cast<double>(members_[5].size())};
  }

  /// Draws a concrete event of the channel, as (type, i, j).
  JumpEvent pick(int channel, Rng& rng) const {
    if (channel <= flip_minus) {
      const auto& cross = members_[5];
      const auto [i, j] = pair_of(cross[uniform_index(rng, cross.size())]);
      const int want = channel == flip_plus ? 1 : -1;
      const std::size_t a = cfg_.s(i) == want ? i : j;
      return {0.0, EventType::flip, a, a};
    }
    const bool create = channel < remove_pp;
    const int type = create ? channel - create_pp : channel - remove_pp;
    const auto& list = members_[(create ? 0 : 3) + type];
    const auto [i, j] = pair_of(list[uniform_index(rng, list.size())]);
    return {0.0, create ? EventType::create : EventType::remove, i, j};
  }

  void flip(std::size_t a) {
    const std::size_t n = cfg_.n;
    for (std::size_t k = 0; k < n; ++k)
      if (k != a) erase(pair_id(std::min(a, k), std::max(a, k)), class_of(a, k));
    adjust_link_counts(a, -1);
    cfg_.states[a] = static_cast<std::int8_t>(-cfg_.states[a]);
    counts_.n_plus += cfg_.states[a] > 0 ? 1 : static_cast<std::size_t>(-1);
    adjust_link_counts(a, +1);
    for (std::size_t k = 0; k < n; ++k)
      if (k != a) insert(pair_id(std::min(a, k), std::max(a, k)), class_of(a, k));
  }

  void set_link(std::size_t i, std::size_t j, bool on) {
    const std::size_t id = pair_id(std::min(i, j), std::max(i, j));
    erase(id, class_of(i, j));
    bump(pair_type(cfg_.s(i), cfg_.s(j)), on ? 1 : -1);
    cfg_.set_link(i, j, on);
    insert(id, class_of(i, j));
  }

 private:
  std::size_t pair_id(std::size_t i, std::size_t j) const { return row_start_[i] + (j - i - 1); }

  std::pair<std::size_t, std::size_t> pair_of(std::uint32_t id) const {
    const auto it = std::upper_bound(row_start_.begin(), row_start_.end(), static_cast<std::size_t>(id));
    const std::size_t i = static_cast<std::size_t>(it - row_start_.begin()) - 1;
    return {i, id - row_start_[i] + i + 1};
  }

  int class_of(std::size_t i, std::size_t j) const {
    return (cfg_.w(i, j) ? 3 : 0) + static_cast<int>(pair_type(cfg_.s(i), cfg_.s(j)));
  }

  void insert(std::size_t id, int cls) {
    pos_[id] = static_cast<std::uint32_t>(members_[cls].size());
    members_[cls].push_back(static_cast<std::uint32_t>(id));
  }

  void erase(std::size_t id, int cls) {
    auto& list = members_[cls];
    const std::uint32_t at = pos_[id];
    const std::uint32_t last = list.back();
    list[at] = last;
    pos_[last] = at;
    list.pop_back();
  }

  void bump(PairType t, int delta) {
    std::size_t* slot = t == PairType::pp ? &counts_.links_pp : t == PairType::mm ? &counts_.links_mm : &counts_.links_pm;
    *slot += static_cast<std::size_t>(static_cast<long long>(delta));
  }

  void adjust_link_counts(std::size_t a, int delta) {
    for (std::size_t k = 0; k < cfg_.n; ++k)
      if (k != a && cfg_.w(a, k)) bump(pair_type(cfg_.s(a), cfg_.s(k)), delta);
  }

  DiscreteConfiguration cfg_;
  MinimalParams p_;
  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> pos_;
  std::array<std::vector<std::uint32_t>, 6> members_;
  PairClassCounts counts_;
};

bool apply_event(MinimalEngine& engine, const JumpEvent& ev, int expected_state) {
  auto& cfg = engine.config();
  switch (ev.type) {
    case EventType::flip:
      if (cfg.s(ev.i) != expected_state) return false;
      engine.flip(ev.i);
      return true;
    case EventType::create:
      if (cfg.w(ev.i, ev.j)) return false;
      engine.set_link(ev.i, ev.j, true);
      return true;
    case EventType::remove:
      if (!cfg.w(ev.i, ev.j)) return false;
      engine.set_link(ev.i, ev.j, false);
      return true;
  }
  return false;
}

void check_horizon(double T) { require(T >= 0.0 && std::isfinite(T), "T must be finite and nonnegative", "T"); }

}  // namespace

void simulate_minimal(const DiscreteConfiguration& cfg, const MinimalParams& p, const JumpOptions& opts,
                      const DiscreteObserver& observer, const EventObserver& events) {
  cfg.validate();
  p.validate();
  check_horizon(opts.T);
  MinimalEngine engine(cfg, p);
  Rng rng = make_stream(opts.seed);
  auto record = [&](double t) {
    engine.config().t = t;
    observer(engine.config(), engine.counts());
  };
  record(0.0);
  if (opts.T == 0.0) return;

  if (opts.method == JumpMethod::gillespie) {
    const bool grid = opts.sample_dt > 0.0;
    std::size_t next_sample = 1;
    auto flush_grid = [&](double upto) {
      while (grid) {
        const double ts = static_cast<double>(next_sample) * opts.sample_dt;
        if (ts >= upto || ts >= opts.T) break;
        record(ts);
        ++next_sample;
      }
    };
    std::exponential_distribution<double> expo(1.0);
    double t = 0.0;
    for (;;) {
      const auto rates = engine.rates();
      double total = 0.0;
      for (double r : rates) total += r;
      if (!std::isfinite(total)) throw ModelError("total event rate is not finite");
      if (total <= 0.0) break;
      const double next = t + expo(rng) / total;
      if (next > opts.T) break;
      flush_grid(next);
      t = next;
      double u = uniform01(rng) * total;
      int channel = 0;
      for (; channel < MinimalEngine::kChannels - 1; ++channel) {
        if (u < rates[channel]) break;
        u -= rates[channel];
      }
      while (rates[channel] <= 0.0) --channel;  // guard against round-off past the last nonzero channel
      JumpEvent ev = engine.pick(channel, rng);
      ev.t = t;
      const int expected = channel == MinimalEngine::flip_plus ? 1 : -1;
      apply_event(engine, ev, expected);
      if (events) events(ev);
      if (!grid) record(t);
    }
    flush_grid(opts.T);
    record(opts.T);
    return;
  }

  require(opts.dt > 0.0 && std::isfinite(opts.dt), "tau-leap step must be positive", "dt");
  const std::size_t steps = static_cast<std::size_t>(std::ceil(opts.T / opts.dt - 1e-9));
  struct Pending {
    JumpEvent ev;
    int expected;
  };
  std::vector<Pending> pending;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * opts.dt;
    const double t1 = k == steps ? opts.T : static_cast<double>(k) * opts.dt;
    const auto rates = engine.rates();
    pending.clear();
    for (int c = 0; c < MinimalEngine::kChannels; ++c) {
      if (rates[c] <= 0.0) continue;
      std::poisson_distribution<long long> pois(rates[c] * (t1 - t0));
      const long long count = pois(rng);
      for (long long e = 0; e < count; ++e) {
        JumpEvent ev = engine.pick(c, rng);
        ev.t = t1;
        pending.push_back({ev, c == MinimalEngine::flip_plus ? 1 : -1});
      }
    }
    std::shuffle(pending.begin(), pending.end(), rng);
    for (const auto& item : pending)
      if (apply_event(engine, item.ev, item.expected) && events) events(item.ev);
    record(t1);
  }
}

std::vector<DiscreteConfiguration> simulate_minimal(const DiscreteConfiguration& cfg, const MinimalParams& p,
                                                    const JumpOptions& opts) {
  std::vector<DiscreteConfiguration> out;
  simulate_minimal(cfg, p, opts, [&](const DiscreteConfiguration& c, const PairClassCounts&) { out.push_back(c); });
  return out;
}

namespace {

using LinkHook = std::function<void(std::size_t, std::size_t, bool)>;

std::vector<JumpEvent> interact(DiscreteConfiguration& cfg, std::size_t i, std::size_t j, const VoterOptions& opts,
                                Rng& rng, const LinkHook& hook) {
  std::vector<JumpEvent> out;
  if (cfg.s(i) == cfg.s(j)) return out;
  auto link = [&](std::size_t a, std::size_t b, bool on) {
    cfg.set_link(a, b, on);
    if (hook) hook(a, b, on);
    out.push_back({cfg.t, on ? EventType::create : EventType::remove, a, b});
  };
  if (uniform01(rng) >= opts.p) {
    cfg.states[i] = cfg.states[j];
    out.push_back({cfg.t, EventType::flip, i, i});
    return out;
  }
  std::vector<std::size_t> candidates;
  if (opts.variant == VoterVariant::pq) {
    if (uniform01(rng) < opts.q) {
      link(i, j, false);
      return out;
    }
    for (std::size_t k = 0; k < cfg.n; ++k)
      if (k != i && !cfg.w(i, k)) candidates.push_back(k);
    if (!candidates.empty()) link(i, candidates[uniform_index(rng, candidates.size())], true);
    return out;
  }
  link(i, j, false);
  for (std::size_t k = 0; k < cfg.n; ++k)
    if (k != i && k != j && cfg.s(k) == cfg.s(i) && !cfg.w(i, k)) candidates.push_back(k);
  if (!candidates.empty()) link(i, candidates[uniform_index(rng, candidates.size())], true);
  return out;
}

void check_voter(const VoterOptions& opts) {
  if (!(opts.p >= 0.0 && opts.p <= 1.0)) throw ConfigError("voter p must lie in [0, 1]", "p");
  if (!(opts.q >= 0.0 && opts.q <= 1.0)) throw ConfigError("voter q must lie in [0, 1]", "q");
}

}  // namespace

std::vector<JumpEvent> voter_interaction(DiscreteConfiguration& cfg, std::size_t i, std::size_t j,
                                         const VoterOptions& opts, Rng& rng) {
  check_voter(opts);
  require(i < cfg.n && j < cfg.n && i != j && cfg.w(i, j), "voter interaction needs a linked pair");
  return interact(cfg, i, j, opts, rng, nullptr);
}

void simulate_voter(const DiscreteConfiguration& cfg0, const VoterOptions& opts, const DiscreteObserver& observer,
                    const EventObserver& events) {
  cfg0.validate();
  check_voter(opts);
  check_horizon(opts.T);
  DiscreteConfiguration cfg = cfg0;
  cfg.t = 0.0;
  const std::size_t n = cfg.n;
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (cfg.w(i, j)) adj[i].push_back(static_cast<std::uint32_t>(j));
  auto drop = [&](std::size_t a, std::size_t b) {
    auto& list = adj[a];
    auto it = std::find(list.begin(), list.end(), static_cast<std::uint32_t>(b));
    *it = list.back();
    list.pop_back();
  };
  const LinkHook hook = [&](std::size_t a, std::size_t b, bool on) {
    if (on) {
      adj[a].push_back(static_cast<std::uint32_t>(b));
      adj[b].push_back(static_cast<std::uint32_t>(a));
    } else {
      drop(a, b);
      drop(b, a);
    }
  };

  PairClassCounts counts = count_pair_classes(cfg);
  auto record = [&](double t) {
    cfg.t = t;
    counts = count_pair_classes(cfg);
    observer(cfg, counts);
  };
  record(0.0);
  if (opts.T == 0.0) return;

  Rng rng = make_stream(opts.seed);
  std::exponential_distribution<double> expo(static_cast<double>(n));
  const bool grid = opts.sample_dt > 0.0;
  std::size_t next_sample = 1;
  double t = 0.0;
  for (;;) {
    const double next = t + expo(rng);
    while (grid) {
      const double ts = static_cast<double>(next_sample) * opts.sample_dt;
      if (ts >= next || ts >= opts.T) break;
      record(ts);
      ++next_sample;
    }
    if (next > opts.T) break;
    t = next;
    cfg.t = t;
    const std::size_t i = uniform_index(rng, n);
    if (adj[i].empty()) continue;
    const std::size_t j = adj[i][uniform_index(rng, adj[i].size())];
    const auto done = interact(cfg, i, j, opts, rng, hook);
    if (events)
      for (const auto& ev : done) events(ev);
    if (!grid && !done.empty()) record(t);
  }
  record(opts.T);
}

std::vector<DiscreteConfiguration> simulate_voter(const DiscreteConfiguration& cfg, const VoterOptions& opts) {
  std::vector<DiscreteConfiguration> out;
  simulate_voter(cfg, opts, [&](const DiscreteConfiguration& c, const PairClassCounts&) { out.push_back(c); });
  return out;
}

HybridRunInfo simulate_hybrid_bc(const HybridConfiguration& cfg0, const ExternalForce& F, const ScalarFn& r,
                                 const HybridOptions& opts, const HybridObserver& observer) {
  cfg0.validate();
  if (!F) throw ModelError("hybrid model needs an averaging map F", "F");
  if (!r) throw ModelError("hybrid model needs a link propensity r", "r");
  if (!(opts.tau > 0.0)) throw ConfigError("tau must be positive", "tau");
  require(opts.dt > 0.0 && std::isfinite(opts.dt), "dt must be positive", "dt");
  check_horizon(opts.T);

  HybridRunInfo info;
  if (opts.dt >= opts.tau)
    info.warnings.push_back("dt >= tau: operator splitting resolves link switching poorly");

  HybridConfiguration cfg = cfg0;
  cfg.t = 0.0;
  const std::size_t n = cfg.n, m = cfg.m;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> fs(n * m);
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
    for (std::size_t j = 0; j < n; ++j) F(y.subspan(j * m, m), MutVec(fs.data() + j * m, m));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < m; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (cfg.weights[i * n + j]) acc += fs[j * m + c] - y[i * m + c];
        dy[i * m + c] = acc * inv_n;
      }
  };

  const std::size_t steps = opts.T == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(opts.T / opts.dt - 1e-9));
  const std::size_t every = std::max<std::size_t>(1, opts.record_every);
  Rng rng = make_stream(opts.seed);
  ode::Rk4 rk4(n * m);
  observer(cfg);
  const bool frozen = std::isinf(opts.tau);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * opts.dt;
    const double t1 = k == steps ? opts.T : static_cast<double>(k) * opts.dt;
    const double h = t1 - t0;
    rk4.step(rhs, t0, cfg.states, h);
    if (!ode::all_finite(cfg.states)) throw IntegrationError("non-finite state in hybrid simulation", t0);
    if (!frozen) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          double dist = 0.0;
          for (std::size_t c = 0; c < m; ++c) {
            const double d = cfg.states[i * m + c] - cfg.states[j * m + c];
            dist += d * d;
          }
          const double prop = r(std::sqrt(dist));
          if (!(prop >= 0.0) || !std::isfinite(prop)) throw ModelError("link propensity r must be nonnegative", "r");
          if (opts.removal == RemovalRule::complementary && prop > 1.0)
            throw ModelError("link propensity r must not exceed 1 with complementary removal", "r");
          const bool linked = cfg.w(i, j);
          const double rate = linked ? (opts.removal == RemovalRule::complementary ? 1.0 - prop : 1.0) / opts.tau
                                     : prop / opts.tau;
          if (rate > 0.0 && uniform01(rng) < -std::expm1(-rate * h)) {
            cfg.set_link(i, j, !linked);
            ++info.link_events;
          }
        }
    }
    cfg.t = t1;
    if (k % every == 0 || k == steps) observer(cfg);
  }
  return info;
}

}  // namespace coevo
