#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <limits>
#include <set>

#include "characteristics.hpp"
#include "closures.hpp"
#include "compare.hpp"
#include "io.hpp"
#include "jumpsim.hpp"
#include "microsim.hpp"

namespace coevo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kKinds[] = {"micro",   "diffusive",    "minimal",         "voter",   "hybrid-bc",    "closure",
                              "stationary", "continuation", "characteristics", "compare", "epsilon-sweep"};

// Reads one JSON object, records every key it touches and fills defaults
// into `out`, so leftover keys can be rejected by name.
class Reader {
 public:
  Reader(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + " must be an object", path_);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(field(key) + " " + what, field(key));
  }

  double number(const std::string& key, std::optional<double> def = {}) {
    const json* v = get(key);
    double x;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_number()) fail(key, "must be a number");
      x = v->get<double>();
    }
    if (!std::isfinite(x)) fail(key, "must be finite");
    out_[key] = x;
    return x;
  }
  double positive(const std::string& key, std::optional<double> def = {}) {
    const double x = number(key, def);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }
  double nonnegative(const std::string& key, std::optional<double> def = {}) {
    const double x = number(key, def);
    if (x < 0.0) fail(key, "must be nonnegative");
    return x;
  }
  double probability(const std::string& key, std::optional<double> def = {}) {
    const double x = number(key, def);
    if (x < 0.0 || x > 1.0) fail(key, "must lie in [0, 1]");
    return x;
  }

  std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> def, std::uint64_t min = 0) {
    const json* v = get(key);
    std::uint64_t x;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "must be a nonnegative integer");
      x = v->get<std::uint64_t>();
    }
    if (x < min) fail(key, "must be at least " + std::to_string(min));
    out_[key] = x;
    return x;
  }

  bool flag(const std::string& key, bool def) {
    const json* v = get(key);
    bool x = def;
    if (v) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      x = v->get<bool>();
    }
    out_[key] = x;
    return x;
  }

  std::string text(const std::string& key, std::optional<std::string> def = {}) {
    const json* v = get(key);
    std::string x;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_string()) fail(key, "must be a string");
      x = v->get<std::string>();
    }
    out_[key] = x;
    return x;
  }

  std::string choice(const std::string& key, std::optional<std::string> def,
                     std::initializer_list<const char*> options) {
    const std::string x = text(key, std::move(def));
    std::string list;
    for (const char* o : options) {
      if (x == o) return x;
      list += list.empty() ? o : std::string(", ") + o;
    }
    fail(key, "must be one of: " + list);
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def = {}) {
    const json* v = get(key);
    std::vector<double> xs;
    if (!v) {
      if (!def) fail(key, "is required");
      xs = *def;
    } else if (v->is_number()) {
      xs = {v->get<double>()};
    } else {
      if (!v->is_array() || v->empty()) fail(key, "must be a number or a nonempty array of numbers");
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "must contain numbers only");
        xs.push_back(e.get<double>());
      }
    }
    for (double x : xs)
      if (!std::isfinite(x)) fail(key, "must contain finite numbers");
    out_[key] = xs;
    return xs;
  }

  json raw(const std::string& key, std::optional<json> def = {}) {
    const json* v = get(key);
    if (!v && !def) fail(key, "is required");
    json x = v ? *v : *def;
    out_[key] = x;
    return x;
  }

  Reader child(const std::string& key, bool optional = false) {
    const json* v = get(key);
    if (!v && !optional) fail(key, "is required");
    return Reader(v ? *v : json::object(), field(key));
  }
  void adopt(const std::string& key, Reader& c) {
    c.finish();
    out_[key] = c.out_;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + field(item.key()) + "'", field(item.key()));
  }

  json& out() { return out_; }

 private:
  json j_;
  std::string path_;
  std::set<std::string> seen_;
  json out_ = json::object();
};

struct RunContext {
  fs::path dir;
  std::size_t workers = 1;
  json files = json::array();
  json results = json::object();
  std::vector<std::string> warnings;

  void write(const std::string& name, const std::string& content) {
    io::write_atomic(dir / name, content);
    files.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a64", io::hex64(io::fnv1a64(content))}});
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

}  // namespace

class Job {
 public:
  virtual ~Job() = default;
  virtual std::vector<std::string> outputs() const = 0;
  virtual void run(RunContext& ctx) const = 0;

  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

namespace {

std::vector<std::string> state_columns(std::size_t m) {
  if (m == 1) return {"s"};
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < m; ++k) cols.push_back("s" + std::to_string(k));
  return cols;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<std::string> kMomentColumns = {"f_pp", "g_pp", "f_mm", "g_mm", "f_pm", "g_pm"};

// Converts model-construction failures into configuration errors so that
// validate and run reject the same configs with the same exit status.
template <class F>
auto as_config(const std::string& fallback_field, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what(), e.field().empty() ? fallback_field : e.field());
  }
}

struct ModelSpec {
  SmoothModel model;
  std::optional<PotentialModel> potential;
};

ModelSpec parse_model(Reader& r) {
  Reader c = r.child("model");
  const std::string name = c.choice("name", std::nullopt, {"kernel-relaxation", "boschi", "quadratic-potential"});
  const json params = c.raw("params", json::object());
  r.adopt("model", c);
  return as_config("model", [&] {
    ModelSpec spec;
    spec.model = catalog(name, params);
    if (name == "quadratic-potential") spec.potential = catalog_potential(name, params);
    spec.model.validate();
    return spec;
  });
}

MinimalParams parse_params(Reader& r) {
  const json raw = r.raw("params", json::object());
  const MinimalParams p = MinimalParams::from_json(raw);
  r.out()["params"] = p.to_json();
  return p;
}

RandomMinimalInit parse_random_init(Reader& r) {
  Reader c = r.child("init", true);
  RandomMinimalInit init;
  init.rho_p = c.probability("rho_p", 0.5);
  init.link_pp = c.probability("link_pp", 0.5);
  init.link_mm = c.probability("link_mm", 0.5);
  init.link_pm = c.probability("link_pm", 0.5);
  r.adopt("init", c);
  return init;
}

ClosureKind closure_kind(const std::string& s) {
  return s == "kirkwood" ? ClosureKind::kirkwood : ClosureKind::conditional;
}

std::vector<ClosureKind> closure_kinds(const std::string& s) {
  if (s == "both") return {ClosureKind::conditional, ClosureKind::kirkwood};
  return {closure_kind(s)};
}

// States (and optionally weights) of a continuous configuration.
struct ContinuousInit {
  std::string states = "uniform";
  double lo = -1.0, hi = 1.0;
  std::vector<double> values;
  std::string weights = "constant";
  double weight = 0.5, weight_lo = 0.0, weight_hi = 1.0;

  void parse(Reader& r, std::size_t n, std::size_t m, bool with_weights) {
    Reader c = r.child("init", true);
    states = c.choice("states", "uniform", {"uniform", "values"});
    if (states == "uniform") {
      lo = c.number("lo", -1.0);
      hi = c.number("hi", 1.0);
      if (!(hi > lo)) c.fail("hi", "must exceed lo");
    } else {
      values = c.numbers("values");
      if (values.size() != n * m) c.fail("values", "must hold N*m = " + std::to_string(n * m) + " numbers");
    }
    if (with_weights) {
      weights = c.choice("weights", "constant", {"constant", "uniform", "nullcline"});
      if (weights == "constant") weight = c.number("weight", 0.5);
      if (weights == "uniform") {
        weight_lo = c.number("weight_lo", 0.0);
        weight_hi = c.number("weight_hi", 1.0);
        if (!(weight_hi > weight_lo)) c.fail("weight_hi", "must exceed weight_lo");
      }
    }
    r.adopt("init", c);
  }

  std::vector<double> sample_states(std::size_t n, std::size_t m, Rng& rng) const {
    if (states == "values") return values;
    std::vector<double> s(n * m);
    for (auto& x : s) x = lo + (hi - lo) * uniform01(rng);
    return s;
  }

  AgentConfiguration build(std::size_t n, const SmoothModel& model, Rng& rng) const {
    auto cfg = AgentConfiguration::zeros(n, model.m, model.symmetric_V);
    cfg.states = sample_states(n, model.m, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || (cfg.symmetric && j < i)) continue;
        double w = weight;
        if (weights == "uniform") w = weight_lo + (weight_hi - weight_lo) * uniform01(rng);
        if (weights == "nullcline") w = solve_weight_nullcline(model, cfg.state(i), cfg.state(j));
        if (cfg.symmetric)
          cfg.set_weight(i, j, w);
        else
          cfg.w(i, j) = w;
      }
    return cfg;
  }
};

void agent_rows(const AgentConfiguration& c, io::CsvWriter& states, io::CsvWriter* weights) {
  for (std::size_t i = 0; i < c.n; ++i) {
    states.cell(c.t).cell(i);
    for (double x : c.state(i)) states.cell(x);
    states.end_row();
  }
  if (!weights) return;
  for (std::size_t i = 0; i < c.n; ++i)
    for (std::size_t j = 0; j < c.n; ++j)
      if (i != j) weights->cell(c.t).cell(i).cell(j).cell(c.w(i, j)).end_row();
}

void moment_row(io::CsvWriter& csv, double t, const MinimalMoments& m) {
  csv.cell(t);
  for (double x : m.to_array()) csv.cell(x);
}

// ---------------------------------------------------------------- micro

class MicroJob : public Job {
 public:
  MicroJob(Reader& r, bool diffusive) : diffusive_(diffusive) {
    spec_ = parse_model(r);
    n_ = r.integer("N", std::nullopt, 2);
    opts_.dt = r.positive("dt", 1e-3);
    opts_.T = r.nonnegative("T", 1.0);
    opts_.record_every = r.integer("record_every", 1, 1);
    if (!diffusive) {
      opts_.eps_w = r.positive("eps_w", 1.0);
      opts_.eps_s = r.positive("eps_s", 1.0);
      const auto method = r.choice("method", "rk4", {"rk4", "euler", "rkf45"});
      opts_.method = method == "euler" ? Integrator::euler : method == "rkf45" ? Integrator::rkf45 : Integrator::rk4;
    }
    write_weights_ = r.flag("write_weights", true);
    init_.parse(r, n_, spec_.model.m, true);
    if (diffusive && !spec_.model.Q && !spec_.model.R)
      warnings.push_back("model carries no noise coefficients; the diffusive run is deterministic");
  }

  std::vector<std::string> outputs() const override {
    std::vector<std::string> out = {"states.csv"};
    if (write_weights_) out.push_back("weights.csv");
    if (spec_.potential && !diffusive_) out.push_back("energy.csv");
    return out;
  }

  void run(RunContext& ctx) const override {
    Rng rng = make_stream(seed, 0);
    const auto cfg = init_.build(n_, spec_.model, rng);
    io::CsvWriter states(concat({"t", "i"}, state_columns(cfg.m)));
    io::CsvWriter weights({"t", "i", "j", "w"});
    io::CsvWriter energy({"t", "energy", "dissipation"});
    double max_asym = 0.0;
    auto observe = [&](const AgentConfiguration& c) {
      agent_rows(c, states, write_weights_ ? &weights : nullptr);
      max_asym = std::max(max_asym, c.symmetric ? c.max_asymmetry() : 0.0);
      if (spec_.potential && !diffusive_) {
        const auto e = energy_report(c, *spec_.potential);
        energy.row({c.t, e.energy, e.dissipation});
      }
    };
    if (diffusive_)
      simulate_diffusive(cfg, spec_.model, opts_.dt, opts_.T, make_stream(seed, 1)(), opts_.record_every, observe);
    else
      integrate_micro(cfg, spec_.model, opts_, observe);
    ctx.write("states.csv", states.text());
    if (write_weights_) ctx.write("weights.csv", weights.text());
    if (spec_.potential && !diffusive_) ctx.write("energy.csv", energy.text());
    ctx.results["symmetric"] = cfg.symmetric;
    ctx.results["max_asymmetry"] = max_asym;
  }

 private:
  bool diffusive_;
  ModelSpec spec_;
  std::size_t n_ = 0;
  MicroOptions opts_;
  bool write_weights_ = true;
  ContinuousInit init_;
};

// ---------------------------------------------------------- jump models

class JumpJob : public Job {
 public:
  JumpJob(Reader& r, bool voter) : voter_(voter) {
    if (!voter) p_ = parse_params(r);
    n_ = r.integer("N", std::nullopt, 2);
    T_ = r.positive("T", 1.0);
    sample_dt_ = r.nonnegative("sample_dt", 0.01);
    if (voter) {
      vo_.p = r.probability("p", 0.5);
      vo_.q = r.probability("q", 1.0);
      vo_.variant = r.choice("variant", "pq", {"pq", "original"}) == "original" ? VoterVariant::original
                                                                                   : VoterVariant::pq;
    } else {
      jo_.method = r.choice("method", "gillespie", {"gillespie", "tau-leap"}) == "tau-leap" ? JumpMethod::tau_leap
                                                                                         : JumpMethod::gillespie;
      jo_.dt = r.positive("dt", 0.01);
    }
    events_ = r.flag("events", true);
    init_ = parse_random_init(r);
  }

  std::vector<std::string> outputs() const override {
    if (events_) return {"moments.csv", "events.csv"};
    return {"moments.csv"};
  }

  void run(RunContext& ctx) const override {
    Rng rng = make_stream(seed, 0);
    const auto cfg = init_.sample(n_, rng);
    const std::uint64_t sim_seed = make_stream(seed, 1)();
    io::CsvWriter moments(concat(concat({"t"}, kMomentColumns), {"rho_p", "n_plus", "links"}));
    io::CsvWriter events({"t", "type", "i", "j"});
    std::size_t n_events = 0;
    auto observe = [&](const DiscreteConfiguration& c, const PairClassCounts& counts) {
      moment_row(moments, c.t, minimal_moments(counts));
      moments.cell(minimal_moments(counts).rho_p())
          .cell(counts.n_plus)
          .cell(counts.links_pp + counts.links_mm + counts.links_pm)
          .end_row();
    };
    auto on_event = [&](const JumpEvent& e) {
      ++n_events;
      if (events_) events.cell(e.t).cell(std::string_view(to_string(e.type))).cell(e.i).cell(e.j).end_row();
    };
    if (voter_) {
      VoterOptions vo = vo_;
      vo.T = T_;
      vo.seed = sim_seed;
      vo.sample_dt = sample_dt_;
      simulate_voter(cfg, vo, observe, on_event);
    } else {
      JumpOptions jo = jo_;
      jo.T = T_;
      jo.seed = sim_seed;
      jo.sample_dt = sample_dt_;
      simulate_minimal(cfg, p_, jo, observe, on_event);
    }
    ctx.write("moments.csv", moments.text());
    if (events_) ctx.write("events.csv", events.text());
    ctx.results["events"] = n_events;
  }

 private:
  bool voter_;
  MinimalParams p_;
  std::size_t n_ = 0;
  double T_ = 1.0, sample_dt_ = 0.01;
  VoterOptions vo_;
  JumpOptions jo_;
  bool events_ = true;
  RandomMinimalInit init_;
};

// ------------------------------------------------------------ hybrid-bc

class HybridJob : public Job {
 public:
  explicit HybridJob(Reader& r) {
    n_ = r.integer("N", std::nullopt, 2);
    m_ = r.integer("m", 1, 1);
    opts_.dt = r.positive("dt", 1e-2);
    opts_.T = r.nonnegative("T", 1.0);
    opts_.record_every = r.integer("record_every", 1, 1);
    opts_.tau = r.flag("frozen_links", false) ? std::numeric_limits<double>::infinity() : r.positive("tau", 1.0);
    opts_.removal = r.choice("removal", "complementary", {"complementary", "constant"}) == "constant"
                        ? RemovalRule::constant
                        : RemovalRule::complementary;
    const json F = r.raw("F", json{{"type", "identity"}});
    const json rk = r.raw("r");
    f_ = as_config("F", [&] { return make_kernel(F, "F"); });
    r_ = as_config("r", [&] { return make_kernel(rk, "r"); });
    init_.parse(r, n_, m_, false);
    Reader c = r.child("links", true);
    link_density_ = c.probability("density", 0.5);
    r.adopt("links", c);
  }

  std::vector<std::string> outputs() const override { return {"states.csv", "links.csv"}; }

  void run(RunContext& ctx) const override {
    Rng rng = make_stream(seed, 0);
    auto cfg = HybridConfiguration::zeros(n_, m_);
    cfg.states = init_.sample_states(n_, m_, rng);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (uniform01(rng) < link_density_) cfg.set_link(i, j, true);
    HybridOptions o = opts_;
    o.seed = make_stream(seed, 1)();
    const ScalarFn f = f_;
    const ExternalForce F = [f](ConstVec s, MutVec out) {
      for (std::size_t k = 0; k < s.size(); ++k) out[k] = f(s[k]);
    };
    io::CsvWriter states(concat({"t", "i"}, state_columns(m_)));
    io::CsvWriter links({"t", "links"});
    const auto info = simulate_hybrid_bc(cfg, F, r_, o, [&](const HybridConfiguration& c) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < c.n; ++i) {
        states.cell(c.t).cell(i);
        for (double x : c.state(i)) states.cell(x);
        states.end_row();
        for (std::size_t j = i + 1; j < c.n; ++j) count += c.w(i, j);
      }
      links.cell(c.t).cell(count).end_row();
    });
    ctx.write("states.csv", states.text());
    ctx.write("links.csv", links.text());
    ctx.results["link_events"] = info.link_events;
    for (const auto& w : info.warnings) ctx.warnings.push_back(w);
  }

 private:
  std::size_t n_ = 0, m_ = 1;
  HybridOptions opts_;
  ScalarFn f_, r_;
  ContinuousInit init_;
  double link_density_ = 0.5;
};

// -------------------------------------------------------------- closure

class ClosureJob : public Job {
 public:
  explicit ClosureJob(Reader& r) {
    p_ = parse_params(r);
    kinds_ = r.choice("closure", "both", {"conditional", "kirkwood", "both"});
    opts_.dt = r.positive("dt", 1e-3);
    opts_.T = r.nonnegative("T", 10.0);
    opts_.record_every = r.integer("record_every", 10, 1);
    Reader c = r.child("init");
    const auto type = c.choice("type", std::nullopt, {"moments", "stationary", "random"});
    if (type == "moments") {
      std::array<double, 6> a;
      for (int k = 0; k < 6; ++k) a[k] = c.nonnegative(kMomentColumns[k]);
      m0_ = MinimalMoments::from_array(a);
      as_config("init", [&] {
        m0_.validate(1e-12);
        return 0;
      });
    } else if (type == "stationary") {
      const double rho = c.probability("rho_p");
      const double g = c.nonnegative("g_pm", 0.0);
      m0_ = as_config("init", [&] { return stationary_polarized(p_, rho, g); });
    } else {
      RandomMinimalInit init;
      init.rho_p = c.probability("rho_p", 0.5);
      init.link_pp = c.probability("link_pp", 0.5);
      init.link_mm = c.probability("link_mm", 0.5);
      init.link_pm = c.probability("link_pm", 0.5);
      m0_ = init.expected_moments();
    }
    r.adopt("init", c);
  }

  std::vector<std::string> outputs() const override {
    std::vector<std::string> out;
    for (auto k : closure_kinds(kinds_)) out.push_back(std::string("closure_") + to_string(k) + ".csv");
    out.push_back("summary.json");
    return out;
  }

  void run(RunContext& ctx) const override {
    json summary = json::object();
    for (auto kind : closure_kinds(kinds_)) {
      const auto traj = integrate_closure(m0_, p_, kind, opts_);
      io::CsvWriter csv(concat(concat({"t"}, kMomentColumns), {"rho_p", "h_pp", "h_mm", "h_pm"}));
      for (std::size_t k = 0; k < traj.t.size(); ++k) {
        const auto& m = traj.moments[k];
        moment_row(csv, traj.t[k], m);
        csv.cell(m.rho_p()).cell(m.h_pp()).cell(m.h_mm()).cell(m.h_pm()).end_row();
      }
      const std::string name = to_string(kind);
      ctx.write("closure_" + name + ".csv", csv.text());
      json s = {{"consensus_reached", traj.consensus_reached},
                {"clamp_events", traj.clamp_events},
                {"kirkwood_artifact", traj.kirkwood_artifact},
                {"max_normalization_drift", traj.max_normalization_drift},
                {"max_rho_drift", traj.max_rho_drift},
                {"samples", traj.t.size()}};
      const double flips = p_.alpha_pm + p_.alpha_mp;
      const double rate = kind == ClosureKind::conditional ? p_.gamma_pm - 0.5 * flips : p_.gamma_pm - flips;
      if (p_.beta_pm == 0.0 && rate > 0.0) {
        const auto d = decay_envelope_check(traj, p_, kind);
        s["decay"] = {{"rate", d.rate}, {"holds", d.holds}, {"worst_ratio", d.worst_ratio}};
      }
      if (traj.kirkwood_artifact) ctx.warnings.push_back(name + ": Kirkwood artifact (h_pp + h_mm near 0)");
      summary[name] = s;
    }
    ctx.write_json("summary.json", summary);
    ctx.results = summary;
  }

 private:
  MinimalParams p_;
  std::string kinds_;
  ClosureOptions opts_;
  MinimalMoments m0_;
};

// ----------------------------------------------------------- stationary

class StationaryJob : public Job {
 public:
  explicit StationaryJob(Reader& r) {
    p_ = parse_params(r);
    kinds_ = r.choice("closure", "both", {"conditional", "kirkwood", "both"});
    rho_ = r.numbers("rho_p", std::vector<double>{0.5});
    for (double x : rho_)
      if (!(x > 0.0 && x < 1.0)) r.fail("rho_p", "values must lie in (0, 1)");
    g_pm_ = r.nonnegative("g_pm", 0.0);
    for (double x : rho_) as_config("g_pm", [&] { return stationary_polarized(p_, x, g_pm_); });
  }

  std::vector<std::string> outputs() const override {
    return {"stationary.csv", "eigenvalues.csv", "mixed_h.csv", "stability.json"};
  }

  void run(RunContext& ctx) const override {
    io::CsvWriter st(concat(concat({"closure", "rho_p"}, kMomentColumns), {"residual", "lambda_pm", "zero_eigenvalues"}));
    io::CsvWriter ev({"closure", "rho_p", "index", "re", "im"});
    io::CsvWriter mixed({"rho_p", "h_pp", "h_mm", "h_pm"});
    json stability = json::array();
    for (double rho : rho_) {
      const auto m = stationary_polarized(p_, rho, g_pm_);
      for (auto kind : closure_kinds(kinds_)) {
        double residual = 0.0;
        for (double x : closure_rhs(m, p_, kind)) residual = std::max(residual, std::abs(x));
        const auto lin = linearized_jacobian(p_, m, kind);
        std::size_t zeros = 0;
        for (std::size_t k = 0; k < lin.eigenvalues.size(); ++k) {
          const auto& e = lin.eigenvalues[k];
          zeros += std::abs(e) <= 1e-8;
          ev.cell(std::string_view(to_string(kind))).cell(rho).cell(k).cell(e.real()).cell(e.imag()).end_row();
        }
        st.cell(std::string_view(to_string(kind))).cell(rho);
        for (double x : m.to_array()) st.cell(x);
        st.cell(residual).cell(lin.lambda_pm).cell(zeros).end_row();
      }
      if (p_.alpha_pm == p_.alpha_mp || kinds_ != "kirkwood") {
        const auto h = stationary_mixed_h(p_, rho);
        mixed.row({rho, h.h_pp, h.h_mm, h.h_pm});
      }
      const auto s = polarization_stable(p_, rho);
      stability.push_back({{"rho_p", rho}, {"stable", s.stable}, {"lhs", s.lhs}, {"rhs", s.rhs}, {"margin", s.margin}});
    }
    ctx.write("stationary.csv", st.text());
    ctx.write("eigenvalues.csv", ev.text());
    ctx.write("mixed_h.csv", mixed.text());
    ctx.write_json("stability.json", stability);
    ctx.results["points"] = rho_.size();
  }

 private:
  MinimalParams p_;
  std::string kinds_;
  std::vector<double> rho_;
  double g_pm_ = 0.0;
};

// --------------------------------------------------------- continuation

class ContinuationJob : public Job {
 public:
  explicit ContinuationJob(Reader& r) {
    p_ = parse_params(r);
    rho_ = r.number("rho_p");
    if (!(rho_ > 0.0 && rho_ < 1.0)) r.fail("rho_p", "must lie in (0, 1)");
    kind_ = closure_kind(r.choice("closure", "conditional", {"conditional", "kirkwood"}));
    eps_ = r.numbers("eps", std::vector<double>{1e-2, 1e-3, 1e-4});
    for (double e : eps_)
      if (!(e > 0.0)) r.fail("eps", "values must be positive");
    opts_.g_pm_seed = r.number("g_pm_seed", -1.0);
    opts_.max_iterations = static_cast<int>(r.integer("max_iterations", 50, 1));
    opts_.tolerance = r.positive("tolerance", 1e-10);
    if (2.0 * p_.gamma_pm <= p_.alpha_pm + p_.alpha_mp)
      warnings.push_back("2 gamma_pm <= alpha_pm + alpha_mp: the small-eps hypothesis is violated, continuation may fail");
    if (p_.alpha_pm != p_.alpha_mp)
      warnings.push_back("unequal flip rates: no stationary branch with f_pm > 0 exists at fixed rho_p");
    if (p_.beta_pm != 0.0) warnings.push_back("params.beta_pm is replaced by each eps value");
  }

  std::vector<std::string> outputs() const override { return {"branch.csv"}; }

  void run(RunContext& ctx) const override {
    io::CsvWriter csv(
        concat(concat({"eps"}, kMomentColumns), {"f_pm_over_eps", "dfdeps", "residual", "iterations"}));
    json notes = json::array();
    for (double e : eps_) {
      MinimalParams p = p_;
      p.beta_pm = e;
      const auto b = continue_small_epsilon(p, rho_, kind_, opts_);
      csv.cell(e);
      for (double x : b.moments.to_array()) csv.cell(x);
      csv.cell(b.moments.f_pm / e).cell(b.dfdeps).cell(b.residual).cell(b.iterations).end_row();
      for (const auto& n : b.notes) notes.push_back(n);
    }
    ctx.write("branch.csv", csv.text());
    ctx.results["notes"] = notes;
  }

 private:
  MinimalParams p_;
  double rho_ = 0.5;
  ClosureKind kind_ = ClosureKind::conditional;
  std::vector<double> eps_;
  ContinuationOptions opts_;
};

// ------------------------------------------------------ characteristics

class CharacteristicsJob : public Job {
 public:
  explicit CharacteristicsJob(Reader& r) {
    spec_ = parse_model(r);
    M_ = r.integer("M", std::nullopt, 2);
    opts_.dt = r.positive("dt", 1e-2);
    opts_.T = r.nonnegative("T", 1.0);
    opts_.record_every = r.integer("record_every", 1, 1);
    opts_.collision_distance = r.nonnegative("collision_distance", 0.0);
    wc_ = r.choice("variant", "conditional", {"conditional", "wc"}) == "wc";
    Reader c = r.child("init", true);
    anchors_ = c.choice("anchors", "uniform", {"uniform", "grid"});
    lo_ = c.number("lo", -1.0);
    hi_ = c.number("hi", 1.0);
    if (!(hi_ > lo_)) c.fail("hi", "must exceed lo");
    const auto weights = c.choice("weights", "constant", {"constant", "profile"});
    if (weights == "constant") {
      const double w = c.number("weight", 0.5);
      W0_ = [w](ConstVec, ConstVec) { return w; };
    } else {
      const json k = c.raw("kernel");
      const ScalarFn f = as_config(c.field("kernel"), [&] { return make_kernel(k, c.field("kernel")); });
      W0_ = [f](ConstVec s, ConstVec sigma) {
        double d = 0.0;
        for (std::size_t q = 0; q < s.size(); ++q) d += (s[q] - sigma[q]) * (s[q] - sigma[q]);
        return f(std::sqrt(d));
      };
    }
    r.adopt("init", c);
  }

  std::vector<std::string> outputs() const override {
    std::vector<std::string> out = {"ensemble.csv", "pair_weights.csv"};
    if (spec_.potential) out.push_back("energy.csv");
    return out;
  }

  void run(RunContext& ctx) const override {
    const std::size_t m = spec_.model.m;
    auto e = CharacteristicEnsemble::uniform(M_, m);
    Rng rng = make_stream(seed, 0);
    for (std::size_t i = 0; i < M_; ++i)
      for (std::size_t q = 0; q < m; ++q)
        e.anchor(i)[q] = anchors_ == "grid" ? lo_ + (hi_ - lo_) * static_cast<double>(i) / static_cast<double>(M_ - 1)
                                            : lo_ + (hi_ - lo_) * uniform01(rng);
    CharacteristicRun run;
    if (wc_) {
      run = integrate_characteristics_wc(e, spec_.model, W0_, opts_);
    } else {
      for (std::size_t i = 0; i < M_; ++i)
        for (std::size_t j = 0; j < M_; ++j) e.w(i, j) = i == j ? 0.0 : W0_(e.anchor(i), e.anchor(j));
      run = integrate_characteristics_conditional(e, spec_.model, opts_);
    }
    io::CsvWriter ens(concat({"t", "i", "mass"}, state_columns(m)));
    io::CsvWriter pw({"t", "i", "j", "w"});
    io::CsvWriter energy({"t", "energy", "dissipation"});
    for (const auto& s : run.snapshots) {
      for (std::size_t i = 0; i < s.M; ++i) {
        ens.cell(s.t).cell(i).cell(s.masses[i]);
        for (double x : s.anchor(i)) ens.cell(x);
        ens.end_row();
        for (std::size_t j = 0; j < s.M; ++j)
          if (i != j) pw.cell(s.t).cell(i).cell(j).cell(s.w(i, j)).end_row();
      }
      if (spec_.potential) {
        const auto pe = pair_energy_dissipation(s, *spec_.potential);
        energy.row({s.t, pe.energy, pe.dissipation});
      }
    }
    ctx.write("ensemble.csv", ens.text());
    ctx.write("pair_weights.csv", pw.text());
    if (spec_.potential) ctx.write("energy.csv", energy.text());
    const double md = run.min_distance.back();
    ctx.results["final_min_distance"] = std::isfinite(md) ? json(md) : json(nullptr);
    ctx.results["snapshots"] = run.snapshots.size();
  }

 private:
  ModelSpec spec_;
  std::size_t M_ = 0;
  CharacteristicOptions opts_;
  bool wc_ = false;
  std::string anchors_;
  double lo_ = -1.0, hi_ = 1.0;
  WeightProfile W0_;
};

// -------------------------------------------------------------- compare

json moments_json(const std::vector<MinimalMoments>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(m.to_array());
  return out;
}

class CompareJob : public Job {
 public:
  explicit CompareJob(Reader& r) {
    p_ = parse_params(r);
    init_ = parse_random_init(r);
    opts_.n = r.integer("N", 100, 10);
    opts_.runs = r.integer("runs", 10, 2);
    opts_.T = r.positive("T", 1.0);
    opts_.dt = r.positive("dt", 0.1);
    const double ratio = opts_.T / opts_.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
      r.fail("dt", "must divide T into an integer number of samples");
    opts_.method = r.choice("method", "gillespie", {"gillespie", "tau-leap"}) == "tau-leap" ? JumpMethod::tau_leap
                                                                                         : JumpMethod::gillespie;
    opts_.alpha_scale = r.positive("alpha_scale", 2.0);
    opts_.closure_dt = r.positive("closure_dt", 1e-3);
  }

  std::vector<std::string> outputs() const override { return {"report.json", "errors.csv"}; }

  void run(RunContext& ctx) const override {
    ComparisonOptions o = opts_;
    o.seed = seed;
    o.workers = ctx.workers;
    const auto rep = run_comparison(p_, init_, o);
    json se = json::array();
    for (const auto& a : rep.standard_error) se.push_back(a);
    json report = {
        {"params", rep.params.to_json()},
        {"closure_params", rep.closure_params.to_json()},
        {"init",
         {{"rho_p", init_.rho_p}, {"link_pp", init_.link_pp}, {"link_mm", init_.link_mm}, {"link_pm", init_.link_pm}}},
        {"N", o.n},
        {"runs", o.runs},
        {"T", o.T},
        {"dt", o.dt},
        {"seed", seed},
        {"components", kMomentColumns},
        {"t", rep.t},
        {"mean", moments_json(rep.mean)},
        {"standard_error", se},
        {"conditional", moments_json(rep.conditional)},
        {"kirkwood", moments_json(rep.kirkwood)},
        {"sup_error_conditional", rep.sup_error_conditional},
        {"sup_error_kirkwood", rep.sup_error_kirkwood},
        {"monte_carlo_stderr", rep.monte_carlo_stderr},
        {"rho_error_conditional", rep.rho_error_conditional},
        {"rho_error_kirkwood", rep.rho_error_kirkwood},
        {"rho_stderr", rep.rho_stderr},
        {"normalization_error", rep.normalization_error},
        {"conditional_consensus", rep.conditional_consensus},
        {"kirkwood_consensus", rep.kirkwood_consensus}};
    ctx.write_json("report.json", report);
    io::CsvWriter csv({"t", "component", "mean", "stderr", "conditional", "kirkwood", "error_conditional",
                       "error_kirkwood"});
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
      const auto mean = rep.mean[k].to_array(), c = rep.conditional[k].to_array(), q = rep.kirkwood[k].to_array();
      for (int j = 0; j < 6; ++j)
        csv.cell(rep.t[k])
            .cell(std::string_view(kMomentColumns[j]))
            .cell(mean[j])
            .cell(rep.standard_error[k][j])
            .cell(c[j])
            .cell(q[j])
            .cell(rep.error_conditional[k][j])
            .cell(rep.error_kirkwood[k][j])
            .end_row();
    }
    ctx.write("errors.csv", csv.text());
    ctx.results = {{"sup_error_conditional", rep.sup_error_conditional},
                   {"sup_error_kirkwood", rep.sup_error_kirkwood},
                   {"monte_carlo_stderr", rep.monte_carlo_stderr}};
  }

 private:
  MinimalParams p_;
  RandomMinimalInit init_;
  ComparisonOptions opts_;
};

// -------------------------------------------------------- epsilon-sweep

class EpsilonSweepJob : public Job {
 public:
  explicit EpsilonSweepJob(Reader& r) {
    spec_ = parse_model(r);
    n_ = r.integer("N", 20, 2);
    eps_ = r.numbers("eps", std::vector<double>{0.1, 0.01, 0.001});
    for (double e : eps_)
      if (!(e > 0.0)) r.fail("eps", "values must be positive");
    dt_ = r.positive("dt", 1e-4);
    T_ = r.nonnegative("T", 1.0);
    offset_ = r.number("weight_offset", 0.5);
    init_.parse(r, n_, spec_.model.m, false);
    if (dt_ >= *std::min_element(eps_.begin(), eps_.end()))
      warnings.push_back("dt is not below the smallest eps; the stiff weight dynamics may be unresolved");
  }

  std::vector<std::string> outputs() const override { return {"gaps.csv"}; }

  void run(RunContext& ctx) const override {
    Rng rng = make_stream(seed, 0);
    auto cfg = AgentConfiguration::zeros(n_, spec_.model.m, spec_.model.symmetric_V);
    cfg.states = init_.sample_states(n_, spec_.model.m, rng);
    const auto sweep = run_epsilon_sweep(spec_.model, cfg, eps_, dt_, T_, offset_);
    io::CsvWriter csv({"eps", "gap"});
    for (const auto& g : sweep.gaps) csv.row({g.eps, g.gap});
    ctx.write("gaps.csv", csv.text());
    ctx.results = {{"strictly_decreasing", sweep.strictly_decreasing}, {"non_increasing", sweep.non_increasing}};
  }

 private:
  ModelSpec spec_;
  std::size_t n_ = 0;
  std::vector<double> eps_;
  double dt_ = 1e-4, T_ = 1.0, offset_ = 0.5;
  ContinuousInit init_;
};

std::shared_ptr<Job> make_job(const std::string& kind, Reader& r) {
  if (kind == "micro") return std::make_shared<MicroJob>(r, false);
  if (kind == "diffusive") return std::make_shared<MicroJob>(r, true);
  if (kind == "minimal") return std::make_shared<JumpJob>(r, false);
  if (kind == "voter") return std::make_shared<JumpJob>(r, true);
  if (kind == "hybrid-bc") return std::make_shared<HybridJob>(r);
  if (kind == "closure") return std::make_shared<ClosureJob>(r);
  if (kind == "stationary") return std::make_shared<StationaryJob>(r);
  if (kind == "continuation") return std::make_shared<ContinuationJob>(r);
  if (kind == "characteristics") return std::make_shared<CharacteristicsJob>(r);
  if (kind == "compare") return std::make_shared<CompareJob>(r);
  return std::make_shared<EpsilonSweepJob>(r);
}

std::string kind_of(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object", "");
  if (!j.contains("kind")) throw ConfigError("kind is required", "kind");
  if (!j.at("kind").is_string()) throw ConfigError("kind must be a string", "kind");
  const auto kind = j.at("kind").get<std::string>();
  for (const char* k : kKinds)
    if (kind == k) return kind;
  std::string list;
  for (const char* k : kKinds) list += list.empty() ? k : std::string(", ") + k;
  throw ConfigError("kind must be one of: " + list, "kind");
}

// Sets a dotted path, creating intermediate objects.
void set_path(json& j, const std::string& path, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("malformed sweep key '" + path + "'", "sweep.key");
    if (!node->is_object()) throw ConfigError("sweep key '" + path + "' crosses a non-object", "sweep.key");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string config_hash(const json& j) { return io::hex64(io::fnv1a64(j.dump())); }

}  // namespace

Experiment Experiment::parse(const json& input) {
  // a manifest carries its resolved config
  const json& j = input.is_object() && input.contains("tool") && input.contains("config") ? input.at("config") : input;
  const std::string kind = kind_of(j);
  Experiment e;
  Reader r(j, "");
  r.text("kind");
  const std::uint64_t seed = r.integer("seed", 0);
  e.workers_ = r.integer("workers", 1, 1);
  if (const json* out = r.get("output")) {
    if (!out->is_string()) r.fail("output", "must be a string");
    e.output_ = out->get<std::string>();
  }

  if (const json* sw = r.get("sweep")) {
    Reader s(*sw, "sweep");
    e.sweep_key_ = s.text("key");
    const json values = s.raw("values");
    if (!values.is_array() || values.empty()) s.fail("values", "must be a nonempty array");
    s.finish();
    for (const char* reserved : {"kind", "seed", "sweep", "output", "workers"})
      if (e.sweep_key_ == reserved) s.fail("key", std::string("cannot sweep '") + reserved + "'");
    json base = j;
    base.erase("sweep");
    base.erase("output");
    base.erase("workers");
    for (const auto& v : values) {
      json child = base;
      set_path(child, e.sweep_key_, v);
      e.sweep_values_.push_back(v);
      e.children_.push_back(parse(child));
    }
    e.resolved_ = base;
    e.resolved_["seed"] = seed;
    e.resolved_["sweep"] = {{"key", e.sweep_key_}, {"values", values}};
    return e;
  }

  auto job = make_job(kind, r);
  job->seed = seed;
  r.finish();
  e.resolved_ = r.out();
  e.resolved_.erase("workers");
  e.job_ = std::move(job);
  return e;
}

Experiment Experiment::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("cannot parse ") + path.string() + ": " + ex.what(), "");
  }
  return parse(j);
}

const std::string& Experiment::kind() const { return resolved_.at("kind").get_ref<const std::string&>(); }

const json& Experiment::resolved() const { return resolved_; }

json Experiment::plan() const {
  json p = {{"kind", kind()}, {"config_hash", config_hash(resolved_)}};
  json summary = json::array(), warnings = json::array();
  if (!children_.empty()) {
    summary.push_back("sweep over " + sweep_key_ + " with " + std::to_string(children_.size()) + " values");
    for (std::size_t k = 0; k < children_.size(); ++k) {
      const json cp = children_[k].plan();
      summary.push_back("  " + sweep_key_ + " = " + sweep_values_[k].dump() + " -> sweep-" +
                        std::to_string(k));
      for (const auto& w : cp.at("warnings")) warnings.push_back(sweep_key_ + "=" + sweep_values_[k].dump() + ": " +
                                                                 w.get<std::string>());
    }
    p["runs"] = children_.size();
  } else {
    for (const auto& [key, value] : resolved_.items()) summary.push_back(key + " = " + value.dump());
    std::string outs;
    for (const auto& o : job_->outputs()) outs += (outs.empty() ? "" : ", ") + o;
    summary.push_back("outputs: " + outs + ", manifest.json");
    for (const auto& w : job_->warnings) warnings.push_back(w);
    p["runs"] = 1;
  }
  p["summary"] = summary;
  p["warnings"] = warnings;
  return p;
}

fs::path Experiment::output_dir(const RunOptions& opts) const {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (!output_.empty()) return output_;
  if (const char* env = std::getenv("COEVO_OUT_DIR"); env && *env) return env;
  return "coevo-out";
}

json Experiment::run(const RunOptions& opts) const {
  const fs::path dir = output_dir(opts);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message(), "output");
  const std::size_t workers = opts.workers.value_or(workers_);
  const auto t0 = std::chrono::steady_clock::now();
  json manifest = {{"tool", "coevo"},
                   {"version", tool_version()},
                   {"kind", kind()},
                   {"config", resolved_},
                   {"config_hash", config_hash(resolved_)},
                   {"seed", resolved_.at("seed")},
                   {"workers", workers},
                   {"started_utc", utc_now()}};
  if (!children_.empty()) {
    json runs = json::array();
    for (std::size_t k = 0; k < children_.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "sweep-%03zu", k);
      const json child = children_[k].run({dir / name, workers});
      runs.push_back({{"directory", name},
                      {"value", sweep_values_[k]},
                      {"config_hash", child.at("config_hash")},
                      {"files", child.at("files")}});
    }
    manifest["sweep"] = {{"key", sweep_key_}, {"runs", runs}};
    manifest["files"] = json::array();
    manifest["warnings"] = plan().at("warnings");
  } else {
    RunContext ctx;
    ctx.dir = dir;
    ctx.workers = workers;
    ctx.warnings = job_->warnings;
    job_->run(ctx);
    manifest["files"] = ctx.files;
    manifest["results"] = ctx.results;
    manifest["warnings"] = ctx.warnings;
  }
  manifest["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::config:
      return 2;
    case ErrorCode::invariant:
      return 4;
    default:
      return 3;
  }
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::config: return "config";
    case ErrorCode::model: return "model";
    case ErrorCode::invariant: return "invariant";
    case ErrorCode::nullcline_not_found: return "nullcline_not_found";
    case ErrorCode::consensus_boundary: return "consensus_boundary";
    case ErrorCode::closure_singular: return "closure_singular";
    case ErrorCode::continuation_failed: return "continuation_failed";
    case ErrorCode::integration: return "integration";
  }
  return "unknown";
}

json error_json(ErrorCode code, const std::string& message, const std::string& field) {
  json e = {{"code", to_string(code)}, {"message", message}, {"exit_code", exit_code(code)}};
  e["field"] = field.empty() ? json(nullptr) : json(field);
  return {{"error", e}};
}

}  // namespace coevo
