// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <unistd.h>

#include "characteristics.hpp"
#include "closures.hpp"
#include "compare.hpp"
#include "experiment.hpp"
#include "io.hpp"

using namespace coevo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MinimalParams unit_rates(double gamma_pm) {
  MinimalParams p;
  p.alpha_pm = p.alpha_mp = 1.0;
  p.beta_pp = p.beta_mm = p.gamma_pp = p.gamma_mm = 1.0;
  p.gamma_pm = gamma_pm;
  return p;
}

MinimalParams random_params(Rng& rng, double scale = 2.0) {
  MinimalParams p;
  for (double* r : {&p.alpha_pm, &p.alpha_mp, &p.beta_pp, &p.beta_mm, &p.beta_pm, &p.gamma_pp, &p.gamma_mm,
                    &p.gamma_pm})
    *r = scale * uniform01(rng);
  return p;
}

MinimalMoments random_moments(Rng& rng) {
  std::array<double, 6> a;
  for (double& x : a) x = 0.02 + uniform01(rng);
  const double norm = a[0] + a[1] + a[2] + a[3] + 2.0 * (a[4] + a[5]);
  for (double& x : a) x /= norm;
  return MinimalMoments::from_array(a);
}

double sup(const std::array<double, 6>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

constexpr ClosureKind kKinds[] = {ClosureKind::conditional, ClosureKind::kirkwood};

// 1
Outcome closure_conservation() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_stream(101, 0);
  double norm_drift = 0.0, rho_drift = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MinimalParams p = random_params(rng);
    const bool equal = trial % 2 == 0;
    if (equal) p.alpha_mp = p.alpha_pm;
    const auto m0 = random_moments(rng);
    for (auto kind : kKinds) {
      const auto traj = integrate_closure(m0, p, kind, {.dt = 1e-3, .T = 50.0});
      for (const auto& m : traj.moments) {
        norm_drift = std::max(norm_drift, std::abs(m.rho_p() + m.rho_m() - 1.0));
        if (equal) rho_drift = std::max(rho_drift, std::abs(m.rho_p() - m0.rho_p()));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {norm_drift <= 1e-10 && rho_drift <= 1e-10 && secs < 10.0,
          fmt("sup|rho+ + rho- - 1| = %.2e, equal-alpha sup|rho+ drift| = %.2e, %.1f s", norm_drift, rho_drift, secs)};
}

// 2
Outcome stationary_family() {
  Rng rng = make_stream(102, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    MinimalParams p = random_params(rng);
    p.beta_pm = 0.0;
    p.beta_pp += 0.05;
    p.beta_mm += 0.05;
    const double rho = uniform01(rng);
    const double g = uniform01(rng) * std::min(rho, 1.0 - rho);
    const auto m = stationary_polarized(p, rho, g);
    if (m.rho_p() * m.rho_m() <= kConsensusDelta) continue;
    for (auto kind : kKinds) worst = std::max(worst, sup(closure_rhs(m, p, kind)));
  }
  return {worst <= 1e-13, fmt("max ||rhs||_inf = %.2e over 100 points x 2 closures", worst)};
}

// 3
Outcome mixed_h() {
  Rng rng = make_stream(103, 0);
  double worst = 0.0;
  bool exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    MinimalParams p = random_params(rng);
    p.alpha_pm = 0.1 + 2.9 * uniform01(rng);
    p.alpha_mp = trial % 4 == 0 ? p.alpha_pm : 0.1 + 2.9 * uniform01(rng);
    const double rho = 0.01 + 0.98 * uniform01(rng);
    const auto h = stationary_mixed_h(p, rho);
    const double f_pm = uniform01(rng) * h.h_pm;
    const auto d = weight_averaged_rhs(h, f_pm, rho, p, ClosureKind::conditional);
    worst = std::max({worst, std::abs(d.h_pp), std::abs(d.h_mm), std::abs(d.h_pm)});
    if (p.alpha_pm == p.alpha_mp)
      exact = exact && h.h_pp == rho * rho && h.h_mm == (1 - rho) * (1 - rho) && h.h_pm == rho * (1 - rho);
  }
  return {worst <= 1e-13 && exact,
          fmt("max |dh| = %.2e, equal-alpha values exact: ", worst) + (exact ? "yes" : "no")};
}

// 4
Outcome gronwall() {
  Rng rng = make_stream(104, 0);
  double worst = 0.0;
  bool holds = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto m0 = random_moments(rng);
    MinimalParams p = unit_rates(2.0);
    p.beta_pp = 0.1 + uniform01(rng);
    p.beta_mm = 0.1 + uniform01(rng);
    p.gamma_pp = 0.1 + uniform01(rng);
    p.gamma_mm = 0.1 + uniform01(rng);
    p.beta_pm = 0.0;
    for (auto kind : kKinds) {
      p.gamma_pm = kind == ClosureKind::conditional ? 2.0 : 3.0;
      const auto traj = integrate_closure(m0, p, kind, {.dt = 1e-3, .T = 20.0, .record_every = 10});
      const auto rep = decay_envelope_check(traj, p, kind);
      holds = holds && rep.holds && rep.rate == 1.0;
      worst = std::max(worst, rep.worst_ratio);
    }
  }
  return {holds, fmt("max f+-(t) / (e^-t f+-(0)) = %.6f over 10 starts x 2 closures", worst)};
}

// 5
Outcome jacobian() {
  Rng rng = make_stream(105, 0);
  double worst = 0.0;
  int min_zeros = 6;
  for (int trial = 0; trial < 20; ++trial) {
    MinimalParams p = random_params(rng);
    p.beta_pm = 0.0;
    p.beta_pp += 0.1;
    p.beta_mm += 0.1;
    const double rho = 0.1 + 0.8 * uniform01(rng);
    const auto s = stationary_polarized(p, rho, uniform01(rng) * std::min(rho, 1.0 - rho));
    for (auto kind : kKinds) {
      const auto lin = linearized_jacobian(p, s, kind);
      worst = std::max(worst, (lin.jacobian - numerical_jacobian(s, p, kind)).cwiseAbs().maxCoeff());
      int zeros = 0;
      for (const auto& ev : lin.eigenvalues) zeros += std::abs(ev) <= 1e-8;
      min_zeros = std::min(min_zeros, zeros);
    }
  }
  return {worst <= 1e-6 && min_zeros >= 3,
          fmt("max |J - J_fd| = %.2e, min zero eigenvalues = %.0f", worst, min_zeros)};
}

// 6
Outcome continuation() {
  const auto t0 = std::chrono::steady_clock::now();
  const double eps[] = {1e-2, 1e-3, 1e-4};
  double slope[3], resid = 0.0;
  bool positive = true;
  for (int k = 0; k < 3; ++k) {
    MinimalParams p = unit_rates(2.0);
    p.beta_pm = eps[k];
    const auto b = continue_small_epsilon(p, 0.5, ClosureKind::conditional);
    resid = std::max(resid, b.residual);
    positive = positive && b.moments.f_pm > 0.0;
    slope[k] = b.moments.f_pm / eps[k];
  }
  double spread = 0.0;
  for (double s : slope) spread = std::max(spread, std::abs(s - slope[2]) / slope[2]);
  const double secs = seconds_since(t0);
  return {resid <= 1e-10 && positive && spread <= 0.1 && secs < 5.0,
          fmt("residual %.2e, f+-/eps within %.2f%% of eps=1e-4 value (%.6f)", resid, 100 * spread, slope[2]) +
              fmt(", %.2f s", secs)};
}

// 7
Outcome micro_dissipation() {
  const auto pot = catalog_potential("quadratic-potential", json{{"kappa", 1.0}});
  const auto model = derive_forces(pot);
  Rng rng = make_stream(107, 0);
  auto cfg = AgentConfiguration::zeros(50, 1);
  for (auto& s : cfg.states) s = uniform01(rng) - 0.5;
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = i + 1; j < 50; ++j) cfg.set_weight(i, j, uniform01(rng));
  const double dt = 1e-4;
  std::vector<double> E, D;
  integrate_micro(cfg, model, {.dt = dt, .T = 1.0}, [&](const AgentConfiguration& c) {
    const auto r = energy_report(c, pot);
    E.push_back(r.energy);
    D.push_back(r.dissipation);
  });
  double worst = 0.0;
  bool monotone = true;
  for (std::size_t k = 1; k + 1 < E.size(); ++k)
    worst = std::max(worst, std::abs((E[k + 1] - E[k - 1]) / (2 * dt) + D[k]) / D[k]);
  for (std::size_t k = 1; k < E.size(); ++k) monotone = monotone && E[k] <= E[k - 1];
  return {worst <= 1e-3 && monotone,
          fmt("max relative |dE/dt + D| / D = %.2e over %.0f samples, E non-increasing: ", worst,
              static_cast<double>(E.size() - 2)) +
              (monotone ? "yes" : "no")};
}

// 8
Outcome pair_dissipation() {
  const auto pot = quadratic_potential(1.0, 0.7);
  const auto model = derive_forces(pot);
  Rng rng = make_stream(108, 0);
  auto e = CharacteristicEnsemble::uniform(16, 1);
  for (auto& s : e.anchors) s = 2.0 * uniform01(rng) - 1.0;
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = i + 1; j < 16; ++j) e.w(i, j) = e.w(j, i) = uniform01(rng);
  double total = 0.0;
  for (auto& x : e.masses) total += (x = 0.5 + uniform01(rng));
  for (auto& x : e.masses) x /= total;
  const double dt = 1e-4;
  const auto run = integrate_characteristics_conditional(e, model, {.dt = dt, .T = 1.0});
  std::vector<PairEnergy> pe;
  for (const auto& s : run.snapshots) pe.push_back(pair_energy_dissipation(s, pot));
  double worst = 0.0;
  bool monotone = true;
  for (std::size_t k = 1; k + 1 < pe.size(); ++k) {
    const double dE = (pe[k + 1].energy - pe[k - 1].energy) / (2 * dt);
    worst = std::max(worst, std::abs(dE + pe[k].dissipation) / pe[k].dissipation);
    monotone = monotone && pe[k].energy <= pe[k - 1].energy;
  }
  return {worst <= 1e-3 && monotone,
          fmt("max relative |dE/dt + D| / D = %.2e over %.0f samples (M = 16)", worst,
              static_cast<double>(pe.size() - 2))};
}

// 9
Outcome wc_embedding() {
  const auto model = kernel_relaxation([](double x) { return std::tanh(x); },
                                       [](double x) { return std::exp(-x * x); }, 0.5);
  const WeightProfile W0 = [](ConstVec s, ConstVec sigma) { return std::exp(-(s[0] - sigma[0]) * (s[0] - sigma[0])); };
  Rng rng = make_stream(109, 0);
  auto e = CharacteristicEnsemble::uniform(20, 1);
  for (auto& s : e.anchors) s = 2.0 * uniform01(rng) - 1.0;
  const CharacteristicOptions opts{.dt = 1e-2, .T = 5.0};
  const auto wc = integrate_characteristics_wc(e, model, W0, opts);
  for (std::size_t i = 0; i < e.M; ++i)
    for (std::size_t j = 0; j < e.M; ++j) e.w(i, j) = i == j ? 0.0 : W0(e.anchor(i), e.anchor(j));
  const auto cond = integrate_characteristics_conditional(e, model, opts);
  double worst = 0.0;
  for (std::size_t k = 0; k < wc.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < e.anchors.size(); ++i)
      worst = std::max(worst, std::abs(wc.snapshots[k].anchors[i] - cond.snapshots[k].anchors[i]));
    for (std::size_t i = 0; i < e.pair_weights.size(); ++i)
      worst = std::max(worst, std::abs(wc.snapshots[k].pair_weights[i] - cond.snapshots[k].pair_weights[i]));
  }
  return {wc.snapshots.size() == cond.snapshots.size() && worst <= 1e-12,
          fmt("sup-norm gap %.2e over T = 5", worst)};
}

// 10
Outcome epsilon_sweep() {
  const auto model = catalog("kernel-relaxation",
                             json{{"K", {{"type", "identity"}}}, {"eta", {{"type", "gaussian"}}}, {"kappa", 1.0}});
  auto cfg = AgentConfiguration::zeros(5, 1);
  cfg.states = {-1.0, -0.3, 0.1, 0.6, 1.4};
  const auto sweep = run_epsilon_sweep(model, cfg, {0.1, 0.01, 0.001}, 1e-4, 1.0, 0.5);
  return {sweep.strictly_decreasing, fmt("gaps %.3e, %.3e, %.3e", sweep.gaps[0].gap, sweep.gaps[1].gap,
                                         sweep.gaps[2].gap)};
}

// 11
Outcome micro_macro_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  MinimalParams p;
  p.alpha_pm = p.alpha_mp = 1.0;
  p.beta_pp = p.beta_mm = 0.5;
  p.beta_pm = 0.2;
  p.gamma_pp = p.gamma_mm = 0.3;
  p.gamma_pm = 1.0;
  const RandomMinimalInit init{0.5, 0.1, 0.1, 0.1};
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<ComparisonReport> reps;
  for (std::size_t n : {250, 500, 1000, 2000})
    reps.push_back(run_comparison(
        p, init, {.n = n, .runs = 20, .T = 1.0, .dt = 0.1, .seed = 1, .workers = workers}));
  bool trend = true, conserved = true;
  std::string detail = "sup err";
  for (std::size_t k = 0; k < reps.size(); ++k) {
    detail += fmt(" %.2e", reps[k].sup_error_conditional);
    if (k > 0) {
      const double slack = 2.0 * std::max(reps[k].monte_carlo_stderr, reps[k - 1].monte_carlo_stderr);
      trend = trend && reps[k].sup_error_conditional <= reps[k - 1].sup_error_conditional + slack;
    }
    conserved = conserved && reps[k].normalization_error <= 1e-12 &&
                reps[k].rho_error_conditional <= 3.0 * reps[k].rho_stderr;
  }
  const double secs = seconds_since(t0);
  detail += std::string(", conservation ") + (conserved ? "ok" : "violated") + fmt(", %.1f s", secs);
  return {trend && conserved && secs < 300.0, detail};
}

// 12
Outcome symmetry() {
  const auto model = catalog("kernel-relaxation",
                             json{{"K", {{"type", "tanh"}}}, {"eta", {{"type", "gaussian"}, {"b", 2.0}}}, {"kappa", 0.7}});
  const Integrator methods[] = {Integrator::rk4, Integrator::euler, Integrator::rkf45};
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng = make_stream(112, seed);
    auto cfg = AgentConfiguration::zeros(12, 1);
    for (auto& s : cfg.states) s = 2.0 * uniform01(rng) - 1.0;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = i + 1; j < 12; ++j) cfg.set_weight(i, j, uniform01(rng));
    integrate_micro(cfg, model, {.dt = 1e-2, .T = 1.0, .method = methods[seed % 3]},
                    [&](const AgentConfiguration& c) { worst = std::max(worst, c.max_asymmetry()); });
  }
  return {model.symmetric_V && worst == 0.0, fmt("max |w_ij - w_ji| = %.1e over 100 runs", worst)};
}

// 13
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("coevo-acceptance-" + std::to_string(::getpid()));
  const json kr = {{"name", "kernel-relaxation"},
                   {"params", {{"K", {{"type", "identity"}}}, {"eta", {{"type", "gaussian"}}}, {"kappa", 1.0}}}};
  const json qp = {{"name", "quadratic-potential"}, {"params", {{"kappa", 1.0}}}};
  const json rates = {{"alpha_pm", 1.0}, {"alpha_mp", 0.5}, {"beta_pp", 0.5}, {"beta_mm", 0.5},
                      {"gamma_pp", 0.3}, {"gamma_mm", 0.3}, {"gamma_pm", 2.0}};
  json with_bpm = rates;
  with_bpm["beta_pm"] = 0.2;
  json unit = {{"alpha_pm", 1.0}, {"alpha_mp", 1.0}, {"beta_pp", 1.0}, {"beta_mm", 1.0},
               {"gamma_pp", 1.0}, {"gamma_mm", 1.0}, {"gamma_pm", 2.0}};
  const std::vector<json> configs = {
      {{"kind", "micro"}, {"model", kr}, {"N", 6}, {"T", 0.2}, {"dt", 0.01}, {"seed", 7}},
      {{"kind", "diffusive"},
       {"model", {{"name", "boschi"}, {"params", {{"g", {{"type", "tanh"}}}, {"J0", 1}, {"gamma", 0.5}, {"sigma_noise", 0.3}}}}},
       {"N", 6}, {"T", 0.2}, {"dt", 0.01}, {"seed", 7}},
      {{"kind", "minimal"}, {"params", with_bpm}, {"N", 30}, {"T", 1.0}, {"seed", 7}},
      {{"kind", "voter"}, {"N", 30}, {"T", 1.0}, {"seed", 7}, {"p", 0.3}},
      {{"kind", "hybrid-bc"}, {"N", 10}, {"T", 0.5}, {"r", {{"type", "indicator"}, {"radius", 0.5}}}, {"seed", 7}},
      {{"kind", "closure"}, {"params", with_bpm}, {"T", 2.0}, {"init", {{"type", "random"}}}},
      {{"kind", "stationary"}, {"params", rates}, {"rho_p", {0.2, 0.5, 0.7}}, {"g_pm", 0.1}},
      {{"kind", "continuation"}, {"params", unit}, {"rho_p", 0.5}},
      {{"kind", "characteristics"}, {"model", qp}, {"M", 8}, {"T", 0.5}, {"seed", 7}},
      {{"kind", "compare"}, {"params", with_bpm}, {"N", 40}, {"runs", 4}, {"T", 0.5}, {"seed", 7}, {"workers", 3}},
      {{"kind", "epsilon-sweep"}, {"model", kr}, {"N", 5}, {"T", 0.2}, {"seed", 7}},
  };
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& cfg : configs) {
    const std::string kind = cfg.at("kind");
    const auto first = Experiment::parse(cfg).run({root / kind / "a", std::nullopt});
    // second run starts from the written manifest, single worker
    const auto again = Experiment::load(root / kind / "a" / "manifest.json");
    again.run({root / kind / "b", std::size_t{1}});
    for (const auto& f : first.at("files")) {
      const std::string name = f.at("name");
      ++files;
      if (io::read_file(root / kind / "a" / name) != io::read_file(root / kind / "b" / name))
        mismatch += " " + kind + "/" + name;
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return {mismatch.empty() && files > 0,
          fmt("%.0f artifacts across 11 kinds re-run from manifests", static_cast<double>(files)) +
              (mismatch.empty() ? ", all bit-identical" : ", differing:" + mismatch)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"closure conservation", closure_conservation},
      {"stationary family residual", stationary_family},
      {"mixed stationary h-residual", mixed_h},
      {"Gronwall envelopes", gronwall},
      {"Jacobian fidelity", jacobian},
      {"eps-continuation", continuation},
      {"micro gradient-flow dissipation", micro_dissipation},
      {"pair-level dissipation", pair_dissipation},
      {"weight-concentration embedding", wc_embedding},
      {"eps-sweep convergence", epsilon_sweep},
      {"micro/macro trend", micro_macro_trend},
      {"symmetry preservation", symmetry},
      {"determinism", determinism},
  };
  int failures = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %-32s %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/13 criteria passed\n", 13 - failures);
  return failures == 0 ? 0 : 1;
}
