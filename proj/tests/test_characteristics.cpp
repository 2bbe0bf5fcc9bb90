#include <doctest.h>

#include <cmath>

#include "characteristics.hpp"
#include "rng.hpp"

using namespace coevo;

namespace {

SmoothModel pull_together() {
  return kernel_relaxation([](double x) { return x; }, [](double) { return 0.0; }, 0.0);
}

CharacteristicEnsemble two_anchors() {
  auto e = CharacteristicEnsemble::uniform(2, 1);
  e.anchors = {0.0, 2.0};
  e.w(0, 1) = e.w(1, 0) = 1.0;
  return e;
}

CharacteristicEnsemble random_ensemble(std::size_t M, std::uint64_t seed, bool random_masses) {
  Rng rng = make_stream(seed, 0);
  auto e = CharacteristicEnsemble::uniform(M, 1);
  for (auto& s : e.anchors) s = 2.0 * uniform01(rng) - 1.0;
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = i + 1; j < M; ++j) e.w(i, j) = e.w(j, i) = uniform01(rng);
  if (random_masses) {
    double total = 0.0;
    for (auto& x : e.masses) total += (x = 0.5 + uniform01(rng));
    for (auto& x : e.masses) x /= total;
  }
  return e;
}

}  // namespace

TEST_CASE("two characteristics relax exponentially") {
  const auto run = integrate_characteristics_conditional(two_anchors(), pull_together(), {.dt = 1e-3, .T = 1.0});
  const auto& last = run.snapshots.back();
  CHECK(last.t == doctest::Approx(1.0));
  CHECK(last.anchors[0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
  CHECK(last.anchors[1] == doctest::Approx(1.0 + std::exp(-1.0)).epsilon(1e-10));
  CHECK(last.w(0, 1) == 1.0);

  auto e = two_anchors();
  auto model = pull_together();
  std::vector<double> out(1);
  model.U(e.anchor(0), e.anchor(1), 1.0, out);
  CHECK(e.masses[1] * out[0] == 1.0);
}

TEST_CASE("frozen anchors without state drift") {
  SmoothModel model;
  model.U = [](ConstVec, ConstVec, double, MutVec out) { out[0] = 0.0; };
  model.V = [](ConstVec, ConstVec, double w) { return -w; };
  model.symmetric_V = true;
  auto e = CharacteristicEnsemble::uniform(2, 1);
  e.anchors = {0.3, -0.4};
  e.w(0, 1) = e.w(1, 0) = 3.0;
  const auto run = integrate_characteristics_conditional(e, model, {.dt = 1e-3, .T = 2.0});
  const auto& last = run.snapshots.back();
  CHECK(last.anchors[0] == 0.3);
  CHECK(last.anchors[1] == -0.4);
  CHECK(last.w(0, 1) == doctest::Approx(3.0 * std::exp(-2.0)).epsilon(1e-10));
  CHECK(last.w(1, 0) == last.w(0, 1));
}

TEST_CASE("consensus data is a fixed point") {
  const auto model = kernel_relaxation([](double x) { return std::sin(x); }, [](double) { return 0.7; }, 0.7);
  auto e = CharacteristicEnsemble::uniform(5, 1);
  e.anchors.assign(5, 0.25);
  const auto run = integrate_characteristics_wc(e, model, [](ConstVec, ConstVec) { return 1.0; },
                                                {.dt = 1e-2, .T = 3.0});
  for (const auto& s : run.snapshots) {
    for (double x : s.anchors) CHECK(x == 0.25);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(s.w(i, j) == (i == j ? 0.0 : 1.0));
  }
  CHECK(std::isinf(run.min_distance.front()));
}

TEST_CASE("weight concentration is a special solution") {
  const auto model = kernel_relaxation([](double x) { return std::tanh(x); },
                                       [](double x) { return std::exp(-x * x); }, 0.5);
  const WeightProfile W0 = [](ConstVec s, ConstVec sigma) { return std::exp(-(s[0] - sigma[0]) * (s[0] - sigma[0])); };
  auto e = random_ensemble(20, 3, true);
  const CharacteristicOptions opts{.dt = 1e-2, .T = 2.0, .record_every = 10};
  const auto wc = integrate_characteristics_wc(e, model, W0, opts);
  for (std::size_t i = 0; i < e.M; ++i)
    for (std::size_t j = 0; j < e.M; ++j) e.w(i, j) = i == j ? 0.0 : W0(e.anchor(i), e.anchor(j));
  const auto cond = integrate_characteristics_conditional(e, model, opts);
  REQUIRE(wc.snapshots.size() == cond.snapshots.size());
  for (std::size_t k = 0; k < wc.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < e.anchors.size(); ++i)
      CHECK(std::abs(wc.snapshots[k].anchors[i] - cond.snapshots[k].anchors[i]) <= 1e-12);
    for (std::size_t i = 0; i < e.pair_weights.size(); ++i)
      CHECK(std::abs(wc.snapshots[k].pair_weights[i] - cond.snapshots[k].pair_weights[i]) <= 1e-12);
  }
}

TEST_CASE("antisymmetric drift conserves the mass-weighted mean") {
  const auto model = kernel_relaxation([](double x) { return x * x * x + x; },
                                       [](double x) { return 1.0 / (1.0 + x * x); }, 1.0);
  const auto e = random_ensemble(24, 4, true);
  const auto run = integrate_characteristics_conditional(e, model, {.dt = 1e-2, .T = 2.0});
  const SingleObservable id = [](ConstVec s) { return s[0]; };
  const double mean0 = pushforward(e, id);
  for (const auto& s : run.snapshots) CHECK(std::abs(pushforward(s, id) - mean0) <= 1e-10);
  // symmetric V with symmetric data stays bitwise symmetric
  const auto& last = run.snapshots.back();
  for (std::size_t i = 0; i < last.M; ++i)
    for (std::size_t j = 0; j < last.M; ++j) CHECK(last.w(i, j) == last.w(j, i));
}

TEST_CASE("pushforward conventions") {
  auto e = two_anchors();
  const SingleObservable one = [](ConstVec) { return 1.0; };
  const PairObservable pair_one = [](ConstVec, ConstVec, double) { return 1.0; };
  CHECK(pushforward(e, one) == 1.0);
  CHECK(pushforward(e, [](ConstVec s) { return s[0]; }) == 1.0);
  CHECK(pushforward_pair(e, pair_one, false) == 0.5);
  CHECK(pushforward_pair(e, pair_one) == 1.0);
  CHECK(pair_normalization(e) == 0.5);
  e.w(0, 1) = e.w(1, 0) = 3.0;
  const PairObservable weight = [](ConstVec, ConstVec, double w) { return w; };
  CHECK(pushforward_pair(e, weight) == doctest::Approx(3.0 * (2.0 * 0.25) / 0.5));
}

TEST_CASE("constant potential has no dissipation") {
  PotentialModel pot;
  pot.F = [](ConstVec, ConstVec, double) { return 2.5; };
  pot.grad_s = [](ConstVec, ConstVec, double, MutVec out) { out[0] = 0.0; };
  pot.dF_dw = [](ConstVec, ConstVec, double) { return 0.0; };
  const auto pe = pair_energy_dissipation(random_ensemble(8, 5, true), pot);
  CHECK(pe.energy == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(pe.dissipation == 0.0);
}

TEST_CASE("pair energy identity along characteristics") {
  const auto pot = quadratic_potential(1.0, 0.7);
  const auto model = derive_forces(pot);
  const auto e = random_ensemble(16, 6, true);
  const double dt = 1e-4;
  const auto run = integrate_characteristics_conditional(e, model, {.dt = dt, .T = 0.5, .record_every = 100});
  std::vector<PairEnergy> pe;
  for (const auto& s : run.snapshots) pe.push_back(pair_energy_dissipation(s, pot));
  for (std::size_t k = 1; k < pe.size(); ++k) CHECK(pe[k].energy <= pe[k - 1].energy + 1e-9);

  // central differences on a fine sub-run around a few times
  for (double t0 : {0.0, 0.1, 0.3}) {
    const auto start = integrate_characteristics_conditional(e, model, {.dt = dt, .T = t0}).snapshots.back();
    const auto fine = integrate_characteristics_conditional(start, model, {.dt = dt, .T = 2 * dt});
    const double dE = (pair_energy_dissipation(fine.snapshots[2], pot).energy -
                       pair_energy_dissipation(fine.snapshots[0], pot).energy) /
                      (2 * dt);
    const double D = pair_energy_dissipation(fine.snapshots[1], pot).dissipation;
    CHECK(std::abs(dE + D) / std::abs(D) <= 1e-3);
  }
}

TEST_CASE("critical point is stationary") {
  const auto pot = quadratic_potential(1.0, 1.0);
  auto e = CharacteristicEnsemble::uniform(4, 1);
  e.anchors.assign(4, 0.5);
  const auto pe = pair_energy_dissipation(e, pot);
  CHECK(pe.dissipation == 0.0);
  const auto run = integrate_characteristics_conditional(e, derive_forces(pot), {.dt = 1e-2, .T = 1.0});
  for (double x : run.snapshots.back().anchors) CHECK(x == 0.5);
  for (double w : run.snapshots.back().pair_weights) CHECK(w == 0.0);
}

TEST_CASE("anchor collision aborts") {
  SmoothModel model;
  model.U = [](ConstVec s, ConstVec, double, MutVec out) { out[0] = -s[0] / std::max(std::abs(s[0]), 1e-3); };
  model.V = [](ConstVec, ConstVec, double) { return 0.0; };
  auto e = CharacteristicEnsemble::uniform(2, 1);
  e.anchors = {-0.5, 0.5};
  CHECK_THROWS_AS(integrate_characteristics_conditional(e, model, {.dt = 1e-2, .T = 2.0, .collision_distance = 1e-2}),
                  InvariantViolation);
}

TEST_CASE("refinement shrinks the sampling error") {
  const auto model = kernel_relaxation([](double x) { return std::tanh(x); },
                                       [](double x) { return std::exp(-x * x); }, 1.0);
  const WeightProfile W0 = [](ConstVec, ConstVec) { return 0.5; };
  const SingleObservable obs = [](ConstVec s) { return std::cos(s[0]); };
  const std::size_t sizes[] = {64, 128, 256, 512};
  double err[4] = {0, 0, 0, 0};
  const int seeds = 6;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto full = random_ensemble(1024, 100 + seed, false);
    auto value = [&](std::size_t M) {
      auto e = CharacteristicEnsemble::uniform(M, 1);
      std::copy(full.anchors.begin(), full.anchors.begin() + static_cast<std::ptrdiff_t>(M), e.anchors.begin());
      const auto run = integrate_characteristics_wc(e, model, W0, {.dt = 0.1, .T = 0.5});
      return pushforward(run.snapshots.back(), obs);
    };
    const double reference = value(1024);
    for (int k = 0; k < 4; ++k) err[k] += std::pow(value(sizes[k]) - reference, 2) / seeds;
  }
  for (double& x : err) x = std::sqrt(x);
  CHECK(err[3] < err[0]);
  CHECK(err[3] < err[1]);
  CHECK(err[2] < err[0]);
}
