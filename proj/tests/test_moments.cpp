#include <doctest.h>

#include <cmath>

#include "closures.hpp"
#include "moments.hpp"

using namespace coevo;

namespace {

DiscreteConfiguration random_discrete(std::size_t n, double rho_plus, double link, std::uint64_t seed) {
  Rng rng = make_stream(seed, 5);
  auto cfg = DiscreteConfiguration::empty(n);
  for (auto& s : cfg.states) s = uniform01(rng) < rho_plus ? 1 : -1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < link) cfg.set_link(i, j, true);
  return cfg;
}

MinimalMoments random_moments(Rng& rng) {
  std::array<double, 6> a;
  for (double& x : a) x = 0.05 + uniform01(rng);
  const double norm = a[0] + a[1] + a[2] + a[3] + 2.0 * (a[4] + a[5]);
  for (double& x : a) x /= norm;
  return MinimalMoments::from_array(a);
}

MinimalParams random_params(Rng& rng) {
  MinimalParams p;
  p.alpha_pm = 0.1 + 2.0 * uniform01(rng);
  p.alpha_mp = 0.1 + 2.0 * uniform01(rng);
  p.beta_pp = uniform01(rng);
  p.beta_mm = uniform01(rng);
  p.beta_pm = uniform01(rng);
  p.gamma_pp = uniform01(rng);
  p.gamma_mm = uniform01(rng);
  p.gamma_pm = uniform01(rng);
  return p;
}

}  // namespace

TEST_CASE("two agents split the pair mass") {
  auto cfg = DiscreteConfiguration::empty(2);
  cfg.states = {1, -1};
  cfg.set_link(0, 1, true);
  const auto h = empirical_pair(cfg);
  const auto d = DiscretePairMass::from_histogram(h);
  CHECK(d(1, -1, 1) == 0.5);
  CHECK(d(-1, 1, 1) == 0.5);
  double total = 0.0;
  for (double x : d.mass) total += x;
  CHECK(total == 1.0);
}

TEST_CASE("three agent enumeration") {
  auto cfg = DiscreteConfiguration::empty(3);
  cfg.states = {1, 1, -1};
  cfg.set_link(0, 1, true);
  cfg.set_link(1, 2, true);
  const auto m = minimal_moments(cfg);
  CHECK(m.f_pp == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(m.g_pp == 0.0);
  CHECK(m.f_mm == 0.0);
  CHECK(m.g_mm == 0.0);
  CHECK(m.f_pm == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(m.g_pm == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(m.rho_p() == doctest::Approx(2.0 / 3).epsilon(1e-15));

  const auto m1 = empirical_marginal1(cfg);
  CHECK(m1.mass(1) == doctest::Approx(2.0 / 3));
  CHECK(m1.mass(0) == doctest::Approx(1.0 / 3));

  const auto d = DiscretePairMass::from_histogram(empirical_pair(cfg));
  const auto e = DiscretePairMass::from_moments(m);
  for (std::size_t k = 0; k < 8; ++k) CHECK(d.mass[k] == doctest::Approx(e.mass[k]).epsilon(1e-15));
}

TEST_CASE("complete consensus and empty balanced graphs") {
  auto full = DiscreteConfiguration::empty(5);
  full.states.assign(5, 1);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) full.set_link(i, j, true);
  const auto m = minimal_moments(full);
  CHECK(m.f_pp == 1.0);
  CHECK(m.g_pp + m.f_mm + m.g_mm + m.f_pm + m.g_pm == 0.0);

  auto empty = DiscreteConfiguration::empty(4);
  empty.states = {1, 1, -1, -1};
  const auto e = minimal_moments(empty);
  CHECK(e.g_pp == doctest::Approx(2.0 / 12));
  CHECK(e.g_mm == doctest::Approx(2.0 / 12));
  CHECK(e.g_pm == doctest::Approx(4.0 / 12));
  CHECK(e.f_pp + e.f_mm + e.f_pm == 0.0);
}

TEST_CASE("equal states fill one bin") {
  auto cfg = AgentConfiguration::zeros(2, 1);
  cfg.states = {0.3, 0.3};
  const auto h = empirical_marginal1(cfg, uniform_edges(0.0, 1.0, 4));
  CHECK(h.mass(1) == 1.0);
  CHECK(h.overflow == 0.0);
}

TEST_CASE("pair margins reproduce the single-particle histogram exactly") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto cfg = random_discrete(17, 0.4, 0.3, seed);
    const auto pair = empirical_pair(cfg);
    const auto single = empirical_marginal1(cfg);
    const auto a = first_marginal(pair), b = second_marginal(pair);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(a.mass(k) == single.mass(k));
      CHECK(b.mass(k) == single.mass(k));
    }
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t w = 0; w < 2; ++w) CHECK(pair.raw[pair.index(x, y, w)] == pair.raw[pair.index(y, x, w)]);
    CHECK(std::abs(minimal_moments(cfg).normalization() - 1.0) <= 1e-15);
  }
}

TEST_CASE("continuous pair margins and overflow") {
  Rng rng = make_stream(3, 0);
  auto cfg = AgentConfiguration::zeros(30, 1);
  for (auto& s : cfg.states) s = uniform01(rng);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = i + 1; j < 30; ++j) cfg.set_weight(i, j, uniform01(rng));
  const auto edges = uniform_edges(0.0, 1.0, 5);
  auto pair = empirical_pair(cfg, edges, uniform_edges(0.0, 1.0, 3));
  auto single = empirical_marginal1(cfg, edges);
  const auto a = first_marginal(pair);
  for (std::size_t k = 0; k < 5; ++k) CHECK(a.mass(k) == single.mass(k));

  cfg.states[0] = 2.0;  // outside the bins
  pair = empirical_pair(cfg, edges, uniform_edges(0.0, 1.0, 3));
  single = empirical_marginal1(cfg, edges);
  CHECK(single.overflow == 1.0);
  CHECK(pair.overflow == 2.0 * 29.0);
  double total = pair.overflow_mass();
  for (std::size_t k = 0; k < pair.raw.size(); ++k) total += pair.raw[k] / pair.total;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform sample fills ten bins evenly") {
  Rng rng = make_stream(11, 0);
  auto cfg = AgentConfiguration::zeros(10000, 1);
  for (auto& s : cfg.states) s = uniform01(rng);
  const auto h = empirical_marginal1(cfg, uniform_edges(0.0, 1.0, 10));
  for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(h.mass(k) - 0.1) <= 0.015);
}

TEST_CASE("zero kernel gives zero triplet integral") {
  Rng rng = make_stream(2, 0);
  const auto mu = DiscretePairMass::from_moments(random_moments(rng));
  const DiscreteKernel zero = [](int, int, int) { return 0.0; };
  for (auto kind : {ClosureKind::conditional, ClosureKind::kirkwood}) {
    const auto I = triplet_integral(mu, zero, kind);
    for (double x : I.mass) CHECK(x == 0.0);
  }
}

TEST_CASE("closed flip integrals reproduce the closure flip terms") {
  Rng rng = make_stream(4, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_moments(rng);
    auto p = random_params(rng);
    for (auto kind : {ClosureKind::conditional, ClosureKind::kirkwood}) {
      const auto terms = flip_collision_terms(m, p, kind);
      MinimalParams flips_only;
      flips_only.alpha_pm = p.alpha_pm;
      flips_only.alpha_mp = p.alpha_mp;
      const auto rhs = closure_rhs(m, flips_only, kind);
      for (int k = 0; k < 6; ++k) CHECK(terms[k] == doctest::Approx(rhs[k]).epsilon(1e-12).scale(1e-12));
    }
  }
}

TEST_CASE("vanishing marginal is singular") {
  MinimalMoments m{0.5, 0.5, 0, 0, 0, 0};
  MinimalParams p;
  p.alpha_pm = p.alpha_mp = 1.0;
  CHECK_THROWS_AS(triplet_integral(DiscretePairMass::from_moments(m), flip_kernel(p), ClosureKind::kirkwood),
                  ClosureSingular);
  CHECK_THROWS_AS(triplet_integral(DiscretePairMass::from_moments(m), flip_kernel(p), ClosureKind::conditional),
                  ClosureSingular);
}
