#include <doctest.h>

#include <cmath>
#include <random>

#include "error.hpp"
#include "models.hpp"

using namespace coevo;
using nlohmann::json;

namespace {

double u1(const SmoothModel& m, double s, double sigma, double w) {
  double out = 0.0, a[1] = {s}, b[1] = {sigma};
  m.U(a, b, w, std::span<double>(&out, 1));
  return out;
}

double v1(const SmoothModel& m, double s, double sigma, double w) {
  double a[1] = {s}, b[1] = {sigma};
  return m.V(a, b, w);
}

}  // namespace

TEST_CASE("constant potential has zero forces") {
  PotentialModel pot;
  pot.F = [](ConstVec, ConstVec, double) { return 7.0; };
  const SmoothModel m = derive_forces(pot);
  CHECK(std::abs(u1(m, 0.3, -1.2, 0.7)) < 1e-9);
  CHECK(std::abs(v1(m, 0.3, -1.2, 0.7)) < 1e-9);
}

TEST_CASE("quadratic potential forces at (1, 0, 2)") {
  const SmoothModel m = derive_forces(quadratic_potential(1.0, 1.0));
  CHECK(u1(m, 1.0, 0.0, 2.0) == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(v1(m, 1.0, 0.0, 2.0) == doctest::Approx(-3.0).epsilon(1e-14));

  // finite-difference path on the same potential, analytic derivatives stripped
  PotentialModel bare = quadratic_potential(1.0, 1.0);
  bare.grad_s = nullptr;
  bare.dF_dw = nullptr;
  const SmoothModel fd = derive_forces(bare);
  CHECK(u1(fd, 1.0, 0.0, 2.0) == doctest::Approx(-4.0).epsilon(1e-6));
  CHECK(v1(fd, 1.0, 0.0, 2.0) == doctest::Approx(-3.0).epsilon(1e-6));
}

TEST_CASE("kernel potential reproduces the kernel-relaxation forces") {
  // G(x) = x^2 / 2 so K = G' = identity and eta = -c G
  const double c = 1.5, kappa = 0.8;
  const PotentialModel pot = kernel_potential([](double x) { return 0.5 * x * x; }, [](double x) { return x; },
                                              kappa, c);
  const SmoothModel derived = derive_forces(pot);
  const SmoothModel direct = kernel_relaxation([](double x) { return x; },
                                               [c](double x) { return -c * 0.5 * x * x; }, kappa);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int k = 0; k < 1000; ++k) {
    const double s = d(rng), sigma = d(rng), w = d(rng);
    CHECK(u1(derived, s, sigma, w) == doctest::Approx(u1(direct, s, sigma, w)).epsilon(1e-12).scale(1.0));
    CHECK(v1(derived, s, sigma, w) == doctest::Approx(v1(direct, s, sigma, w)).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("non-finite potential is rejected") {
  PotentialModel pot;
  pot.F = [](ConstVec s, ConstVec, double) { return 1.0 / (s[0] - s[0]); };
  CHECK_THROWS_AS(derive_forces(pot), ModelError);
}

TEST_CASE("mismatched analytic gradient is rejected") {
  PotentialModel pot = quadratic_potential(1.0, 1.0);
  pot.dF_dw = [](ConstVec, ConstVec, double w) { return w; };
  CHECK_THROWS_AS(derive_forces(pot), ModelError);
}

TEST_CASE("catalog kernel-relaxation evaluation") {
  const SmoothModel m = catalog("kernel-relaxation", json{{"K", {{"type", "identity"}}},
                                                          {"eta", {{"type", "gaussian"}, {"a", 1}, {"b", 1}}},
                                                          {"kappa", 1.0}});
  CHECK(u1(m, 1.0, 0.0, 0.5) == doctest::Approx(-0.5));
  CHECK(v1(m, 1.0, 0.0, 0.5) == doctest::Approx(std::exp(-1.0) - 0.5).epsilon(1e-15));
}

TEST_CASE("catalog boschi evaluation") {
  const SmoothModel zero = catalog("boschi", json{{"g", {{"type", "zero"}}}, {"J0", 2.0}, {"gamma", 1.5}});
  CHECK(u1(zero, 0.4, 1.0, 3.0) == 0.0);
  CHECK(v1(zero, 0.4, 1.0, 3.0) == doctest::Approx(-4.5));

  const SmoothModel m = catalog("boschi", json{{"g", {{"type", "sigmoid"}}}, {"J0", 2.0}, {"gamma", 1.0}});
  CHECK(v1(m, 0.0, 0.0, 1.0) == doctest::Approx(-0.5).epsilon(1e-15));
  REQUIRE(m.U0);
  double s[1] = {2.0}, out[1];
  m.U0(s, out);
  CHECK(out[0] == -2.0);
}

TEST_CASE("boschi weight drift is nonnegative at w = 0") {
  const SmoothModel m = catalog("boschi", json{{"g", {{"type", "sigmoid"}}}, {"J0", 1.0}, {"gamma", 2.0}});
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d(0.0, 3.0);
  for (int k = 0; k < 1000; ++k) CHECK(v1(m, d(rng), d(rng), 0.0) >= 0.0);
}

TEST_CASE("catalog models flagged symmetric are exactly symmetric") {
  const SmoothModel models[] = {
      catalog("kernel-relaxation", json{{"K", {{"type", "tanh"}}}, {"eta", {{"type", "indicator"}, {"radius", 1}}},
                                        {"kappa", 2.0}}),
      catalog("boschi", json{{"g", {{"type", "sigmoid"}, {"a", 2}}}, {"J0", 1.0}, {"gamma", 1.0}}),
      catalog("quadratic-potential", json{{"kappa", 1.0}}),
  };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (const auto& m : models) {
    REQUIRE(m.symmetric_V);
    for (int k = 0; k < 10000; ++k) {
      const double s = d(rng), sigma = d(rng), w = d(rng);
      REQUIRE(v1(m, s, sigma, w) == v1(m, sigma, s, w));
    }
  }
}

TEST_CASE("asymmetric V flagged symmetric fails validation") {
  SmoothModel m;
  m.U = [](ConstVec, ConstVec, double, MutVec out) { out[0] = 0.0; };
  m.V = [](ConstVec s, ConstVec, double) { return s[0]; };
  m.symmetric_V = true;
  CHECK_THROWS_AS(m.validate(), ModelError);
}

TEST_CASE("catalog errors") {
  CHECK_THROWS_AS(catalog("nope", json::object()), ModelError);
  try {
    catalog("kernel-relaxation", json{{"K", {{"type", "identity"}}}, {"kappa", 1.0}});
    FAIL("expected an error");
  } catch (const ModelError& e) {
    CHECK(e.field() == "model.params.eta");
  }
  CHECK_THROWS_AS(make_kernel(json{{"type", "cubic"}}, "K"), ModelError);
}

TEST_CASE("minimal params validation and round trip") {
  MinimalParams p{1, 2, 0.5, 0.25, 0, 1, 1, 3};
  CHECK_NOTHROW(p.validate());
  const MinimalParams q = MinimalParams::from_json(p.to_json());
  CHECK(q.alpha_mp == 2);
  CHECK(q.gamma_pm == 3);
  try {
    MinimalParams::from_json(json{{"alpha_pm", -1.0}});
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "params.alpha_pm");
  }
  CHECK_THROWS_AS(MinimalParams::from_json(json{{"alpha", 1.0}}), ConfigError);
}
