#include "models.hpp"

#include <cmath>
#include <set>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace coevo {
namespace {

double norm_diff(ConstVec a, ConstVec b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double squared_diff(ConstVec a, ConstVec b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

struct Probe {
  std::vector<double> s, sigma;
  double w;
};

std::vector<Probe> probe_grid(std::size_t m, std::size_t count, std::uint64_t seed) {
  Rng rng = make_stream(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Probe> out(count);
  for (auto& p : out) {
    p.s.resize(m);
    p.sigma.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      p.s[k] = u(rng);
      p.sigma[k] = u(rng);
    }
    p.w = u(rng);
  }
  return out;
}

double number(const nlohmann::json& params, const char* key, const std::string& ctx) {
  if (!params.contains(key)) throw ModelError("missing parameter '" + std::string(key) + "'", ctx + "." + key);
  const auto& v = params.at(key);
  if (!v.is_number()) throw ModelError("parameter '" + std::string(key) + "' must be a number", ctx + "." + key);
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ModelError("parameter '" + std::string(key) + "' must be finite", ctx + "." + key);
  return x;
}

double number_or(const nlohmann::json& params, const char* key, double fallback, const std::string& ctx) {
  return params.contains(key) ? number(params, key, ctx) : fallback;
}

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> allowed,
                    const std::string& ctx) {
  if (!params.is_object()) throw ModelError("parameters must be a JSON object", ctx);
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : params.items())
    if (!ok.count(key)) throw ModelError("unknown parameter '" + key + "'", ctx + "." + key);
}

std::size_t dimension(const nlohmann::json& params, const std::string& ctx) {
  if (!params.contains("m")) return 1;
  const auto& v = params.at("m");
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw ModelError("state dimension m must be a positive integer", ctx + ".m");
  return v.get<std::size_t>();
}

}  // namespace

void SmoothModel::validate(std::size_t probes) const {
  if (m == 0) throw ModelError("state dimension must be positive", "m");
  if (!U) throw ModelError("model has no state kernel U", "U");
  if (!V) throw ModelError("model has no weight kernel V", "V");
  std::vector<double> out(m), out0(m);
  for (const auto& p : probe_grid(m, probes, 0x5eed)) {
    U(p.s, p.sigma, p.w, out);
    for (double x : out)
      if (!std::isfinite(x)) throw ModelError("U is not finite on the probe grid", "U");
    const double v = V(p.s, p.sigma, p.w);
    if (!std::isfinite(v)) throw ModelError("V is not finite on the probe grid", "V");
    if (symmetric_V && v != V(p.sigma, p.s, p.w))
      throw ModelError("V flagged symmetric but V(s,sigma,w) != V(sigma,s,w) on a probe", "V");
    if (U0) {
      U0(p.s, out0);
      for (double x : out0)
        if (!std::isfinite(x)) throw ModelError("U0 is not finite on the probe grid", "U0");
    }
    if (Q) {
      const double q = Q(p.s);
      if (!std::isfinite(q) || q < 0.0) throw ModelError("Q must be finite and nonnegative", "Q");
    }
    if (R) {
      const double r = R(p.s, p.sigma, p.w);
      if (!std::isfinite(r) || r < 0.0) throw ModelError("R must be finite and nonnegative", "R");
    }
  }
}

void potential_grad_s(const PotentialModel& pot, ConstVec s, ConstVec sigma, double w, MutVec out) {
  if (pot.grad_s) {
    pot.grad_s(s, sigma, w, out);
    return;
  }
  std::vector<double> x(s.begin(), s.end());
  const double h = kFiniteDifferenceStep;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double fp = pot.F(x, sigma, w);
    x[k] = x0 - h;
    const double fm = pot.F(x, sigma, w);
    x[k] = x0;
    out[k] = (fp - fm) / (2.0 * h);
  }
}

double potential_dw(const PotentialModel& pot, ConstVec s, ConstVec sigma, double w) {
  if (pot.dF_dw) return pot.dF_dw(s, sigma, w);
  const double h = kFiniteDifferenceStep;
  return (pot.F(s, sigma, w + h) - pot.F(s, sigma, w - h)) / (2.0 * h);
}

SmoothModel derive_forces(const PotentialModel& pot) {
  if (!pot.F) throw ModelError("potential has no F", "F");
  if (!(pot.c > 0.0) || !std::isfinite(pot.c)) throw ModelError("mobility c must be positive", "c");
  const std::size_t m = pot.m;

  PotentialModel fd = pot;
  fd.grad_s = nullptr;
  fd.dF_dw = nullptr;
  std::vector<double> ga(m), gf(m);
  bool symmetric = true;
  for (const auto& p : probe_grid(m, 1000, 0xf0f0)) {
    const double f = pot.F(p.s, p.sigma, p.w);
    if (!std::isfinite(f)) throw ModelError("potential F is not finite on the probe grid", "F");
    if (f != pot.F(p.sigma, p.s, p.w)) symmetric = false;
    if (pot.grad_s || pot.dF_dw) {
      potential_grad_s(pot, p.s, p.sigma, p.w, ga);
      potential_grad_s(fd, p.s, p.sigma, p.w, gf);
      for (std::size_t k = 0; k < m; ++k)
        if (std::abs(ga[k] - gf[k]) > kForceMatchTolerance * std::max(1.0, std::abs(ga[k])))
          throw ModelError("analytic grad_s F disagrees with central differences", "grad_s");
      const double da = potential_dw(pot, p.s, p.sigma, p.w);
      const double df = potential_dw(fd, p.s, p.sigma, p.w);
      if (std::abs(da - df) > kForceMatchTolerance * std::max(1.0, std::abs(da)))
        throw ModelError("analytic dF/dw disagrees with central differences", "dF_dw");
    }
  }

  SmoothModel model;
  model.m = m;
  model.name = pot.name;
  model.symmetric_V = symmetric;
  model.U = [pot](ConstVec s, ConstVec sigma, double w, MutVec out) {
    potential_grad_s(pot, s, sigma, w, out);
    for (double& x : out) x = -x;
  };
  const double c = pot.c;
  model.V = [pot, c](ConstVec s, ConstVec sigma, double w) { return -c * potential_dw(pot, s, sigma, w); };
  model.validate();
  return model;
}

SmoothModel kernel_relaxation(ScalarFn K, ScalarFn eta, double kappa, std::size_t m) {
  if (!K || !eta) throw ModelError("kernel-relaxation needs K and eta");
  if (!(kappa >= 0.0)) throw ModelError("kappa must be nonnegative", "kappa");
  SmoothModel model;
  model.m = m;
  model.name = "kernel-relaxation";
  model.symmetric_V = true;
  model.U = [K](ConstVec s, ConstVec sigma, double w, MutVec out) {
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = -w * K(s[k] - sigma[k]);
  };
  model.V = [eta, kappa](ConstVec s, ConstVec sigma, double w) {
    return eta(norm_diff(s, sigma)) - kappa * w;
  };
  model.validate();
  return model;
}

SmoothModel boschi(ScalarFn g, double J0, double gamma, double sigma_noise) {
  if (!g) throw ModelError("boschi needs a coupling function g", "g");
  if (!(gamma >= 0.0)) throw ModelError("gamma must be nonnegative", "gamma");
  SmoothModel model;
  model.m = 1;
  model.name = "boschi";
  model.symmetric_V = true;
  model.U = [g](ConstVec, ConstVec sigma, double w, MutVec out) { out[0] = w * g(sigma[0]); };
  model.U0 = [](ConstVec s, MutVec out) { out[0] = -s[0]; };
  model.V = [g, J0, gamma](ConstVec s, ConstVec sigma, double w) {
    return gamma * (J0 * g(s[0]) * g(sigma[0]) - w);
  };
  const double q = 0.5 * sigma_noise * sigma_noise;
  model.Q = [q](ConstVec) { return q; };
  model.validate();
  return model;
}

PotentialModel quadratic_potential(double kappa, double c, std::size_t m) {
  if (!(c > 0.0)) throw ModelError("mobility c must be positive", "c");
  PotentialModel pot;
  pot.m = m;
  pot.c = c;
  pot.name = "quadratic-potential";
  pot.F = [kappa, c](ConstVec s, ConstVec sigma, double w) {
    return w * squared_diff(s, sigma) + kappa * w * w / (2.0 * c);
  };
  pot.grad_s = [](ConstVec s, ConstVec sigma, double w, MutVec out) {
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = 2.0 * w * (s[k] - sigma[k]);
  };
  pot.dF_dw = [kappa, c](ConstVec s, ConstVec sigma, double w) {
    return squared_diff(s, sigma) + kappa * w / c;
  };
  return pot;
}

PotentialModel kernel_potential(ScalarFn G, ScalarFn dG, double kappa, double c, std::size_t m) {
  if (!(c > 0.0)) throw ModelError("mobility c must be positive", "c");
  PotentialModel pot;
  pot.m = m;
  pot.c = c;
  pot.name = "kernel-potential";
  pot.F = [G, kappa, c](ConstVec s, ConstVec sigma, double w) {
    return w * G(norm_diff(s, sigma)) + kappa * w * w / (2.0 * c);
  };
  if (dG) {
    pot.grad_s = [dG](ConstVec s, ConstVec sigma, double w, MutVec out) {
      const double r = norm_diff(s, sigma);
      for (std::size_t k = 0; k < s.size(); ++k)
        out[k] = r > 0.0 ? w * dG(r) * (s[k] - sigma[k]) / r : 0.0;
    };
    pot.dF_dw = [G, kappa, c](ConstVec s, ConstVec sigma, double w) {
      return G(norm_diff(s, sigma)) + kappa * w / c;
    };
  }
  return pot;
}

ScalarFn make_kernel(const nlohmann::json& spec, const std::string& field) {
  if (!spec.is_object() || !spec.contains("type") || !spec.at("type").is_string())
    throw ModelError("kernel spec must be an object with a string 'type'", field);
  const std::string type = spec.at("type").get<std::string>();
  if (type == "zero") {
    reject_unknown(spec, {"type"}, field);
    return [](double) { return 0.0; };
  }
  if (type == "constant") {
    reject_unknown(spec, {"type", "c"}, field);
    const double c = number(spec, "c", field);
    return [c](double) { return c; };
  }
  if (type == "identity") {
    reject_unknown(spec, {"type"}, field);
    return [](double x) { return x; };
  }
  if (type == "linear") {
    reject_unknown(spec, {"type", "a"}, field);
    const double a = number(spec, "a", field);
    return [a](double x) { return a * x; };
  }
  if (type == "gaussian") {
    reject_unknown(spec, {"type", "a", "b"}, field);
    const double a = number_or(spec, "a", 1.0, field), b = number_or(spec, "b", 1.0, field);
    return [a, b](double x) { return a * std::exp(-b * x * x); };
  }
  if (type == "sigmoid") {
    reject_unknown(spec, {"type", "a"}, field);
    const double a = number_or(spec, "a", 1.0, field);
    return [a](double x) { return 1.0 / (1.0 + std::exp(-a * x)); };
  }
  if (type == "tanh") {
    reject_unknown(spec, {"type", "k", "a"}, field);
    const double k = number_or(spec, "k", 1.0, field), a = number_or(spec, "a", 1.0, field);
    return [k, a](double x) { return k * std::tanh(a * x); };
  }
  if (type == "indicator") {
    reject_unknown(spec, {"type", "radius"}, field);
    const double r = number(spec, "radius", field);
    return [r](double x) { return std::abs(x) < r ? 1.0 : 0.0; };
  }
  throw ModelError("unknown kernel type '" + type + "'", field + ".type");
}

SmoothModel catalog(std::string_view name, const nlohmann::json& params) {
  const std::string ctx = "model.params";
  if (name == "kernel-relaxation") {
    reject_unknown(params, {"K", "eta", "kappa", "m"}, ctx);
    if (!params.contains("K")) throw ModelError("missing parameter 'K'", ctx + ".K");
    if (!params.contains("eta")) throw ModelError("missing parameter 'eta'", ctx + ".eta");
    return kernel_relaxation(make_kernel(params.at("K"), ctx + ".K"),
                             make_kernel(params.at("eta"), ctx + ".eta"), number(params, "kappa", ctx),
                             dimension(params, ctx));
  }
  if (name == "boschi") {
    reject_unknown(params, {"g", "J0", "gamma", "sigma_noise"}, ctx);
    if (!params.contains("g")) throw ModelError("missing parameter 'g'", ctx + ".g");
    return boschi(make_kernel(params.at("g"), ctx + ".g"), number(params, "J0", ctx),
                  number(params, "gamma", ctx), number_or(params, "sigma_noise", 0.0, ctx));
  }
  if (name == "quadratic-potential") return derive_forces(catalog_potential(name, params));
  throw ModelError("unknown catalog model '" + std::string(name) + "'", "model.name");
}

PotentialModel catalog_potential(std::string_view name, const nlohmann::json& params) {
  const std::string ctx = "model.params";
  if (name == "quadratic-potential") {
    reject_unknown(params, {"kappa", "c", "m"}, ctx);
    return quadratic_potential(number(params, "kappa", ctx), number_or(params, "c", 1.0, ctx),
                               dimension(params, ctx));
  }
  throw ModelError("catalog model '" + std::string(name) + "' is not potential-based", "model.name");
}

void MinimalParams::validate() const {
  const std::pair<const char*, double> entries[] = {
      {"alpha_pm", alpha_pm}, {"alpha_mp", alpha_mp}, {"beta_pp", beta_pp},
      {"beta_mm", beta_mm},   {"beta_pm", beta_pm},   {"gamma_pp", gamma_pp},
      {"gamma_mm", gamma_mm}, {"gamma_pm", gamma_pm}};
  for (const auto& [key, value] : entries)
    if (!std::isfinite(value) || value < 0.0)
      throw ConfigError(std::string("rate '") + key + "' must be finite and nonnegative",
                        std::string("params.") + key);
}

nlohmann::json MinimalParams::to_json() const {
  return {{"alpha_pm", alpha_pm}, {"alpha_mp", alpha_mp}, {"beta_pp", beta_pp},
          {"beta_mm", beta_mm},   {"beta_pm", beta_pm},   {"gamma_pp", gamma_pp},
          {"gamma_mm", gamma_mm}, {"gamma_pm", gamma_pm}};
}

MinimalParams MinimalParams::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("minimal-model params must be an object", "params");
  MinimalParams p;
  std::pair<const char*, double*> slots[] = {
      {"alpha_pm", &p.alpha_pm}, {"alpha_mp", &p.alpha_mp}, {"beta_pp", &p.beta_pp},
      {"beta_mm", &p.beta_mm},   {"beta_pm", &p.beta_pm},   {"gamma_pp", &p.gamma_pp},
      {"gamma_mm", &p.gamma_mm}, {"gamma_pm", &p.gamma_pm}};
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto& [name, slot] : slots) {
      if (key != name) continue;
      if (!value.is_number()) throw ConfigError("rate '" + key + "' must be a number", "params." + key);
      *slot = value.get<double>();
      known = true;
    }
    if (!known) throw ConfigError("unknown rate '" + key + "'", "params." + key);
  }
  p.validate();
  return p;
}

}  // namespace coevo
