#include "moments.hpp"

#include <algorithm>
#include <cmath>

namespace coevo {

long bin_of(const std::vector<double>& edges, double x) {
  if (edges.size() < 2 || !(x >= edges.front()) || !(x <= edges.back())) return -1;
  if (x == edges.back()) return static_cast<long>(edges.size()) - 2;
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return static_cast<long>(it - edges.begin()) - 1;
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  require(bins >= 1 && hi > lo, "uniform_edges needs hi > lo and at least one bin");
  std::vector<double> e(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    e[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

namespace {

void check_edges(const std::vector<double>& e, const char* what) {
  require(e.size() >= 2, std::string(what) + " needs at least two edges", what);
  for (std::size_t k = 1; k < e.size(); ++k)
    require(e[k] > e[k - 1], std::string(what) + " must be strictly increasing", what);
}

const std::vector<double> kStateSupport{-1.5, 0.0, 1.5};   // bins: -, +
const std::vector<double> kWeightSupport{-0.5, 0.5, 1.5};  // bins: 0, 1

}  // namespace

PairHistogram empirical_pair(const AgentConfiguration& cfg, const std::vector<double>& state_edges,
                             const std::vector<double>& weight_edges) {
  require(cfg.m == 1, "continuous pair histograms need scalar states (m = 1)", "m");
  check_edges(state_edges, "state_edges");
  check_edges(weight_edges, "weight_edges");
  cfg.validate();
  PairHistogram h;
  h.state_edges = state_edges;
  h.weight_edges = weight_edges;
  h.raw.assign(h.ns() * h.ns() * h.nw(), 0.0);
  const std::size_t n = cfg.n;
  h.n = n;
  h.total = static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<long> sb(n);
  for (std::size_t i = 0; i < n; ++i) sb[i] = bin_of(state_edges, cfg.states[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const long wb = bin_of(weight_edges, cfg.w(i, j));
      if (sb[i] < 0 || sb[j] < 0 || wb < 0) {
        h.overflow += 1.0;
        continue;
      }
      h.raw[h.index(static_cast<std::size_t>(sb[i]), static_cast<std::size_t>(sb[j]), static_cast<std::size_t>(wb))] +=
          1.0;
    }
  return h;
}

PairHistogram empirical_pair(const DiscreteConfiguration& cfg) {
  cfg.validate();
  PairHistogram h;
  h.state_edges = kStateSupport;
  h.weight_edges = kWeightSupport;
  h.raw.assign(8, 0.0);
  const std::size_t n = cfg.n;
  h.n = n;
  h.total = static_cast<double>(n) * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      h.raw[h.index(cfg.s(i) > 0 ? 1 : 0, cfg.s(j) > 0 ? 1 : 0, cfg.w(i, j) ? 1 : 0)] += 1.0;
    }
  return h;
}

StateHistogram empirical_marginal1(const AgentConfiguration& cfg, const std::vector<double>& edges) {
  require(cfg.m == 1, "continuous histograms need scalar states (m = 1)", "m");
  check_edges(edges, "edges");
  StateHistogram h;
  h.edges = edges;
  h.raw.assign(h.bins(), 0.0);
  h.total = static_cast<double>(cfg.n);
  for (double x : cfg.states) {
    const long b = bin_of(edges, x);
    if (b < 0)
      h.overflow += 1.0;
    else
      h.raw[static_cast<std::size_t>(b)] += 1.0;
  }
  return h;
}

StateHistogram empirical_marginal1(const DiscreteConfiguration& cfg) {
  cfg.validate();
  StateHistogram h;
  h.edges = kStateSupport;
  h.raw.assign(2, 0.0);
  h.total = static_cast<double>(cfg.n);
  for (auto s : cfg.states) h.raw[s > 0 ? 1 : 0] += 1.0;
  return h;
}

namespace {

StateHistogram marginal(const PairHistogram& h, bool first) {
  require(h.n >= 2, "pair histogram carries no agent count");
  StateHistogram out;
  out.edges = h.state_edges;
  out.raw.assign(h.ns(), 0.0);
  out.total = static_cast<double>(h.n);
  for (std::size_t a = 0; a < h.ns(); ++a)
    for (std::size_t b = 0; b < h.ns(); ++b)
      for (std::size_t c = 0; c < h.nw(); ++c) out.raw[first ? a : b] += h.raw[h.index(a, b, c)];
  // each agent appears in exactly N - 1 ordered pairs per slot, so these
  // integer divisions are exact
  const double partners = static_cast<double>(h.n - 1);
  for (double& x : out.raw) x /= partners;
  out.overflow = h.overflow / partners;
  return out;
}

}  // namespace

StateHistogram first_marginal(const PairHistogram& h) { return marginal(h, true); }
StateHistogram second_marginal(const PairHistogram& h) { return marginal(h, false); }

void MinimalMoments::validate(double tol) const {
  for (double x : to_array())
    if (!(x >= 0.0)) throw InvariantViolation("minimal moments must be nonnegative");
  if (std::abs(normalization() - 1.0) > tol)
    throw InvariantViolation("minimal moments violate h_pp + h_mm + 2 h_pm = 1");
}

MinimalMoments minimal_moments(const PairClassCounts& c) {
  require(c.n >= 2 && c.n_plus <= c.n, "invalid pair-class counts");
  const double n = static_cast<double>(c.n);
  const double np = static_cast<double>(c.n_plus), nm = n - np;
  const double total = n * (n - 1.0);
  MinimalMoments m;
  m.f_pp = 2.0 * static_cast<double>(c.links_pp) / total;
  m.g_pp = (np * (np - 1.0) - 2.0 * static_cast<double>(c.links_pp)) / total;
  m.f_mm = 2.0 * static_cast<double>(c.links_mm) / total;
  m.g_mm = (nm * (nm - 1.0) - 2.0 * static_cast<double>(c.links_mm)) / total;
  m.f_pm = static_cast<double>(c.links_pm) / total;
  m.g_pm = (np * nm - static_cast<double>(c.links_pm)) / total;
  return m;
}

MinimalMoments minimal_moments(const DiscreteConfiguration& cfg) {
  cfg.validate();
  return minimal_moments(count_pair_classes(cfg));
}

const char* to_string(ClosureKind kind) { return kind == ClosureKind::conditional ? "conditional" : "kirkwood"; }

double DiscretePairMass::rho(int s) const {
  return (*this)(s, 1, 0) + (*this)(s, 1, 1) + (*this)(s, -1, 0) + (*this)(s, -1, 1);
}

double DiscretePairMass::h(int s1, int s2) const { return (*this)(s1, s2, 0) + (*this)(s1, s2, 1); }

DiscretePairMass DiscretePairMass::from_moments(const MinimalMoments& m) {
  DiscretePairMass d;
  d.mass[index(1, 1, 1)] = m.f_pp;
  d.mass[index(1, 1, 0)] = m.g_pp;
  d.mass[index(-1, -1, 1)] = m.f_mm;
  d.mass[index(-1, -1, 0)] = m.g_mm;
  d.mass[index(1, -1, 1)] = d.mass[index(-1, 1, 1)] = m.f_pm;
  d.mass[index(1, -1, 0)] = d.mass[index(-1, 1, 0)] = m.g_pm;
  return d;
}

DiscretePairMass DiscretePairMass::from_histogram(const PairHistogram& h) {
  require(h.ns() == 2 && h.nw() == 2, "discrete pair mass needs a 2 x 2 x 2 histogram");
  DiscretePairMass d;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int w = 0; w < 2; ++w) d.mass[index(a ? 1 : -1, b ? 1 : -1, w)] = h.mass(a, b, w);
  return d;
}

DiscretePairMass triplet_integral(const DiscretePairMass& mu2, const DiscreteKernel& U, ClosureKind kind) {
  const int states[2] = {1, -1};
  DiscretePairMass out;
  for (int s1 : states)
    for (int s2 : states)
      for (int w12 = 0; w12 < 2; ++w12) {
        const double base = mu2(s1, s2, w12);
        double acc = 0.0;
        for (int s3 : states)
          for (int w13 = 0; w13 < 2; ++w13) {
            const double u = U(s1, s3, w13);
            if (u == 0.0) continue;
            const double r1 = mu2.rho(s1);
            if (kind == ClosureKind::conditional) {
              if (!(r1 > 0.0)) throw ClosureSingular("conditional closure needs mu1(s1) > 0");
              acc += u * base * mu2(s1, s3, w13) / r1;
            } else {
              const double denom = r1 * mu2.rho(s2) * mu2.rho(s3);
              if (!(denom > 0.0)) throw ClosureSingular("Kirkwood closure needs positive single marginals");
              acc += u * base * mu2(s1, s3, w13) * mu2.h(s2, s3) / denom;
            }
          }
        out.mass[DiscretePairMass::index(s1, s2, w12)] = acc;
      }
  return out;
}

DiscreteKernel flip_kernel(const MinimalParams& p) {
  return [p](int s1, int s3, int w13) {
    if (!w13 || s3 == s1) return 0.0;
    return s1 > 0 ? p.alpha_pm : p.alpha_mp;
  };
}

std::array<double, 6> flip_collision_terms(const MinimalMoments& m, const MinimalParams& p, ClosureKind kind) {
  const DiscretePairMass I = triplet_integral(DiscretePairMass::from_moments(m), flip_kernel(p), kind);
  // agent 2's integral is agent 1's with the pair reversed
  auto rate = [&](int s1, int s2, int w, int who) { return who == 1 ? I(s1, s2, w) : I(s2, s1, w); };
  auto term = [&](int s1, int s2, int w) {
    const double gain = rate(-s1, s2, w, 1) + rate(s1, -s2, w, 2);
    const double loss = rate(s1, s2, w, 1) + rate(s1, s2, w, 2);
    return 0.5 * (gain - loss);
  };
  return {term(1, 1, 1), term(1, 1, 0), term(-1, -1, 1), term(-1, -1, 0), term(1, -1, 1), term(1, -1, 0)};
}

}  // namespace coevo
