#include "characteristics.hpp"

#include <cmath>
#include <limits>

#include "ode.hpp"

namespace coevo {

CharacteristicEnsemble CharacteristicEnsemble::uniform(std::size_t M, std::size_t m) {
  require(M >= 1 && m >= 1, "ensemble needs M >= 1 and m >= 1", "M");
  CharacteristicEnsemble e;
  e.M = M;
  e.m = m;
  e.anchors.assign(M * m, 0.0);
  e.pair_weights.assign(M * M, 0.0);
  e.masses.assign(M, 1.0 / static_cast<double>(M));
  return e;
}

void CharacteristicEnsemble::validate() const {
  if (anchors.size() != M * m || pair_weights.size() != M * M || masses.size() != M)
    throw InvariantViolation("ensemble array sizes do not match M and m");
  double total = 0.0;
  for (double x : masses) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvariantViolation("anchor masses must be finite and nonnegative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvariantViolation("anchor masses must sum to 1");
  for (double x : anchors)
    if (!std::isfinite(x)) throw InvariantViolation("non-finite anchor");
  for (std::size_t i = 0; i < M; ++i) {
    if (w(i, i) != 0.0) throw InvariantViolation("pair weight diagonal must be zero");
    for (std::size_t j = 0; j < M; ++j)
      if (!std::isfinite(w(i, j))) throw InvariantViolation("non-finite pair weight");
  }
}

namespace {

bool symmetric_weights(const CharacteristicEnsemble& e) {
  for (std::size_t i = 0; i < e.M; ++i)
    for (std::size_t j = i + 1; j < e.M; ++j)
      if (e.w(i, j) != e.w(j, i)) return false;
  return true;
}

// Flat layout [anchors (M*m) | weights]; packed holds i < j only.
class Flow {
 public:
  Flow(const CharacteristicEnsemble& e, const SmoothModel& model)
      : model_(model), M_(e.M), m_(e.m), masses_(e.masses), packed_(model.symmetric_V && symmetric_weights(e)),
        acc_(e.m), tmp_(e.m), ext_(e.m) {
    for (std::size_t i = 0; i < M_; ++i)
      for (std::size_t j = packed_ ? i + 1 : 0; j < M_; ++j)
        if (i != j) pairs_.push_back({i, j});
    index_.assign(M_ * M_, 0);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      index_[pairs_[k].first * M_ + pairs_[k].second] = k;
      if (packed_) index_[pairs_[k].second * M_ + pairs_[k].first] = k;
    }
  }

  std::size_t size() const { return M_ * m_ + pairs_.size(); }

  std::vector<double> pack(const CharacteristicEnsemble& e) const {
    std::vector<double> y(size());
    std::copy(e.anchors.begin(), e.anchors.end(), y.begin());
    for (std::size_t k = 0; k < pairs_.size(); ++k) y[M_ * m_ + k] = e.w(pairs_[k].first, pairs_[k].second);
    return y;
  }

  void unpack(const std::vector<double>& y, CharacteristicEnsemble& e) const {
    std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(M_ * m_), e.anchors.begin());
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      e.w(i, j) = y[M_ * m_ + k];
      if (packed_) e.w(j, i) = y[M_ * m_ + k];
    }
  }

  void operator()(double, std::span<const double> y, std::span<double> dy) {
    const double* w = y.data() + M_ * m_;
    for (std::size_t i = 0; i < M_; ++i) {
      ConstVec si = y.subspan(i * m_, m_);
      std::fill(acc_.begin(), acc_.end(), 0.0);
      for (std::size_t j = 0; j < M_; ++j) {
        if (j == i || masses_[j] == 0.0) continue;
        model_.U(si, y.subspan(j * m_, m_), w[index_[i * M_ + j]], tmp_);
        for (std::size_t k = 0; k < m_; ++k) acc_[k] += masses_[j] * tmp_[k];
      }
      if (model_.U0) {
        model_.U0(si, ext_);
        for (std::size_t k = 0; k < m_; ++k) acc_[k] += ext_[k];
      }
      std::copy(acc_.begin(), acc_.end(), dy.begin() + static_cast<std::ptrdiff_t>(i * m_));
    }
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      dy[M_ * m_ + k] = model_.V(y.subspan(i * m_, m_), y.subspan(j * m_, m_), w[k]);
    }
  }

 private:
  const SmoothModel& model_;
  std::size_t M_, m_;
  std::vector<double> masses_;
  bool packed_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::size_t> index_;
  std::vector<double> acc_, tmp_, ext_;
};

double distance(const CharacteristicEnsemble& e, std::size_t i, std::size_t j) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < e.m; ++k) {
    const double d = e.anchors[i * e.m + k] - e.anchors[j * e.m + k];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

}  // namespace

CharacteristicRun integrate_characteristics_conditional(const CharacteristicEnsemble& ens0,
                                                        const SmoothModel& model,
                                                        const CharacteristicOptions& opts) {
  ens0.validate();
  require(ens0.m == model.m, "ensemble and model dimensions differ", "m");
  require(opts.dt > 0.0 && std::isfinite(opts.dt), "dt must be positive", "dt");
  require(opts.T >= 0.0 && std::isfinite(opts.T), "T must be finite and nonnegative", "T");
  const std::size_t every = std::max<std::size_t>(1, opts.record_every);
  const std::size_t M = ens0.M;

  // pairs that start apart; anchors that coincide initially stay together
  std::vector<std::pair<std::size_t, std::size_t>> watched;
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = i + 1; j < M; ++j)
      if (distance(ens0, i, j) > 0.0) watched.push_back({i, j});

  CharacteristicRun run;
  auto record = [&](const CharacteristicEnsemble& e) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& [i, j] : watched) dmin = std::min(dmin, distance(e, i, j));
    run.snapshots.push_back(e);
    run.min_distance.push_back(dmin);
    if (!watched.empty() && !(dmin > opts.collision_distance))
      throw InvariantViolation("characteristics collided at t = " + std::to_string(e.t) +
                               " (min anchor distance " + std::to_string(dmin) + ")");
  };

  Flow flow(ens0, model);
  std::vector<double> y = flow.pack(ens0);
  CharacteristicEnsemble cur = ens0;
  record(cur);
  ode::Rk4 rk4(y.size());
  const std::size_t steps = opts.T == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(opts.T / opts.dt - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = ens0.t + static_cast<double>(k - 1) * opts.dt;
    const double t1 = k == steps ? ens0.t + opts.T : ens0.t + static_cast<double>(k) * opts.dt;
    rk4.step(flow, t0, y, t1 - t0);
    if (!ode::all_finite(y)) throw IntegrationError("non-finite characteristic state", t0);
    if (k % every == 0 || k == steps) {
      flow.unpack(y, cur);
      cur.t = t1;
      record(cur);
    }
  }
  return run;
}

CharacteristicRun integrate_characteristics_wc(const CharacteristicEnsemble& ens0, const SmoothModel& model,
                                               const WeightProfile& W0, const CharacteristicOptions& opts) {
  require(static_cast<bool>(W0), "weight profile W0 is required", "W0");
  CharacteristicEnsemble e = ens0;
  for (std::size_t i = 0; i < e.M; ++i)
    for (std::size_t j = 0; j < e.M; ++j) e.w(i, j) = i == j ? 0.0 : W0(e.anchor(i), e.anchor(j));
  return integrate_characteristics_conditional(e, model, opts);
}

double pushforward(const CharacteristicEnsemble& ens, const SingleObservable& phi) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.M; ++i) acc += ens.masses[i] * phi(ens.anchor(i));
  return acc;
}

double pair_normalization(const CharacteristicEnsemble& ens) {
  double total = 0.0, squares = 0.0;
  for (double x : ens.masses) {
    total += x;
    squares += x * x;
  }
  return total * total - squares;
}

double pushforward_pair(const CharacteristicEnsemble& ens, const PairObservable& phi, bool normalized) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.M; ++i)
    for (std::size_t j = 0; j < ens.M; ++j)
      if (i != j) acc += ens.masses[i] * ens.masses[j] * phi(ens.anchor(i), ens.anchor(j), ens.w(i, j));
  if (!normalized) return acc;
  const double Z = pair_normalization(ens);
  require(Z > 0.0, "pair pushforward needs at least two anchors with mass");
  return acc / Z;
}

PairEnergy pair_energy_dissipation(const CharacteristicEnsemble& ens, const PotentialModel& pot) {
  require(ens.m == pot.m, "ensemble and potential dimensions differ", "m");
  const double Z = pair_normalization(ens);
  require(Z > 0.0, "pair energy needs at least two anchors with mass");
  const std::size_t m = ens.m;
  std::vector<double> grad(m), v(m);
  double energy = 0.0, state_term = 0.0, weight_term = 0.0;
  for (std::size_t i = 0; i < ens.M; ++i) {
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t j = 0; j < ens.M; ++j) {
      if (j == i) continue;
      const double mm = ens.masses[i] * ens.masses[j];
      const double w = ens.w(i, j);
      energy += mm * pot.F(ens.anchor(i), ens.anchor(j), w);
      potential_grad_s(pot, ens.anchor(i), ens.anchor(j), w, grad);
      for (std::size_t k = 0; k < m; ++k) v[k] += ens.masses[j] * grad[k];
      const double dw = potential_dw(pot, ens.anchor(i), ens.anchor(j), w);
      weight_term += mm * dw * dw;
    }
    double v2 = 0.0;
    for (double x : v) v2 += x * x;
    state_term += ens.masses[i] * v2;
  }
  PairEnergy out;
  out.energy = energy / Z;
  out.dissipation = (2.0 * state_term + pot.c * weight_term) / Z;
  return out;
}

}  // namespace coevo
