#pragma once

// Fixed-step and embedded Runge-Kutta steppers on flat double vectors.
// The right-hand side has the signature rhs(t, y, dydt) and must fully
// overwrite dydt.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace coevo::ode {

inline bool all_finite(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

/// Classical fourth-order Runge-Kutta with preallocated stage storage.
class Rk4 {
 public:
  explicit Rk4(std::size_t n) : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

  template <class Rhs>
  void step(Rhs&& rhs, double t, std::vector<double>& y, double h) {
    const std::size_t n = y.size();
    rhs(t, std::span<const double>(y), std::span<double>(k1_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
    rhs(t + 0.5 * h, std::span<const double>(tmp_), std::span<double>(k2_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
    rhs(t + 0.5 * h, std::span<const double>(tmp_), std::span<double>(k3_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
    rhs(t + h, std::span<const double>(tmp_), std::span<double>(k4_));
    for (std::size_t i = 0; i < n; ++i)
      y[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

 private:
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

class Euler {
 public:
  explicit Euler(std::size_t n) : k_(n) {}

  template <class Rhs>
  void step(Rhs&& rhs, double t, std::vector<double>& y, double h) {
    rhs(t, std::span<const double>(y), std::span<double>(k_));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * k_[i];
  }

 private:
  std::vector<double> k_;
};

/// Runge-Kutta-Fehlberg 4(5) with step-size control. `advance` integrates
/// from t to t_end, adapting internal steps; the solution at t_end is
/// returned in y.
class Rkf45 {
 public:
  Rkf45(std::size_t n, double abs_tol, double rel_tol)
      : abs_tol_(abs_tol), rel_tol_(rel_tol), k_(6, std::vector<double>(n)), tmp_(n), y5_(n) {}

  template <class Rhs>
  void advance(Rhs&& rhs, double t, double t_end, std::vector<double>& y) {
    static constexpr double a[6][5] = {
        {0, 0, 0, 0, 0},
        {1.0 / 4, 0, 0, 0, 0},
        {3.0 / 32, 9.0 / 32, 0, 0, 0},
        {1932.0 / 2197, -7200.0 / 2197, 7296.0 / 2197, 0, 0},
        {439.0 / 216, -8.0, 3680.0 / 513, -845.0 / 4104, 0},
        {-8.0 / 27, 2.0, -3544.0 / 2565, 1859.0 / 4104, -11.0 / 40}};
    static constexpr double c[6] = {0, 1.0 / 4, 3.0 / 8, 12.0 / 13, 1.0, 1.0 / 2};
    static constexpr double b4[6] = {25.0 / 216, 0, 1408.0 / 2565, 2197.0 / 4104, -1.0 / 5, 0};
    static constexpr double b5[6] = {16.0 / 135, 0, 6656.0 / 12825, 28561.0 / 56430,
                                     -9.0 / 50, 2.0 / 55};
    const std::size_t n = y.size();
    if (h_ <= 0.0) h_ = (t_end - t) * 0.1;
    while (t < t_end) {
      double h = std::min(h_, t_end - t);
      for (int s = 0; s < 6; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = y[i];
          for (int r = 0; r < s; ++r) acc += h * a[s][r] * k_[r][i];
          tmp_[i] = acc;
        }
        rhs(t + c[s] * h, std::span<const double>(tmp_), std::span<double>(k_[s]));
      }
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double y4 = y[i], y5 = y[i];
        for (int s = 0; s < 6; ++s) {
          y4 += h * b4[s] * k_[s][i];
          y5 += h * b5[s] * k_[s][i];
        }
        y5_[i] = y5;
        const double scale = abs_tol_ + rel_tol_ * std::max(std::abs(y[i]), std::abs(y5));
        err = std::max(err, std::abs(y5 - y4) / scale);
      }
      if (!std::isfinite(err)) {
        y = y5_;  // propagate the non-finite value so the caller can abort
        return;
      }
      if (err <= 1.0) {
        t += h;
        y.swap(y5_);
      }
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h_ = h * factor;
      if (h_ < 1e-14 * std::max(1.0, std::abs(t))) h_ = 1e-14 * std::max(1.0, std::abs(t));
    }
  }

 private:
  double abs_tol_, rel_tol_;
  double h_ = 0.0;
  std::vector<std::vector<double>> k_;
  std::vector<double> tmp_, y5_;
};

}  // namespace coevo::ode
