#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "swipeguard/errors.hpp"

namespace swipeguard {

/// Value and first three derivatives of an interpolant at one abscissa.
struct SplineSample {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// Natural cubic interpolating spline (second derivative zero at both ends).
///
/// Derivatives are evaluated analytically from the piecewise polynomial, so
/// the third derivative is piecewise constant. Outside the knot range the end
/// polynomial is extrapolated.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::span<const double> knots, std::span<const double> values)
      : t_(knots.begin(), knots.end()), y_(values.begin(), values.end()) {
    const std::size_t n = t_.size();
    if (n != y_.size()) throw DimensionError("spline: knots and values differ in length");
    if (n < 2) throw StructuralError("spline: need at least two knots");
    for (std::size_t i = 1; i < n; ++i) {
      if (!(t_[i] > t_[i - 1])) throw StructuralError("spline: knots must be strictly increasing");
    }
    m_.assign(n, 0.0);
    if (n == 2) return;

    // Tridiagonal system for the interior second derivatives (Thomas algorithm).
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t_[i] - t_[i - 1];
      const double h1 = t_[i + 1] - t_[i];
      diag[i - 1] = 2.0 * (h0 + h1);
      upper[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double lower = t_[i + 1] - t_[i];  // h_i, sub-diagonal entry of row i
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i) {
      m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
    }
  }

  [[nodiscard]] SplineSample operator()(double t) const {
    const std::size_t seg = segment(t);
    const double h = t_[seg + 1] - t_[seg];
    const double a = m_[seg];
    const double b = m_[seg + 1];
    const double u = t - t_[seg];
    const double v = t_[seg + 1] - t;
    const double slope = (y_[seg + 1] - y_[seg]) / h;

    SplineSample s;
    s.value = a * v * v * v / (6.0 * h) + b * u * u * u / (6.0 * h) +
              (y_[seg] / h - a * h / 6.0) * v + (y_[seg + 1] / h - b * h / 6.0) * u;
    s.d1 = -a * v * v / (2.0 * h) + b * u * u / (2.0 * h) + slope - (b - a) * h / 6.0;
    s.d2 = (a * v + b * u) / h;
    s.d3 = (b - a) / h;
    return s;
  }

  [[nodiscard]] std::size_t size() const noexcept { return t_.size(); }

 private:
  [[nodiscard]] std::size_t segment(double t) const {
    if (t <= t_.front()) return 0;
    if (t >= t_.back()) return t_.size() - 2;
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    return static_cast<std::size_t>(it - t_.begin()) - 1;
  }

  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

}  // namespace swipeguard
