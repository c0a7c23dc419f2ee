#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swipeguard/errors.hpp"
#include "swipeguard/spline.hpp"

namespace swipeguard {

using FeatureVector = Eigen::VectorXd;

struct TouchPoint {
  double t_ms = 0.0;
  double x_px = 0.0;
  double y_px = 0.0;
  double size = 0.0;
};

/// Who produced a trace in an experimental session.
enum class Role { victim, blind_attacker, ots_attacker };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::victim: return "victim";
    case Role::blind_attacker: return "blind_attacker";
    case Role::ots_attacker: return "ots_attacker";
  }
  return "victim";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "victim") return Role::victim;
  if (s == "blind_attacker") return Role::blind_attacker;
  if (s == "ots_attacker") return Role::ots_attacker;
  return std::nullopt;
}

struct DeviceInfo {
  int width_px = 1080;
  int height_px = 1920;
  double sample_rate_hz = 60.0;
};

/// One swipe attempt as captured on a device.
struct RawTrace {
  std::string profile_id;
  Role role = Role::victim;
  int attempt_index = 0;
  DeviceInfo device;
  std::vector<TouchPoint> points;
};

/// Returns a copy with equal timestamps collapsed (the last point wins) after
/// checking every structural invariant of a trace.
///
/// Throws StructuralError for fewer than two points, decreasing timestamps,
/// non-finite values, negative pointer size, out-of-range coordinates or a
/// non-positive device geometry.
inline RawTrace sanitize(const RawTrace& trace) {
  const auto& dev = trace.device;
  if (dev.width_px <= 0 || dev.height_px <= 0) {
    throw StructuralError("trace: device dimensions must be positive");
  }
  if (trace.points.size() < 2) throw StructuralError("trace: fewer than two points");

  RawTrace out = trace;
  out.points.clear();
  out.points.reserve(trace.points.size());
  for (const auto& p : trace.points) {
    if (!std::isfinite(p.t_ms) || !std::isfinite(p.x_px) || !std::isfinite(p.y_px) ||
        !std::isfinite(p.size)) {
      throw StructuralError("trace: non-finite value");
    }
    if (p.x_px < 0.0 || p.x_px > dev.width_px || p.y_px < 0.0 || p.y_px > dev.height_px) {
      throw StructuralError("trace: coordinate outside the device screen");
    }
    if (p.size < 0.0) throw StructuralError("trace: negative pointer size");
    if (!out.points.empty()) {
      if (p.t_ms < out.points.back().t_ms) throw StructuralError("trace: timestamps decrease");
      if (p.t_ms == out.points.back().t_ms) {
        out.points.back() = p;
        continue;
      }
    }
    out.points.push_back(p);
  }
  if (out.points.size() < 2) throw StructuralError("trace: fewer than two distinct timestamps");
  return out;
}

struct QualityPolicy {
  std::size_t min_points = 8;
  double min_duration_ms = 50.0;
  double min_path_frac = 0.2;  // polyline length as a fraction of screen width
};

enum class QualityReason { too_short, too_few_points, too_brief };

inline std::string_view to_string(QualityReason r) {
  switch (r) {
    case QualityReason::too_short: return "too_short";
    case QualityReason::too_few_points: return "too_few_points";
    case QualityReason::too_brief: return "too_brief";
  }
  return "too_short";
}

struct QualityVerdict {
  /// Every failed predicate, path length first. Empty means accepted.
  std::vector<QualityReason> reasons;

  [[nodiscard]] bool accepted() const noexcept { return reasons.empty(); }
  [[nodiscard]] QualityReason primary() const { return reasons.front(); }
};

/// Polyline length of the trace divided by the device width.
inline double path_fraction(const RawTrace& trace) {
  double len = 0.0;
  for (std::size_t i = 1; i < trace.points.size(); ++i) {
    len += std::hypot(trace.points[i].x_px - trace.points[i - 1].x_px,
                      trace.points[i].y_px - trace.points[i - 1].y_px);
  }
  return len / trace.device.width_px;
}

/// Data-quality predicate. Structural problems throw StructuralError instead.
inline QualityVerdict quality_gate(const RawTrace& trace, const QualityPolicy& policy = {}) {
  const RawTrace clean = sanitize(trace);
  QualityVerdict v;
  // Relative slack absorbs rounding in the summed segment lengths so the
  // boundary stays inclusive.
  if (path_fraction(clean) < policy.min_path_frac * (1.0 - 1e-12)) {
    v.reasons.push_back(QualityReason::too_short);
  }
  if (clean.points.size() < policy.min_points) v.reasons.push_back(QualityReason::too_few_points);
  const double duration = clean.points.back().t_ms - clean.points.front().t_ms;
  if (duration < policy.min_duration_ms) v.reasons.push_back(QualityReason::too_brief);
  return v;
}

/// Trace mapped to the unit square and unit duration. Pointer size keeps
/// device units.
struct NormalizedTrace {
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> size;
};

inline NormalizedTrace normalize(const RawTrace& trace) {
  const RawTrace clean = sanitize(trace);
  const double t0 = clean.points.front().t_ms;
  const double span = clean.points.back().t_ms - t0;
  if (!(span > 0.0)) throw StructuralError("normalize: zero duration");

  NormalizedTrace n;
  const std::size_t count = clean.points.size();
  n.t.reserve(count);
  n.x.reserve(count);
  n.y.reserve(count);
  n.size.reserve(count);
  for (const auto& p : clean.points) {
    n.t.push_back((p.t_ms - t0) / span);
    n.x.push_back(p.x_px / clean.device.width_px);
    n.y.push_back(p.y_px / clean.device.height_px);
    n.size.push_back(p.size);
  }
  n.t.back() = 1.0;
  return n;
}

/// Channel order inside a feature vector; each channel occupies G entries.
enum class Channel : int { x = 0, y, speed, accel, angle, angular_accel, size };
inline constexpr int kChannelCount = 7;
inline constexpr int kDefaultGrid = 10;

inline Eigen::Index channel_offset(Channel c, int grid) {
  return static_cast<Eigen::Index>(static_cast<int>(c) * grid);
}

/// Evaluation abscissae: cell midpoints (g - 0.5) / G.
inline std::vector<double> grid_points(int grid) {
  std::vector<double> out(static_cast<std::size_t>(grid));
  for (int g = 0; g < grid; ++g) out[static_cast<std::size_t>(g)] = (g + 0.5) / grid;
  return out;
}

/// Resamples a normalized trace onto G midpoints and derives the kinematic
/// channels from cubic interpolants of x(t), y(t) and size(t).
///
/// The unwrapped angle is shifted by a multiple of 2*pi so that its value at
/// the central grid point lies in [-pi/2, 3*pi/2). Horizontal swipes then sit
/// away from the branch cut and traces in the same direction share a branch.
inline FeatureVector extract_features(const NormalizedTrace& trace, int grid = kDefaultGrid) {
  if (grid < 1) throw ConfigError("extract_features: grid must be positive");
  if (trace.t.size() < 4) throw StructuralError("extract_features: need at least four points");

  const NaturalCubicSpline sx(trace.t, trace.x);
  const NaturalCubicSpline sy(trace.t, trace.y);
  const NaturalCubicSpline ss(trace.t, trace.size);

  FeatureVector f(static_cast<Eigen::Index>(kChannelCount * grid));
  const auto at = [&](Channel c, int g) -> double& { return f[channel_offset(c, grid) + g]; };

  const auto ts = grid_points(grid);
  std::vector<double> angle(ts.size());
  for (int g = 0; g < grid; ++g) {
    const auto px = sx(ts[static_cast<std::size_t>(g)]);
    const auto py = sy(ts[static_cast<std::size_t>(g)]);
    const auto ps = ss(ts[static_cast<std::size_t>(g)]);

    const double s2 = px.d1 * px.d1 + py.d1 * py.d1;
    const double speed = std::sqrt(s2);
    const double cross = px.d1 * py.d2 - py.d1 * px.d2;
    const double dot = px.d1 * px.d2 + py.d1 * py.d2;

    at(Channel::x, g) = px.value;
    at(Channel::y, g) = py.value;
    at(Channel::speed, g) = speed;
    at(Channel::size, g) = ps.value;
    angle[static_cast<std::size_t>(g)] = std::atan2(py.d1, px.d1);
    if (s2 > 0.0) {
      at(Channel::accel, g) = dot / speed;
      const double cross_rate = px.d1 * py.d3 - py.d1 * px.d3;
      at(Channel::angular_accel, g) = cross_rate / s2 - 2.0 * cross * dot / (s2 * s2);
    } else {
      at(Channel::accel, g) = 0.0;
      at(Channel::angular_accel, g) = 0.0;
    }
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t g = 1; g < angle.size(); ++g) {
    const double jump = angle[g] - angle[g - 1];
    angle[g] -= two_pi * std::round(jump / two_pi);
  }
  const double centre = angle[angle.size() / 2];
  const double shift = two_pi * std::floor((centre + std::numbers::pi / 2.0) / two_pi);
  for (int g = 0; g < grid; ++g) at(Channel::angle, g) = angle[static_cast<std::size_t>(g)] - shift;

  return f;
}

/// Per-dimension location and scale used for z-scoring.
struct PopulationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static PopulationStats identity(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
  }
};

inline constexpr double kMinStd = 1e-9;

/// Population-convention (divisor N) mean and standard deviation.
inline PopulationStats compute_stats(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw DimensionError("compute_stats: empty input");
  const Eigen::Index d = vectors.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& v : vectors) {
    if (v.size() != d) throw DimensionError("compute_stats: dimension mismatch");
    mean += v;
  }
  mean /= static_cast<double>(vectors.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& v : vectors) var += (v - mean).cwiseAbs2();
  var /= static_cast<double>(vectors.size());
  Eigen::VectorXd sd = var.cwiseSqrt().cwiseMax(kMinStd);
  return {std::move(mean), std::move(sd)};
}

struct Standardized {
  std::vector<FeatureVector> vectors;
  PopulationStats stats;
};

inline FeatureVector apply_stats(const FeatureVector& v, const PopulationStats& stats) {
  if (v.size() != stats.mean.size()) throw DimensionError("standardize: dimension mismatch");
  return (v - stats.mean).cwiseQuotient(stats.std.cwiseMax(kMinStd));
}

/// Z-scores every dimension with the supplied statistics, or with statistics
/// computed from the input when none are given.
inline Standardized standardize(std::span<const FeatureVector> vectors,
                                const std::optional<PopulationStats>& stats = std::nullopt) {
  if (vectors.empty()) throw DimensionError("standardize: empty input");
  Standardized out;
  out.stats = stats ? *stats : compute_stats(vectors);
  if (out.stats.mean.size() != vectors.front().size() ||
      out.stats.std.size() != out.stats.mean.size()) {
    throw DimensionError("standardize: statistics do not match vector dimension");
  }
  out.stats.std = out.stats.std.cwiseMax(kMinStd);
  out.vectors.reserve(vectors.size());
  for (const auto& v : vectors) out.vectors.push_back(apply_stats(v, out.stats));
  return out;
}

/// Leaves the position channels (x, y) in unit-square coordinates by
/// overriding their statistics with the identity.
inline PopulationStats keep_positions_raw(PopulationStats stats, int grid) {
  const auto n = static_cast<Eigen::Index>(2 * grid);
  stats.mean.head(n).setZero();
  stats.std.head(n).setOnes();
  return stats;
}

}  // namespace swipeguard
