#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "swipeguard/features.hpp"
#include "swipeguard/spline.hpp"
#include "swipeguard/trace_io.hpp"

using namespace swipeguard;

namespace {

RawTrace line_trace(int n, double duration_ms, double x0, double x1, double y0, double y1,
                    DeviceInfo dev = {1080, 1920, 60.0}) {
  RawTrace t;
  t.profile_id = "u";
  t.device = dev;
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    t.points.push_back({f * duration_ms, x0 + f * (x1 - x0), y0 + f * (y1 - y0), 0.5});
  }
  return t;
}

// Trace whose normalized coordinates follow (fx(s), fy(s)) for s in [0, 1].
template <class FX, class FY>
RawTrace curve_trace(int n, FX fx, FY fy, DeviceInfo dev = {1000, 1000, 60.0}) {
  RawTrace t;
  t.device = dev;
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    t.points.push_back({s * 500.0, fx(s) * dev.width_px, fy(s) * dev.height_px, 1.0});
  }
  return t;
}

double channel(const FeatureVector& f, Channel c, int g, int grid = kDefaultGrid) {
  return f[channel_offset(c, grid) + g];
}

// Natural spline from a dense solve of the full moment system.
struct DenseSpline {
  std::vector<double> t, y, m;

  DenseSpline(std::vector<double> knots, std::vector<double> values) : t(std::move(knots)), y(std::move(values)) {
    const std::size_t n = t.size();
    oracle::Mat a(n, std::vector<double>(n, 0.0));
    std::vector<double> rhs(n, 0.0);
    a[0][0] = 1.0;
    a[n - 1][n - 1] = 1.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
      a[i][i - 1] = h0;
      a[i][i] = 2.0 * (h0 + h1);
      a[i][i + 1] = h1;
      rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    const auto inv = oracle::gauss_jordan(a).inv;
    m.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m[i] += inv[i][j] * rhs[j];
    }
  }

  std::array<double, 4> eval(double x) const {
    std::size_t k = 0;
    while (k + 2 < t.size() && x > t[k + 1]) ++k;
    const double h = t[k + 1] - t[k];
    const double A = (t[k + 1] - x) / h, B = (x - t[k]) / h;
    const double val = A * y[k] + B * y[k + 1] + ((A * A * A - A) * m[k] + (B * B * B - B) * m[k + 1]) * h * h / 6.0;
    const double d1 = (y[k + 1] - y[k]) / h - (3 * A * A - 1) / 6.0 * h * m[k] + (3 * B * B - 1) / 6.0 * h * m[k + 1];
    const double d2 = A * m[k] + B * m[k + 1];
    const double d3 = (m[k + 1] - m[k]) / h;
    return {val, d1, d2, d3};
  }
};

}  // namespace

// ---------------------------------------------------------------- quality gate

TEST(QualityGate, TapIsTooShortWithAllReasons) {
  RawTrace tap = line_trace(2, 10.0, 500, 502, 900, 900);
  const auto v = quality_gate(tap);
  ASSERT_FALSE(v.accepted());
  EXPECT_EQ(v.primary(), QualityReason::too_short);
  ASSERT_EQ(v.reasons.size(), 3u);
  EXPECT_EQ(v.reasons[1], QualityReason::too_few_points);
  EXPECT_EQ(v.reasons[2], QualityReason::too_brief);
}

TEST(QualityGate, LongSwipeAccepted) {
  RawTrace t = line_trace(50, 400.0, 200, 200 + 0.6 * 1080, 900, 900);
  EXPECT_TRUE(quality_gate(t).accepted());
}

TEST(QualityGate, PathBoundaryIsInclusive) {
  RawTrace t = line_trace(20, 300.0, 100, 300, 500, 500, {1000, 1000, 60.0});
  EXPECT_TRUE(quality_gate(t).accepted());
  RawTrace shorter = line_trace(20, 300.0, 100, 299, 500, 500, {1000, 1000, 60.0});
  const auto v = quality_gate(shorter);
  ASSERT_FALSE(v.accepted());
  EXPECT_EQ(v.primary(), QualityReason::too_short);
}

TEST(QualityGate, PointAndDurationThresholds) {
  RawTrace few = line_trace(7, 300.0, 100, 600, 500, 500);
  auto v = quality_gate(few);
  ASSERT_EQ(v.reasons.size(), 1u);
  EXPECT_EQ(v.primary(), QualityReason::too_few_points);
  EXPECT_TRUE(quality_gate(line_trace(8, 50.0, 100, 600, 500, 500)).accepted());
  v = quality_gate(line_trace(8, 49.0, 100, 600, 500, 500));
  ASSERT_EQ(v.reasons.size(), 1u);
  EXPECT_EQ(v.primary(), QualityReason::too_brief);
}

TEST(QualityGate, PathUsesPolylineNotChord) {
  // Zig-zag whose chord is short but whose polyline is long.
  RawTrace t;
  t.device = {1000, 1000, 60.0};
  for (int i = 0; i < 20; ++i) t.points.push_back({i * 20.0, i % 2 ? 150.0 : 100.0, 500.0, 1.0});
  EXPECT_NEAR(path_fraction(t), 19 * 50.0 / 1000.0, 1e-12);
  EXPECT_TRUE(quality_gate(t).accepted());
}

// ------------------------------------------------------------------ structure

TEST(Sanitize, RejectsStructuralProblems) {
  RawTrace base = line_trace(10, 200.0, 100, 600, 500, 500);

  RawTrace dec = base;
  dec.points[4].t_ms = dec.points[2].t_ms;
  EXPECT_THROW(sanitize(dec), StructuralError);

  RawTrace out = base;
  out.points[3].x_px = 1081;
  EXPECT_THROW(sanitize(out), StructuralError);
  out = base;
  out.points[3].y_px = -1;
  EXPECT_THROW(sanitize(out), StructuralError);

  RawTrace neg = base;
  neg.points[1].size = -0.1;
  EXPECT_THROW(sanitize(neg), StructuralError);

  RawTrace nan = base;
  nan.points[5].x_px = std::nan("");
  EXPECT_THROW(sanitize(nan), StructuralError);

  RawTrace one = base;
  one.points.resize(1);
  EXPECT_THROW(sanitize(one), StructuralError);

  RawTrace dev = base;
  dev.device.width_px = 0;
  EXPECT_THROW(sanitize(dev), StructuralError);

  EXPECT_THROW(quality_gate(dec), StructuralError);
}

TEST(Sanitize, EqualTimestampsKeepLastPoint) {
  RawTrace t = line_trace(5, 100.0, 100, 500, 500, 500);
  t.points[2].t_ms = t.points[1].t_ms;
  const double kept_x = t.points[2].x_px;
  const RawTrace s = sanitize(t);
  ASSERT_EQ(s.points.size(), 4u);
  EXPECT_EQ(s.points[1].x_px, kept_x);
}

// -------------------------------------------------------------- normalization

TEST(Normalize, UnitTimeAndScreenCoordinates) {
  RawTrace t;
  t.device = {1080, 1920, 60.0};
  t.points = {{100, 0, 0, 1}, {300, 540, 960, 1}, {500, 1080, 1920, 1}};
  const auto n = normalize(t);
  EXPECT_EQ(n.t, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_DOUBLE_EQ(n.x[1], 0.5);
  EXPECT_DOUBLE_EQ(n.y[1], 0.5);
  EXPECT_EQ(n.x.front(), 0.0);
  EXPECT_EQ(n.x.back(), 1.0);
}

TEST(Normalize, ZeroDurationIsStructural) {
  RawTrace t;
  t.points = {{100, 10, 10, 1}, {100, 20, 20, 1}};
  EXPECT_THROW(normalize(t), StructuralError);
}

// --------------------------------------------------------------------- spline

TEST(Spline, MatchesDenseMomentSolve) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + rep;
    std::vector<double> t{0.0}, y;
    for (int i = 1; i < n; ++i) t.push_back(t.back() + 0.05 + u(rng));
    for (int i = 0; i < n; ++i) y.push_back(u(rng) * 4 - 2);
    const NaturalCubicSpline s(t, y);
    const DenseSpline ref(t, y);
    for (int k = 0; k < 50; ++k) {
      const double x = t.front() + u(rng) * (t.back() - t.front());
      const auto got = s(x);
      const auto want = ref.eval(x);
      EXPECT_NEAR(got.value, want[0], 1e-10);
      EXPECT_NEAR(got.d1, want[1], 1e-9);
      EXPECT_NEAR(got.d2, want[2], 1e-8);
      EXPECT_NEAR(got.d3, want[3], 1e-7);
    }
    EXPECT_NEAR(s(t.front()).d2, 0.0, 1e-12);
    EXPECT_NEAR(s(t.back()).d2, 0.0, 1e-9);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(s(t[i]).value, y[i], 1e-12);
  }
}

TEST(Spline, ReproducesLinearFunctions) {
  const std::vector<double> t{0.0, 0.1, 0.35, 0.6, 1.0};
  std::vector<double> y;
  for (double v : t) y.push_back(3.0 * v - 1.0);
  const NaturalCubicSpline s(t, y);
  for (double x = 0.0; x <= 1.0; x += 0.013) {
    EXPECT_NEAR(s(x).value, 3.0 * x - 1.0, 1e-12);
    EXPECT_NEAR(s(x).d1, 3.0, 1e-12);
  }
}

TEST(Spline, RejectsBadKnots) {
  EXPECT_THROW(NaturalCubicSpline(std::vector<double>{0.0}, std::vector<double>{1.0}), StructuralError);
  EXPECT_THROW(NaturalCubicSpline(std::vector<double>{0.0, 0.0, 1.0}, std::vector<double>{1, 2, 3}), StructuralError);
  EXPECT_THROW(NaturalCubicSpline(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0}), DimensionError);
}

// ------------------------------------------------------------------- features

TEST(Features, LayoutIsSevenChannelsOfG) {
  const auto f = extract_features(normalize(line_trace(30, 300.0, 100, 900, 500, 1500)));
  EXPECT_EQ(f.size(), 70);
  EXPECT_EQ(channel_offset(Channel::size, 10), 60);
  EXPECT_EQ(grid_points(4), (std::vector<double>{0.125, 0.375, 0.625, 0.875}));
}

TEST(Features, ConstantVelocityLine) {
  const auto f = extract_features(normalize(line_trace(40, 300.0, 100, 900, 300, 1500)));
  const double vx = 800.0 / 1080.0, vy = 1200.0 / 1920.0;
  for (int g = 0; g < kDefaultGrid; ++g) {
    EXPECT_NEAR(channel(f, Channel::speed, g), std::hypot(vx, vy), 1e-9);
    EXPECT_NEAR(channel(f, Channel::accel, g), 0.0, 1e-9);
    EXPECT_NEAR(channel(f, Channel::angle, g), std::atan2(vy, vx), 1e-9);
    EXPECT_NEAR(channel(f, Channel::angular_accel, g), 0.0, 1e-9);
    EXPECT_NEAR(channel(f, Channel::size, g), 0.5, 1e-12);
  }
}

TEST(Features, KnotsOnGridAreReproduced) {
  // Knots at 0, every grid midpoint and 1 with arbitrary values.
  const auto gp = grid_points(kDefaultGrid);
  std::vector<double> ts{0.0};
  ts.insert(ts.end(), gp.begin(), gp.end());
  ts.push_back(1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  RawTrace t;
  t.device = {1000, 1000, 60.0};
  std::vector<double> xs, ys;
  for (double s : ts) {
    xs.push_back(u(rng));
    ys.push_back(u(rng));
    t.points.push_back({s * 400.0, xs.back() * 1000.0, ys.back() * 1000.0, 1.0});
  }
  const auto f = extract_features(normalize(t));
  for (int g = 0; g < kDefaultGrid; ++g) {
    EXPECT_NEAR(channel(f, Channel::x, g), xs[g + 1], 1e-9);
    EXPECT_NEAR(channel(f, Channel::y, g), ys[g + 1], 1e-9);
  }
}

TEST(Features, QuadraticPathMatchesAnalyticKinematics) {
  const auto t = curve_trace(401, [](double s) { return 0.1 + 0.8 * s; }, [](double s) { return 0.1 + 0.8 * s * s; });
  const auto f = extract_features(normalize(t));
  const auto gp = grid_points(kDefaultGrid);
  for (int g = 1; g + 1 < kDefaultGrid; ++g) {
    const double s = gp[g];
    const double dx = 0.8, dy = 1.6 * s, ddy = 1.6;
    const double speed = std::hypot(dx, dy);
    EXPECT_NEAR(channel(f, Channel::angle, g), std::atan2(dy, dx), 1e-3);
    EXPECT_NEAR(channel(f, Channel::speed, g), speed, 1e-3);
    EXPECT_NEAR(channel(f, Channel::accel, g), dy * ddy / speed, 1e-3);
    // theta = atan(2 s), theta'' = -16 s / (1 + 4 s^2)^2
    const double q = 1.0 + 4.0 * s * s;
    EXPECT_NEAR(channel(f, Channel::angular_accel, g), -16.0 * s / (q * q), 1e-2);
  }
}

TEST(Features, GridRefinementSharesMidpoints) {
  // Midpoints of G are midpoints of 3G at index 3g + 1.
  const auto t = curve_trace(60, [](double s) { return 0.2 + 0.6 * s; },
                             [](double s) { return 0.5 + 0.2 * std::sin(3.0 * s); });
  const auto n = normalize(t);
  const auto coarse = extract_features(n, 10);
  const auto fine = extract_features(n, 30);
  for (int c = 0; c < kChannelCount; ++c) {
    for (int g = 0; g < 10; ++g) {
      EXPECT_NEAR(coarse[c * 10 + g], fine[c * 30 + 3 * g + 1], 1e-2) << "channel " << c << " g " << g;
    }
  }
}

TEST(Features, AngleIsUnwrappedAroundHalfCircle) {
  // Counter-clockwise half circle; the raw heading crosses the atan2 branch cut.
  const auto t = curve_trace(
      200, [](double s) { return 0.5 + 0.3 * std::cos(std::numbers::pi * (0.5 + s)); },
      [](double s) { return 0.5 + 0.3 * std::sin(std::numbers::pi * (0.5 + s)); });
  const auto f = extract_features(normalize(t));
  for (int g = 1; g < kDefaultGrid; ++g) {
    EXPECT_LT(std::abs(channel(f, Channel::angle, g) - channel(f, Channel::angle, g - 1)), std::numbers::pi);
  }
  const double centre = channel(f, Channel::angle, kDefaultGrid / 2);
  EXPECT_GE(centre, -std::numbers::pi / 2);
  EXPECT_LT(centre, 3 * std::numbers::pi / 2);
  EXPECT_NEAR(channel(f, Channel::angle, 9) - channel(f, Channel::angle, 0), 0.9 * std::numbers::pi, 0.05);
}

TEST(Features, RejectsTooFewPointsAndBadGrid) {
  const auto n = normalize(line_trace(3, 100.0, 100, 600, 500, 500));
  EXPECT_THROW(extract_features(n), StructuralError);
  const auto ok = normalize(line_trace(10, 100.0, 100, 600, 500, 500));
  EXPECT_THROW(extract_features(ok, 0), ConfigError);
}

// ---------------------------------------------------------------- standardize

TEST(Standardize, RepeatedVectorMapsToZero) {
  const std::vector<FeatureVector> v(5, Eigen::Vector3d(1.0, -2.0, 7.5));
  const auto s = standardize(v);
  for (const auto& z : s.vectors) EXPECT_EQ(z, Eigen::Vector3d::Zero());
  EXPECT_TRUE((s.stats.std.array() == kMinStd).all());
}

TEST(Standardize, IdentityStatsAreNoOp) {
  const std::vector<FeatureVector> v{Eigen::Vector2d(1.5, -3.0), Eigen::Vector2d(0.0, 2.0)};
  const auto s = standardize(v, PopulationStats::identity(2));
  EXPECT_EQ(s.vectors[0], v[0]);
  EXPECT_EQ(s.vectors[1], v[1]);
}

TEST(Standardize, TwoPointExample) {
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 2.0;
  const auto s = standardize(std::vector<FeatureVector>{a, b});
  EXPECT_DOUBLE_EQ(s.stats.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.stats.std[0], 1.0);
  EXPECT_DOUBLE_EQ(s.vectors[0][0], -1.0);
  EXPECT_DOUBLE_EQ(s.vectors[1][0], 1.0);
}

TEST(Standardize, IdempotentOnOwnStatistics) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(2.0, 5.0);
  std::vector<FeatureVector> v;
  for (int i = 0; i < 30; ++i) v.push_back(Eigen::Vector4d(z(rng), z(rng), z(rng), 4.0));
  const auto once = standardize(v);
  const auto twice = standardize(once.vectors);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_LT((once.vectors[i] - twice.vectors[i]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Standardize, DimensionMismatchThrows) {
  const std::vector<FeatureVector> v{Eigen::Vector2d(1, 2)};
  EXPECT_THROW(standardize(v, PopulationStats::identity(3)), DimensionError);
  EXPECT_THROW(standardize(std::vector<FeatureVector>{}), DimensionError);
}

TEST(Standardize, KeepPositionsRaw) {
  PopulationStats st{Eigen::VectorXd::Constant(70, 3.0), Eigen::VectorXd::Constant(70, 2.0)};
  const auto k = keep_positions_raw(st, 10);
  EXPECT_TRUE((k.mean.head(20).array() == 0.0).all());
  EXPECT_TRUE((k.std.head(20).array() == 1.0).all());
  EXPECT_TRUE((k.mean.tail(50).array() == 3.0).all());
}

// ------------------------------------------------------------------ trace I/O

TEST(TraceIo, RoundTripPreservesValues) {
  RawTrace t = line_trace(12, 250.0, 10.25, 700.5, 33.0, 1200.125);
  t.profile_id = "alice";
  t.role = Role::ots_attacker;
  t.attempt_index = 7;
  t.device.sample_rate_hz = 120.0;
  std::stringstream ss;
  write_traces(ss, {t, t});
  const auto file = read_traces(ss);
  ASSERT_TRUE(file.failures.empty());
  ASSERT_EQ(file.traces.size(), 2u);
  const auto& r = file.traces[0];
  EXPECT_EQ(r.profile_id, "alice");
  EXPECT_EQ(r.role, Role::ots_attacker);
  EXPECT_EQ(r.attempt_index, 7);
  EXPECT_EQ(r.device.sample_rate_hz, 120.0);
  ASSERT_EQ(r.points.size(), t.points.size());
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    EXPECT_EQ(r.points[i].x_px, t.points[i].x_px);
    EXPECT_EQ(r.points[i].t_ms, t.points[i].t_ms);
  }
}

TEST(TraceIo, MalformedLinesReportedWithLineNumbers) {
  const RawTrace t = line_trace(10, 200.0, 100, 600, 500, 500);
  std::stringstream ss;
  ss << trace_to_json(t).dump() << "\n";
  ss << "{not json\n";
  ss << "\n";
  json missing = trace_to_json(t);
  missing.erase("role");
  ss << missing.dump() << "\n";
  json bad_role = trace_to_json(t);
  bad_role["role"] = "pirate";
  ss << bad_role.dump() << "\n";
  json decreasing = trace_to_json(t);
  decreasing["points"][3]["t_ms"] = -5.0;
  ss << decreasing.dump() << "\n";
  ss << trace_to_json(t).dump() << "\n";

  const auto file = read_traces(ss);
  EXPECT_EQ(file.traces.size(), 2u);
  ASSERT_EQ(file.failures.size(), 4u);
  EXPECT_EQ(file.failures[0].line, 2u);
  EXPECT_EQ(file.failures[1].line, 4u);
  EXPECT_EQ(file.failures[2].line, 5u);
  EXPECT_EQ(file.failures[3].line, 6u);
}

TEST(TraceIo, DefaultRoleForServiceUploads) {
  json j = trace_to_json(line_trace(10, 200.0, 100, 600, 500, 500));
  j.erase("role");
  j.erase("profile_id");
  j.erase("attempt_index");
  EXPECT_THROW(trace_from_json(j), StructuralError);
  const RawTrace t = trace_from_json(j, Role::victim);
  EXPECT_EQ(t.role, Role::victim);
  EXPECT_EQ(t.points.size(), 10u);
}
