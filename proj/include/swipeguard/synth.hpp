#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "swipeguard/errors.hpp"
#include "swipeguard/features.hpp"

namespace swipeguard::synth {

using Rng = std::mt19937_64;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class SpeedProfile { constant, bell };

/// One harmonic of a behaviour's fixed fine-scale motion. Harmonic k (counted
/// from 2) bends the path sideways by side * sin(k pi s + side_phase) in
/// unit-square units, shifts progress along the path by along * sin(k pi tau)
/// and scales the pointer size by size * sin(k pi tau + size_phase).
struct Harmonic {
  double side = 0.0;
  double side_phase = 0.0;
  double along = 0.0;
  double size = 0.0;
  double size_phase = 0.0;
};

/// One coherent way a user swipes. Coordinates are in unit-square units.
struct BehaviourSpec {
  Point2 start{0.25, 0.55};
  Point2 end{0.75, 0.55};
  double curvature = 0.0;  // control-point offset as a fraction of chord length
  double duration_mean_ms = 400.0;
  double duration_std_ms = 40.0;
  SpeedProfile speed_profile = SpeedProfile::bell;
  double jitter_std = 0.02;
  double size_mean = 0.2;
  double size_std = 0.02;
  std::vector<Harmonic> signature;  // repeated on every swipe of this behaviour

  void validate() const {
    if (start.x == end.x && start.y == end.y) throw ConfigError("behaviour: start equals end");
    if (!(duration_mean_ms > 0.0)) throw ConfigError("behaviour: duration mean must be positive");
    if (jitter_std < 0.0 || duration_std_ms < 0.0 || size_std < 0.0) {
      throw ConfigError("behaviour: negative spread");
    }
  }
};

struct UserSpec {
  std::vector<BehaviourSpec> behaviours;
  std::vector<double> weights;

  void validate() const {
    if (behaviours.empty()) throw ConfigError("user: needs at least one behaviour");
    if (weights.size() != behaviours.size()) throw ConfigError("user: one weight per behaviour");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ConfigError("user: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("user: weights must sum to 1");
    for (const auto& b : behaviours) b.validate();
  }
};

/// splitmix64 finalizer; derives independent seeds from (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace detail {

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean, double sd) {
  if (sd <= 0.0) return mean;
  return std::normal_distribution<double>(mean, sd)(rng);
}

/// Progress along the path as a function of normalized time. The bell profile
/// peaks mid-swipe without stopping at the ends.
inline double progress(SpeedProfile p, double tau) {
  if (p == SpeedProfile::constant) return tau;
  return tau - 0.5 * std::sin(2.0 * std::numbers::pi * tau) / (2.0 * std::numbers::pi);
}

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace detail

/// Number of smooth sinusoidal modes applied across and along the path.
inline constexpr std::size_t kTremorModes = 8;

/// Band-limited positional noise: a sum of sinusoids with random frequency in
/// [kNoiseBand[0], kNoiseBand[1]] cycles per swipe and random phase, so it does
/// not depend on the device sample rate. Its standard deviation is kNoiseScale * jitter_std.
inline constexpr std::array<double, 2> kNoiseBand{1.0, 10.0};
inline constexpr std::size_t kNoiseTerms = 12;
inline constexpr double kNoiseScale = 0.1;
/// Relative per-point noise on the pointer size, per unit of jitter_std.
inline constexpr double kSizeNoise = 1.0;

/// Renders one swipe for a behaviour.
///
/// Trace-level variation: endpoint and curvature jitter, smooth sideways and
/// along-path modes, a timing warp, a pointer-size shape and band-limited
/// positional noise, all scaled by jitter_std, plus the duration and
/// size-level spreads. The behaviour's signature is added unchanged to every
/// swipe. A spec with zero spreads yields identical traces on a fixed device.
inline RawTrace render_swipe(const BehaviourSpec& b, const DeviceInfo& device, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  const double w = device.width_px;
  const double h = device.height_px;
  const double j = b.jitter_std;

  const Point2 a{b.start.x + detail::normal(rng, 0.0, j), b.start.y + detail::normal(rng, 0.0, j)};
  const Point2 e{b.end.x + detail::normal(rng, 0.0, j), b.end.y + detail::normal(rng, 0.0, j)};
  const double curv = b.curvature + detail::normal(rng, 0.0, j);
  std::array<double, kTremorModes> wobble{};
  std::array<double, kTremorModes> surge{};
  for (std::size_t k = 0; k < kTremorModes; ++k) {
    const double decay = std::pow(k + 1.0, -1.5);
    wobble[k] = detail::normal(rng, 0.0, 0.5 * j * decay);
    surge[k] = detail::normal(rng, 0.0, 0.5 * j * decay);
  }
  const double warp = detail::normal(rng, 0.0, 2.0 * j);
  const double size_bump = 0.15 + detail::normal(rng, 0.0, 2.0 * j);
  const double size_tilt = detail::normal(rng, 0.0, 2.0 * j);
  const double duration = std::max(150.0, detail::normal(rng, b.duration_mean_ms, b.duration_std_ms));
  struct Wave {
    double freq, phase_x, phase_y, amp_x, amp_y;
  };
  std::array<Wave, kNoiseTerms> noise{};
  const double amp = kNoiseScale * j * std::sqrt(2.0 / kNoiseTerms);
  for (auto& n : noise) {
    n.freq = detail::uniform(rng, kNoiseBand[0], kNoiseBand[1]);
    n.phase_x = detail::uniform(rng, 0.0, 2.0 * pi);
    n.phase_y = detail::uniform(rng, 0.0, 2.0 * pi);
    n.amp_x = amp * w;
    n.amp_y = amp * w;
  }
  const double size_level = std::max(0.01, detail::normal(rng, b.size_mean, b.size_std));

  // Quadratic Bezier in pixel space; control point offset perpendicular to the chord.
  const double ax = a.x * w, ay = a.y * h, ex = e.x * w, ey = e.y * h;
  const double cx = ex - ax, cy = ey - ay;
  const double chord = std::hypot(cx, cy);
  const double px = chord > 0.0 ? -cy / chord : 0.0;
  const double py = chord > 0.0 ? cx / chord : 0.0;
  const double mx = 0.5 * (ax + ex) + curv * chord * px;
  const double my = 0.5 * (ay + ey) + curv * chord * py;

  const double step = 1000.0 / device.sample_rate_hz;
  const auto count = static_cast<int>(std::floor(duration / step)) + 1;

  RawTrace t;
  t.device = device;
  t.points.reserve(static_cast<std::size_t>(count) + 1);
  for (int k = 0; k <= count; ++k) {
    const double time = std::min(k * step, duration);
    if (k == count && time <= t.points.back().t_ms) break;
    const double tau = time / duration;
    double s = detail::progress(b.speed_profile, tau) + warp * std::sin(2.0 * pi * tau) / (2.0 * pi);
    for (std::size_t m = 0; m < kTremorModes; ++m) s += surge[m] * std::sin((m + 2.0) * pi * tau);
    double size_shape = 0.0;
    for (std::size_t m = 0; m < b.signature.size(); ++m) {
      const double k = m + 2.0;
      s += b.signature[m].along * std::sin(k * pi * tau);
      size_shape += b.signature[m].size * std::sin(k * pi * tau + b.signature[m].size_phase);
    }
    const double u = 1.0 - s;
    double side = 0.0;
    for (std::size_t m = 0; m < kTremorModes; ++m) side += wobble[m] * std::sin((m + 1.0) * pi * s);
    side *= chord;
    for (std::size_t m = 0; m < b.signature.size(); ++m) {
      side += b.signature[m].side * w * std::sin((m + 2.0) * pi * s + b.signature[m].side_phase);
    }
    double nx = 0.0, ny = 0.0;
    for (const auto& n : noise) {
      const double arg = 2.0 * pi * n.freq * tau;
      nx += n.amp_x * std::sin(arg + n.phase_x);
      ny += n.amp_y * std::sin(arg + n.phase_y);
    }
    const double x = u * u * ax + 2.0 * u * s * mx + s * s * ex + side * px + nx;
    const double y = u * u * ay + 2.0 * u * s * my + s * s * ey + side * py + ny;
    const double size = size_level * (1.0 + size_bump * std::sin(pi * tau) + size_tilt * (tau - 0.5) + size_shape +
                                      detail::normal(rng, 0.0, kSizeNoise * j));
    t.points.push_back({time, detail::clamp(x, 0.0, w), detail::clamp(y, 0.0, h), std::max(0.0, size)});
  }
  return t;
}

/// Draws each swipe from a behaviour picked by the mixing weights.
inline std::vector<RawTrace> gen_user(const UserSpec& spec, const DeviceInfo& device, int n_swipes, Rng& rng,
                                      const std::string& profile_id = "user", Role role = Role::victim,
                                      int first_attempt = 0) {
  spec.validate();
  if (n_swipes < 1) throw ConfigError("gen_user: n_swipes must be >= 1");
  std::discrete_distribution<std::size_t> pick(spec.weights.begin(), spec.weights.end());
  std::vector<RawTrace> out;
  out.reserve(static_cast<std::size_t>(n_swipes));
  for (int i = 0; i < n_swipes; ++i) {
    const std::size_t b = spec.behaviours.size() == 1 ? 0 : pick(rng);
    RawTrace t = render_swipe(spec.behaviours[b], device, rng);
    t.profile_id = profile_id;
    t.role = role;
    t.attempt_index = first_attempt + i;
    out.push_back(std::move(t));
  }
  return out;
}

inline constexpr std::size_t kSignatureHarmonics = 8;
inline constexpr double kSignatureSide = 0.008;
inline constexpr double kSignatureAlong = 0.008;
inline constexpr double kSignatureSize = 0.06;

inline std::vector<Harmonic> random_signature(Rng& rng) {
  constexpr double pi = std::numbers::pi;
  std::vector<Harmonic> sig(kSignatureHarmonics);
  for (std::size_t m = 0; m < sig.size(); ++m) {
    const double k = m + 2.0;
    sig[m].side = detail::normal(rng, 0.0, kSignatureSide / std::sqrt(k));
    sig[m].side_phase = detail::uniform(rng, 0.0, 2.0 * pi);
    sig[m].along = detail::normal(rng, 0.0, kSignatureAlong / k);
    sig[m].size = detail::normal(rng, 0.0, kSignatureSize / std::sqrt(k));
    sig[m].size_phase = detail::uniform(rng, 0.0, 2.0 * pi);
  }
  return sig;
}

/// Traits a user keeps across all of their behaviours.
struct UserStyle {
  double y_level = 0.55;
  double duration_mean_ms = 400.0;
  SpeedProfile speed_profile = SpeedProfile::bell;
  double jitter_std = 0.02;
  double size_mean = 0.2;
  bool rightward = true;
};

inline UserStyle random_style(Rng& rng) {
  UserStyle s;
  s.y_level = detail::uniform(rng, 0.4, 0.7);
  s.duration_mean_ms = detail::uniform(rng, 250.0, 700.0);
  s.speed_profile = detail::uniform(rng, 0.0, 1.0) < 0.5 ? SpeedProfile::constant : SpeedProfile::bell;
  s.jitter_std = detail::uniform(rng, 0.018, 0.025);
  s.size_mean = detail::uniform(rng, 0.1, 0.35);
  s.rightward = detail::uniform(rng, 0.0, 1.0) < 0.75;
  return s;
}

/// Horizontal-prompt behaviour in a given style: the swipe moves at least
/// `min_dx` across the screen.
inline BehaviourSpec random_behaviour(Rng& rng, const UserStyle& style, double min_dx = 0.3) {
  BehaviourSpec b;
  const double dx = detail::uniform(rng, std::max(min_dx, 0.45), 0.65);
  const double x0 = detail::uniform(rng, 0.1, 0.9 - dx);
  const double y0 = style.y_level + detail::normal(rng, 0.0, 0.05);
  b.start = {style.rightward ? x0 : x0 + dx, y0};
  b.end = {style.rightward ? x0 + dx : x0, y0 + detail::normal(rng, 0.0, 0.06)};
  b.curvature = detail::uniform(rng, -0.2, 0.2);
  b.duration_mean_ms = style.duration_mean_ms * detail::uniform(rng, 0.85, 1.15);
  b.duration_std_ms = 0.1 * b.duration_mean_ms;
  b.speed_profile = style.speed_profile;
  b.jitter_std = style.jitter_std;
  b.size_mean = style.size_mean;
  b.size_std = 0.02;
  b.signature = random_signature(rng);
  return b;
}

inline BehaviourSpec random_behaviour(Rng& rng, double min_dx = 0.3) {
  const UserStyle style = random_style(rng);
  return random_behaviour(rng, style, min_dx);
}

/// Probability of a user having 1, 2, 3 or 4 behaviours.
inline constexpr std::array<double, 4> kBehaviourCountWeights{0.35, 0.4, 0.15, 0.1};

/// Separation between a user's behaviours, in units of their jitter_std.
inline constexpr double kBehaviourSeparation = 6.0;

/// Variant of a base behaviour: the whole path translated by
/// `separation` jitter-stds in a random direction (flipped if that would leave
/// the screen margin), curvature bent by the same amount and duration
/// perturbed. The horizontal extent is preserved.
inline BehaviourSpec behaviour_variant(const BehaviourSpec& base, Rng& rng,
                                       double separation = kBehaviourSeparation) {
  BehaviourSpec b = base;
  const double step = separation * base.jitter_std;
  const double angle = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const auto inside = [](const Point2& p) { return p.x >= 0.05 && p.x <= 0.95 && p.y >= 0.05 && p.y <= 0.95; };
  for (double sign : {1.0, -1.0}) {
    const double dx = sign * step * std::cos(angle);
    const double dy = sign * step * std::sin(angle);
    const Point2 s0{base.start.x + dx, base.start.y + dy};
    const Point2 e0{base.end.x + dx, base.end.y + dy};
    if (inside(s0) && inside(e0)) {
      b.start = s0;
      b.end = e0;
      break;
    }
  }
  b.curvature += (detail::uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * step;
  b.duration_mean_ms *= detail::uniform(rng, 0.85, 1.15);
  b.duration_std_ms = 0.1 * b.duration_mean_ms;
  return b;
}

inline UserSpec random_user(Rng& rng, int n_behaviours = 0) {
  if (n_behaviours <= 0) {
    std::discrete_distribution<int> count(kBehaviourCountWeights.begin(), kBehaviourCountWeights.end());
    n_behaviours = count(rng) + 1;
  }
  UserSpec u;
  u.behaviours.push_back(random_behaviour(rng));
  u.weights.push_back(detail::uniform(rng, 0.5, 1.5));
  double total = u.weights.back();
  for (int i = 1; i < n_behaviours; ++i) {
    u.behaviours.push_back(behaviour_variant(u.behaviours.front(), rng));
    u.weights.push_back(detail::uniform(rng, 0.5, 1.5));
    total += u.weights.back();
  }
  for (double& w : u.weights) w /= total;
  return u;
}

/// Blind attacker: an independent random user with a single behaviour on the
/// victim's device. No victim information enters the construction.
inline UserSpec blind_attacker_spec(Rng& rng) { return random_user(rng, 1); }

inline std::vector<RawTrace> gen_blind_attacker(const DeviceInfo& victim_device, int n_swipes, Rng& rng,
                                                const std::string& profile_id = "user", int first_attempt = 0) {
  const UserSpec spec = blind_attacker_spec(rng);
  return gen_user(spec, victim_device, n_swipes, rng, profile_id, Role::blind_attacker, first_attempt);
}

/// Over-the-shoulder attacker: each victim behaviour interpolated toward an
/// independent random behaviour by (1 - fidelity). The random behaviour is
/// mirrored to the victim's swipe direction, having watched it. The victim's
/// jitter part is inflated by (2 - fidelity), so fidelity 0 reproduces the
/// blind construction and fidelity 1 copies the victim exactly.
inline UserSpec ots_attacker_spec(const UserSpec& victim, double fidelity, Rng& rng) {
  if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw ConfigError("ots: fidelity must lie in [0, 1]");
  victim.validate();
  const UserSpec own = blind_attacker_spec(rng);
  if (fidelity == 0.0) return own;
  const bool victim_right = victim.behaviours.front().end.x > victim.behaviours.front().start.x;
  BehaviourSpec r = own.behaviours.front();
  if ((r.end.x > r.start.x) != victim_right) {
    r.start.x = 1.0 - r.start.x;
    r.end.x = 1.0 - r.end.x;
  }
  const double f = fidelity;
  const auto mix = [f](double v, double o) { return f * v + (1.0 - f) * o; };

  UserSpec out;
  out.weights = victim.weights;
  for (const auto& v : victim.behaviours) {
    BehaviourSpec b;
    b.start = {mix(v.start.x, r.start.x), mix(v.start.y, r.start.y)};
    b.end = {mix(v.end.x, r.end.x), mix(v.end.y, r.end.y)};
    b.curvature = mix(v.curvature, r.curvature);
    b.duration_mean_ms = mix(v.duration_mean_ms, r.duration_mean_ms);
    b.duration_std_ms = mix(v.duration_std_ms, r.duration_std_ms);
    b.speed_profile = f >= 0.5 ? v.speed_profile : r.speed_profile;
    b.jitter_std = f * v.jitter_std * (2.0 - f) + (1.0 - f) * r.jitter_std;
    b.size_mean = mix(v.size_mean, r.size_mean);
    b.size_std = mix(v.size_std, r.size_std);
    b.signature.resize(std::max(v.signature.size(), r.signature.size()));
    for (std::size_t m = 0; m < b.signature.size(); ++m) {
      const Harmonic hv = m < v.signature.size() ? v.signature[m] : Harmonic{};
      const Harmonic hr = m < r.signature.size() ? r.signature[m] : Harmonic{};
      b.signature[m] = {mix(hv.side, hr.side), f >= 0.5 ? hv.side_phase : hr.side_phase, mix(hv.along, hr.along),
                        mix(hv.size, hr.size), f >= 0.5 ? hv.size_phase : hr.size_phase};
    }
    if (b.start.x == b.end.x && b.start.y == b.end.y) b.end.x += 1e-3;
    out.behaviours.push_back(b);
  }
  return out;
}

inline std::vector<RawTrace> gen_ots_attacker(const UserSpec& victim, const DeviceInfo& victim_device,
                                              double fidelity, int n_swipes, Rng& rng,
                                              const std::string& profile_id = "user", int first_attempt = 0) {
  const UserSpec spec = ots_attacker_spec(victim, fidelity, rng);
  return gen_user(spec, victim_device, n_swipes, rng, profile_id, Role::ots_attacker, first_attempt);
}

inline DeviceInfo random_device(Rng& rng) {
  static constexpr std::array<std::array<int, 2>, 4> screens{{{1080, 1920}, {1440, 2560}, {720, 1280}, {1080, 2340}}};
  const auto i = std::uniform_int_distribution<std::size_t>(0, screens.size() - 1)(rng);
  return {screens[i][0], screens[i][1], std::round(detail::uniform(rng, 60.0, 200.0))};
}

struct PopulationConfig {
  int users = 20;
  int genuine = 40;   // victim swipes per user, split over two victim phases
  int attacks = 20;   // swipes per attacker
  double fidelity = 0.9;
  std::uint64_t seed = 1;
  int behaviours = 0;  // 0: drawn from kBehaviourCountWeights
};

struct SyntheticUser {
  std::string profile_id;
  UserSpec spec;
  DeviceInfo device;
};

struct Population {
  std::vector<SyntheticUser> users;
  std::vector<RawTrace> traces;
};

inline std::string user_id(int index) {
  std::string s = std::to_string(index);
  return "user" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

/// Session sequence per user: victim, blind attacker, victim (observed),
/// OTS attacker. Each user draws from its own derived seed.
inline Population gen_population(const PopulationConfig& cfg) {
  if (cfg.users < 1 || cfg.genuine < 2 || cfg.attacks < 1) throw ConfigError("population: bad sizes");
  Population pop;
  for (int u = 0; u < cfg.users; ++u) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(u)));
    SyntheticUser user{user_id(u), random_user(rng, cfg.behaviours), random_device(rng)};
    const int first = cfg.genuine / 2;
    auto v1 = gen_user(user.spec, user.device, first, rng, user.profile_id, Role::victim, 0);
    auto blind = gen_blind_attacker(user.device, cfg.attacks, rng, user.profile_id);
    auto v2 = gen_user(user.spec, user.device, cfg.genuine - first, rng, user.profile_id, Role::victim, first);
    auto ots = gen_ots_attacker(user.spec, user.device, cfg.fidelity, cfg.attacks, rng, user.profile_id);
    for (auto* batch : {&v1, &blind, &v2, &ots}) {
      for (auto& t : *batch) pop.traces.push_back(std::move(t));
    }
    pop.users.push_back(std::move(user));
  }
  return pop;
}

}  // namespace swipeguard::synth
