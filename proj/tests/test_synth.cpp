#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "swipeguard/eval.hpp"
#include "swipeguard/synth.hpp"
#include "swipeguard/trace_io.hpp"

using namespace swipeguard;
using namespace swipeguard::synth;

namespace {

double channel_mean(const std::vector<FeatureVector>& fs, Channel c, int g) {
  double s = 0.0;
  for (const auto& f : fs) s += f[channel_offset(c, kDefaultGrid) + g];
  return s / static_cast<double>(fs.size());
}

std::vector<FeatureVector> features_of(const std::vector<RawTrace>& traces) {
  std::vector<FeatureVector> out;
  for (const auto& t : traces) out.push_back(extract_features(normalize(t)));
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::string dump(const std::vector<RawTrace>& traces) {
  std::ostringstream os;
  write_traces(os, traces);
  return os.str();
}

}  // namespace

TEST(Synth, NoiselessBehaviourIsReproducible) {
  Rng setup(1);
  BehaviourSpec b = random_behaviour(setup);
  b.jitter_std = 0.0;
  b.duration_std_ms = 0.0;
  b.size_std = 0.0;
  const DeviceInfo dev{1080, 1920, 120.0};
  Rng rng(5);
  const auto first = extract_features(normalize(render_swipe(b, dev, rng)));
  for (int i = 0; i < 5; ++i) {
    const auto again = extract_features(normalize(render_swipe(b, dev, rng)));
    EXPECT_LT((again - first).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Synth, OppositeDirectionsSeparateOnAngle) {
  Rng rng(2);
  UserStyle right = random_style(rng);
  right.rightward = true;
  UserStyle left = right;
  left.rightward = false;
  const DeviceInfo dev{1080, 1920, 60.0};
  UserSpec a{{random_behaviour(rng, right)}, {1.0}};
  UserSpec b{{random_behaviour(rng, left)}, {1.0}};
  const auto fa = features_of(gen_user(a, dev, 30, rng));
  const auto fb = features_of(gen_user(b, dev, 30, rng));

  // Two-means on the mean heading, seeded at the first sample of each group.
  std::vector<double> heading;
  for (const auto* set : {&fa, &fb}) {
    for (const auto& f : *set) heading.push_back(f.segment(channel_offset(Channel::angle, kDefaultGrid), kDefaultGrid).mean());
  }
  double c0 = heading.front(), c1 = heading.back();
  std::vector<int> label(heading.size());
  for (int iter = 0; iter < 20; ++iter) {
    double s0 = 0, s1 = 0;
    int n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < heading.size(); ++i) {
      label[i] = std::abs(heading[i] - c0) <= std::abs(heading[i] - c1) ? 0 : 1;
      (label[i] ? s1 : s0) += heading[i];
      (label[i] ? n1 : n0) += 1;
    }
    c0 = s0 / n0;
    c1 = s1 / n1;
  }
  for (std::size_t i = 0; i < heading.size(); ++i) EXPECT_EQ(label[i], i < fa.size() ? 0 : 1);
}

TEST(Synth, SameSeedSameBytesDifferentSeedDifferentBytes) {
  PopulationConfig cfg;
  cfg.users = 4;
  cfg.genuine = 10;
  cfg.attacks = 5;
  cfg.seed = 42;
  const std::string a = dump(gen_population(cfg).traces);
  EXPECT_EQ(a, dump(gen_population(cfg).traces));
  cfg.seed = 43;
  EXPECT_NE(a, dump(gen_population(cfg).traces));
}

TEST(Synth, UserStreamsAreIndependentOfPopulationSize) {
  PopulationConfig small;
  small.users = 2;
  small.genuine = 6;
  small.attacks = 3;
  PopulationConfig big = small;
  big.users = 5;
  const auto a = gen_population(small);
  const auto b = gen_population(big);
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    EXPECT_EQ(trace_to_json(a.traces[i]), trace_to_json(b.traces[i]));
  }
}

TEST(Synth, BlindAttackersAreUncorrelatedWithVictims) {
  std::vector<double> vx, ax, vy, ay, vs, as;
  for (std::uint64_t pair = 0; pair < 100; ++pair) {
    Rng rng(derive_seed(900, pair));
    const UserSpec victim = random_user(rng, 1);
    const DeviceInfo dev = random_device(rng);
    const auto fv = features_of(gen_user(victim, dev, 10, rng));
    const auto fa = features_of(gen_blind_attacker(dev, 10, rng));
    vx.push_back(channel_mean(fv, Channel::x, 0));
    ax.push_back(channel_mean(fa, Channel::x, 0));
    vy.push_back(channel_mean(fv, Channel::y, 5));
    ay.push_back(channel_mean(fa, Channel::y, 5));
    vs.push_back(channel_mean(fv, Channel::speed, 5));
    as.push_back(channel_mean(fa, Channel::speed, 5));
  }
  EXPECT_LT(std::abs(pearson(vx, ax)), 0.2);
  EXPECT_LT(std::abs(pearson(vy, ay)), 0.2);
  EXPECT_LT(std::abs(pearson(vs, as)), 0.2);
}

TEST(Synth, EverySwipeHonoursTheHorizontalPrompt) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PopulationConfig cfg;
    cfg.users = 10;
    cfg.seed = seed;
    cfg.fidelity = 0.5;
    for (const auto& t : gen_population(cfg).traces) {
      const double dx = (t.points.back().x_px - t.points.front().x_px) / t.device.width_px;
      ASSERT_GE(std::abs(dx), 0.2) << t.profile_id << " " << to_string(t.role) << " " << t.attempt_index;
    }
  }
}

TEST(Synth, GeneratedTracesPassTheQualityGate) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PopulationConfig cfg;
    cfg.users = 10;
    cfg.seed = seed;
    const auto ds = build_dataset(gen_population(cfg).traces);
    EXPECT_TRUE(ds.rejected.empty()) << "seed " << seed;
    for (const auto& p : ds.profiles) {
      EXPECT_EQ(p.genuine.size(), 40u);
      EXPECT_EQ(p.blind.size(), 20u);
      EXPECT_EQ(p.ots.size(), 20u);
    }
  }
}

TEST(Synth, FidelityZeroIsTheBlindConstruction) {
  Rng setup(3);
  const UserSpec victim = random_user(setup, 2);
  const DeviceInfo dev = random_device(setup);
  Rng r1(77), r2(77);
  const auto ots = gen_ots_attacker(victim, dev, 0.0, 8, r1, "v");
  const auto blind = gen_blind_attacker(dev, 8, r2, "v");
  ASSERT_EQ(ots.size(), blind.size());
  for (std::size_t i = 0; i < ots.size(); ++i) {
    ASSERT_EQ(ots[i].points.size(), blind[i].points.size());
    for (std::size_t k = 0; k < ots[i].points.size(); ++k) {
      EXPECT_EQ(ots[i].points[k].x_px, blind[i].points[k].x_px);
      EXPECT_EQ(ots[i].points[k].y_px, blind[i].points[k].y_px);
    }
  }
}

TEST(Synth, FidelityOneCopiesTheVictim) {
  Rng setup(4);
  const UserSpec victim = random_user(setup, 1);
  Rng rng(8);
  const UserSpec copy = ots_attacker_spec(victim, 1.0, rng);
  ASSERT_EQ(copy.behaviours.size(), 1u);
  const auto& v = victim.behaviours[0];
  const auto& c = copy.behaviours[0];
  EXPECT_EQ(c.start.x, v.start.x);
  EXPECT_EQ(c.end.y, v.end.y);
  EXPECT_EQ(c.jitter_std, v.jitter_std);
  EXPECT_EQ(c.duration_mean_ms, v.duration_mean_ms);
  EXPECT_EQ(c.signature[3].side, v.signature[3].side);

  // Attacker swipes then fall inside the victim's genuine spread.
  const DeviceInfo dev = random_device(setup);
  const auto genuine = features_of(gen_user(victim, dev, 60, rng));
  const auto attack = features_of(gen_ots_attacker(victim, dev, 1.0, 40, rng));
  const std::vector<FeatureVector> train(genuine.begin(), genuine.begin() + 40);
  const auto z = standardize(train);
  const auto model = train_shrunk(z.vectors, 0.0);
  std::vector<double> genuine_d;
  for (std::size_t i = 40; i < genuine.size(); ++i) genuine_d.push_back(model.mahalanobis_sq(apply_stats(genuine[i], z.stats)));
  const double cut = percentile(genuine_d, 99.0);
  int inside = 0;
  for (const auto& f : attack) inside += model.mahalanobis_sq(apply_stats(f, z.stats)) <= cut ? 1 : 0;
  EXPECT_GE(inside, 36);
}

TEST(Synth, HigherFidelityNeverLowersOtsEer) {
  std::array<double, 3> mean_eer{};
  const std::array<double, 3> fidelities{0.0, 0.5, 0.9};
  for (std::size_t f = 0; f < fidelities.size(); ++f) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      PopulationConfig cfg;
      cfg.users = 20;
      cfg.seed = seed;
      cfg.fidelity = fidelities[f];
      EvalConfig ec;
      ec.scenarios = {Scenario::ots};
      ec.models = {ModelType::bayes_gauss};
      const auto report = run_experiment(build_dataset(gen_population(cfg).traces), ec);
      mean_eer[f] += report.aggregates.front().mean / 10.0;
    }
  }
  EXPECT_LE(mean_eer[0], mean_eer[1]);
  EXPECT_LE(mean_eer[1], mean_eer[2]);
}

TEST(Synth, BehaviourVariantKeepsExtentAndMargin) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const BehaviourSpec base = random_behaviour(rng);
    const BehaviourSpec v = behaviour_variant(base, rng);
    EXPECT_NEAR(v.end.x - v.start.x, base.end.x - base.start.x, 1e-12);
    EXPECT_NEAR(v.end.y - v.start.y, base.end.y - base.start.y, 1e-12);
  }
}

TEST(Synth, InvalidSettingsThrow) {
  Rng rng(1);
  const UserSpec u = random_user(rng, 1);
  EXPECT_THROW(ots_attacker_spec(u, 1.5, rng), ConfigError);
  UserSpec bad = u;
  bad.weights = {0.5};
  bad.behaviours.push_back(bad.behaviours.front());
  EXPECT_THROW(bad.validate(), ConfigError);
  PopulationConfig cfg;
  cfg.users = 0;
  EXPECT_THROW(gen_population(cfg), ConfigError);
  EXPECT_EQ(user_id(7), "user007");
  EXPECT_EQ(user_id(1234), "user1234");
}
