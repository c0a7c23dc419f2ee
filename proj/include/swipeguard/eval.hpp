#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swipeguard/authenticator.hpp"
#include "swipeguard/features.hpp"

namespace swipeguard {

enum class Scenario { blind, ots };

inline std::string_view to_string(Scenario s) { return s == Scenario::blind ? "blind" : "ots"; }

inline std::optional<Scenario> parse_scenario(std::string_view s) {
  if (s == "blind") return Scenario::blind;
  if (s == "ots") return Scenario::ots;
  return std::nullopt;
}

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

/// Error counts at one candidate threshold.
struct OperatingPoint {
  double threshold = 0.0;
  std::size_t false_rejects = 0;  // genuine scores below the threshold
  std::size_t false_accepts = 0;  // impostor scores at or above the threshold
};

/// Per-user equal error rate in percent.
///
/// Candidate thresholds are the distinct scores plus -inf and +inf. The
/// threshold minimizing |FAR - FRR| is chosen (smallest on ties) and the EER
/// is the mean of FAR and FRR there.
inline double compute_eer(const ScoreSet& scores) {
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw DimensionError("compute_eer: both score lists must be non-empty");
  }
  std::vector<double> g = scores.genuine;
  std::vector<double> imp = scores.impostor;
  std::sort(g.begin(), g.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> cand;
  cand.reserve(g.size() + imp.size() + 2);
  cand.push_back(-std::numeric_limits<double>::infinity());
  cand.insert(cand.end(), g.begin(), g.end());
  cand.insert(cand.end(), imp.begin(), imp.end());
  cand.push_back(std::numeric_limits<double>::infinity());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  const auto ng = static_cast<std::int64_t>(g.size());
  const auto ni = static_cast<std::int64_t>(imp.size());
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  OperatingPoint best;
  for (double t : cand) {
    const auto fr = static_cast<std::int64_t>(std::lower_bound(g.begin(), g.end(), t) - g.begin());
    const auto fa = ni - static_cast<std::int64_t>(std::lower_bound(imp.begin(), imp.end(), t) - imp.begin());
    // |FA/ni - FR/ng| scaled by ni*ng keeps the comparison exact.
    const std::int64_t gap = std::llabs(fa * ng - fr * ni);
    if (gap < best_gap) {
      best_gap = gap;
      best = {t, static_cast<std::size_t>(fr), static_cast<std::size_t>(fa)};
    }
  }
  return 50.0 * (static_cast<double>(best.false_accepts) / static_cast<double>(ni) +
                 static_cast<double>(best.false_rejects) / static_cast<double>(ng));
}

// --- datasets -----------------------------------------------------------------

/// Feature vectors of one session, grouped by role. Genuine samples are in
/// chronological (attempt_index) order.
struct ProfileData {
  std::string profile_id;
  std::vector<FeatureVector> genuine;
  std::vector<FeatureVector> blind;
  std::vector<FeatureVector> ots;

  [[nodiscard]] const std::vector<FeatureVector>& impostors(Scenario s) const {
    return s == Scenario::blind ? blind : ots;
  }
};

struct Rejection {
  std::string profile_id;
  Role role = Role::victim;
  int attempt_index = 0;
  std::string reason;
};

struct Dataset {
  std::vector<ProfileData> profiles;  // sorted by profile_id
  std::vector<Rejection> rejected;
  int grid = kDefaultGrid;
};

/// Quality-gates each trace and extracts its features. Traces failing the gate
/// or the structural checks are recorded in `rejected`.
inline Dataset build_dataset(std::span<const RawTrace> traces, const QualityPolicy& policy = {},
                             int grid = kDefaultGrid) {
  struct Item {
    int attempt;
    FeatureVector f;
  };
  std::map<std::string, std::array<std::vector<Item>, 3>> grouped;
  Dataset ds;
  ds.grid = grid;
  for (const auto& t : traces) {
    auto& slot = grouped[t.profile_id];
    (void)slot;
    try {
      const QualityVerdict v = quality_gate(t, policy);
      if (!v.accepted()) {
        ds.rejected.push_back({t.profile_id, t.role, t.attempt_index, std::string(to_string(v.primary()))});
        continue;
      }
      const NormalizedTrace n = normalize(t);
      if (n.t.size() < 4) {
        ds.rejected.push_back({t.profile_id, t.role, t.attempt_index, "too_few_points"});
        continue;
      }
      grouped[t.profile_id][static_cast<std::size_t>(t.role)].push_back({t.attempt_index, extract_features(n, grid)});
    } catch (const Error& e) {
      ds.rejected.push_back({t.profile_id, t.role, t.attempt_index, std::string("structural: ") + e.what()});
    }
  }
  for (auto& [id, roles] : grouped) {
    ProfileData p;
    p.profile_id = id;
    auto take = [](std::vector<Item>& items) {
      std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.attempt < b.attempt; });
      std::vector<FeatureVector> out;
      out.reserve(items.size());
      for (auto& i : items) out.push_back(std::move(i.f));
      return out;
    };
    p.genuine = take(roles[static_cast<std::size_t>(Role::victim)]);
    p.blind = take(roles[static_cast<std::size_t>(Role::blind_attacker)]);
    p.ots = take(roles[static_cast<std::size_t>(Role::ots_attacker)]);
    ds.profiles.push_back(std::move(p));
  }
  return ds;
}

// --- experiment ---------------------------------------------------------------

enum class PriorSource { population, cold_start };

inline std::string_view to_string(PriorSource p) { return p == PriorSource::population ? "population" : "cold_start"; }

inline std::optional<PriorSource> parse_prior_source(std::string_view s) {
  if (s == "population") return PriorSource::population;
  if (s == "cold_start") return PriorSource::cold_start;
  return std::nullopt;
}

struct EvalConfig {
  std::vector<ModelType> models = {ModelType::shrunk, ModelType::bayes_gauss, ModelType::dp_mixture};
  std::vector<Scenario> scenarios = {Scenario::blind, Scenario::ots};
  int n_train = 10;
  PriorSource prior_source = PriorSource::population;
  ModelConfig model;  // type is overridden per run
};

struct UserEER {
  std::string profile_id;
  ModelType model = ModelType::shrunk;
  Scenario scenario = Scenario::blind;
  double eer = 0.0;

  bool operator==(const UserEER&) const = default;
};

struct FailedProfile {
  std::string profile_id;
  std::string reason;

  bool operator==(const FailedProfile&) const = default;
};

struct Aggregate {
  ModelType model = ModelType::shrunk;
  Scenario scenario = Scenario::blind;
  double mean = 0.0;
  double median = 0.0;
  std::size_t users = 0;

  bool operator==(const Aggregate&) const = default;
};

struct CurvePoint {
  ModelType model = ModelType::shrunk;
  Scenario scenario = Scenario::blind;
  int n_train = 0;
  double mean = 0.0;
  double median = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct EvalReport {
  std::vector<UserEER> per_user;
  std::vector<Aggregate> aggregates;
  std::vector<FailedProfile> failed_profiles;
  std::vector<CurvePoint> learning_curve;
  std::vector<std::string> nonconverged;  // mixture profiles that hit the sweep budget
  nlohmann::json config_echo = nlohmann::json::object();

  bool operator==(const EvalReport&) const = default;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw DimensionError("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw DimensionError("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Mean and median per (model, scenario), recomputed from per-user rows.
inline std::vector<Aggregate> aggregate(const std::vector<UserEER>& rows, std::span<const ModelType> models,
                                        std::span<const Scenario> scenarios) {
  std::vector<Aggregate> out;
  for (ModelType m : models) {
    for (Scenario s : scenarios) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.model == m && r.scenario == s) v.push_back(r.eer);
      }
      if (v.empty()) continue;
      out.push_back({m, s, mean_of(v), median_of(v), v.size()});
    }
  }
  return out;
}

namespace detail {

/// Raw-space summaries of each profile's population samples, so leave-one-
/// profile-out statistics and priors can be formed by subtraction.
struct PopulationSummary {
  std::vector<Scatter> per_profile;  // count 0 when a profile has no samples
  VectorXd sum;
  VectorXd sum_sq;
  MatrixXd scatter;
  double dof = 0.0;
  std::size_t count = 0;
  double alpha = 1.0;
};

inline PopulationSummary summarize_population(const Dataset& ds, std::size_t n_pop, const ModelConfig& cfg) {
  PopulationSummary s;
  const Index d = static_cast<Index>(kChannelCount * ds.grid);
  s.sum = VectorXd::Zero(d);
  s.sum_sq = VectorXd::Zero(d);
  s.scatter = MatrixXd::Zero(d, d);
  std::vector<FeatureVector> all;
  for (const auto& p : ds.profiles) {
    const std::size_t take = std::min(n_pop, p.genuine.size());
    if (take == 0) {
      s.per_profile.push_back({});
      continue;
    }
    std::span<const FeatureVector> samples(p.genuine.data(), take);
    Scatter sc = scatter_of(samples);
    for (const auto& x : samples) {
      s.sum += x;
      s.sum_sq += x.cwiseAbs2();
      all.push_back(x);
    }
    s.count += take;
    s.scatter += sc.scatter;
    s.dof += static_cast<double>(take - 1);
    s.per_profile.push_back(std::move(sc));
  }
  if (all.empty()) return s;

  // Shrinkage weight selected once, on globally standardized samples.
  const PopulationStats global = compute_stats(all);
  std::vector<SampleSet> z;
  for (const auto& p : ds.profiles) {
    const std::size_t take = std::min(n_pop, p.genuine.size());
    if (take == 0) continue;
    SampleSet set;
    for (std::size_t i = 0; i < take; ++i) set.push_back(apply_stats(p.genuine[i], global));
    z.push_back(std::move(set));
  }
  try {
    s.alpha = select_alpha(z, cfg.shrinkage, ShrinkageScoring::pooled).alpha;
  } catch (const Error&) {
    s.alpha = 0.0;
  }
  return s;
}

/// Population context built from every profile except `index` (all of them
/// when `index` is unset).
inline std::optional<PopulationContext> context_excluding(const PopulationSummary& s,
                                                          std::optional<std::size_t> index, const ModelConfig& cfg) {
  const Scatter none{};
  const Scatter& own = index ? s.per_profile[*index] : none;
  const double n = static_cast<double>(s.count - own.count);
  if (n < 2.0) return std::nullopt;
  VectorXd sum = s.sum;
  VectorXd sum_sq = s.sum_sq;
  MatrixXd scatter = s.scatter;
  double dof = s.dof;
  if (own.count > 0) {
    sum -= own.mean * static_cast<double>(own.count);
    scatter -= own.scatter;
    dof -= static_cast<double>(own.count - 1);
  }
  PopulationContext ctx;
  ctx.stats.mean = sum / n;
  if (own.count > 0) {
    // Own samples' second moment: scatter + count * mean^2 (per dimension).
    sum_sq -= own.scatter.diagonal() + static_cast<double>(own.count) * own.mean.cwiseAbs2();
  }
  const VectorXd var = (sum_sq / n - ctx.stats.mean.cwiseAbs2()).cwiseMax(0.0);
  ctx.stats.std = var.cwiseSqrt().cwiseMax(kMinStd);
  if (dof >= 1.0) {
    const Index d = ctx.stats.mean.size();
    const VectorXd inv = ctx.stats.std.cwiseInverse();
    const MatrixXd pooled_z = inv.asDiagonal() * (scatter / dof) * inv.asDiagonal();
    NIWParams prior;
    prior.mu0 = VectorXd::Zero(d);  // grand mean of the same samples, standardized
    prior.k0 = cfg.niw.k0;
    prior.nu0 = static_cast<double>(d) + cfg.niw.nu0_offset;
    prior.psi0 = (prior.nu0 - static_cast<double>(d) - 1.0) * shrink_cov(pooled_z, s.alpha);
    try {
      prior.validate();
      ctx.prior = std::move(prior);
    } catch (const Error&) {
    }
  }
  return ctx;
}

struct ProfileOutcome {
  std::vector<UserEER> rows;
  std::vector<FailedProfile> failures;
  bool nonconverged = false;
};

inline ProfileOutcome evaluate_profile(const ProfileData& p, ModelType type, int n_train, std::size_t holdout_start,
                                       std::span<const Scenario> scenarios, const ModelConfig& base,
                                       const std::optional<PopulationContext>& ctx) {
  ProfileOutcome out;
  const auto fail = [&](const std::string& why) { out.failures.push_back({p.profile_id, why}); };
  if (p.genuine.size() < holdout_start + 1) {
    fail("insufficient genuine samples: " + std::to_string(p.genuine.size()) + " < " +
         std::to_string(holdout_start + 1));
    return out;
  }
  ModelConfig cfg = base;
  cfg.type = type;
  std::span<const FeatureVector> train(p.genuine.data(), static_cast<std::size_t>(n_train));

  PopulationStats stats = ctx ? ctx->stats : cold_start_stats(train, cfg.grid);
  std::optional<NIWParams> prior = ctx ? ctx->prior : std::nullopt;
  std::optional<TrainedModel> model;
  try {
    model = train_model(cfg, standardize(train, stats).vectors, prior);
  } catch (const Error& e) {
    fail(std::string(to_string(type)) + " training failed: " + e.what());
    return out;
  }
  if (const auto* dp = std::get_if<DPMixtureModel>(&*model)) out.nonconverged = !dp->state().converged;

  ScoreSet base_scores;
  for (std::size_t i = holdout_start; i < p.genuine.size(); ++i) {
    base_scores.genuine.push_back(score(*model, apply_stats(p.genuine[i], stats)));
  }
  for (Scenario s : scenarios) {
    const auto& imp = p.impostors(s);
    if (imp.empty()) {
      fail(std::string("no ") + std::string(to_string(s)) + " impostor samples");
      continue;
    }
    ScoreSet set{base_scores.genuine, {}};
    for (const auto& x : imp) set.impostor.push_back(score(*model, apply_stats(x, stats)));
    out.rows.push_back({p.profile_id, type, s, compute_eer(set)});
  }
  return out;
}

inline bool eer_less(const UserEER& a, const UserEER& b) {
  if (a.model != b.model) return a.model < b.model;
  if (a.scenario != b.scenario) return a.scenario < b.scenario;
  return a.profile_id < b.profile_id;
}

}  // namespace detail

/// Standardization and prior from the first `n_pop` genuine samples of every
/// profile in a dataset, for scoring profiles outside it.
inline std::optional<PopulationContext> population_context(const Dataset& ds, const ModelConfig& cfg,
                                                           std::size_t n_pop = std::numeric_limits<std::size_t>::max()) {
  return detail::context_excluding(detail::summarize_population(ds, n_pop, cfg), std::nullopt, cfg);
}

/// Per-user EERs for each configured model and scenario, training on the
/// first `n_train` genuine samples and testing on genuine samples from
/// `holdout_start` on (defaults to n_train) plus every impostor sample.
inline EvalReport run_experiment(const Dataset& ds, const EvalConfig& config,
                                 std::optional<std::size_t> holdout_start = std::nullopt) {
  if (config.n_train < 2) throw ConfigError("run_experiment: n_train must be >= 2");
  const std::size_t holdout = holdout_start.value_or(static_cast<std::size_t>(config.n_train));
  if (holdout < static_cast<std::size_t>(config.n_train)) throw ConfigError("run_experiment: holdout overlaps training");

  std::optional<detail::PopulationSummary> summary;
  if (config.prior_source == PriorSource::population) summary = detail::summarize_population(ds, holdout, config.model);

  EvalReport report;
  std::map<std::string, std::vector<std::string>> failures;
  for (std::size_t i = 0; i < ds.profiles.size(); ++i) {
    const auto& p = ds.profiles[i];
    std::optional<PopulationContext> ctx;
    if (summary) ctx = detail::context_excluding(*summary, i, config.model);
    for (ModelType m : config.models) {
      auto o = detail::evaluate_profile(p, m, config.n_train, holdout, config.scenarios, config.model, ctx);
      report.per_user.insert(report.per_user.end(), o.rows.begin(), o.rows.end());
      for (auto& f : o.failures) {
        auto& list = failures[f.profile_id];
        if (std::find(list.begin(), list.end(), f.reason) == list.end()) list.push_back(f.reason);
      }
      if (o.nonconverged) report.nonconverged.push_back(p.profile_id);
    }
  }
  std::sort(report.per_user.begin(), report.per_user.end(), detail::eer_less);
  for (auto& [id, reasons] : failures) {
    std::string joined;
    for (const auto& r : reasons) joined += (joined.empty() ? "" : "; ") + r;
    report.failed_profiles.push_back({id, joined});
  }
  if (report.per_user.empty()) throw DimensionError("run_experiment: no profile survived the preconditions");
  report.aggregates = aggregate(report.per_user, config.models, config.scenarios);
  return report;
}

/// EER against training-set size with one fixed holdout: genuine samples after
/// the first max(n_range) are the test set at every point.
inline EvalReport learning_curve(const Dataset& ds, const EvalConfig& config, std::span<const int> n_range) {
  if (n_range.empty()) throw ConfigError("learning_curve: empty range");
  const int n_max = *std::max_element(n_range.begin(), n_range.end());
  EvalReport report;
  for (int n : n_range) {
    EvalConfig cfg = config;
    cfg.n_train = n;
    EvalReport r = run_experiment(ds, cfg, static_cast<std::size_t>(n_max));
    for (const auto& a : r.aggregates) report.learning_curve.push_back({a.model, a.scenario, n, a.mean, a.median});
    if (n == n_max) {
      report.per_user = std::move(r.per_user);
      report.aggregates = std::move(r.aggregates);
      report.failed_profiles = std::move(r.failed_profiles);
      report.nonconverged = std::move(r.nonconverged);
    }
  }
  std::stable_sort(report.learning_curve.begin(), report.learning_curve.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.model != b.model) return a.model < b.model;
    if (a.scenario != b.scenario) return a.scenario < b.scenario;
    return a.n_train < b.n_train;
  });
  return report;
}

}  // namespace swipeguard
