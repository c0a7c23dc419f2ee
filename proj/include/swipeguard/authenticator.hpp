#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "swipeguard/features.hpp"
#include "swipeguard/model_bayes.hpp"
#include "swipeguard/model_dp.hpp"
#include "swipeguard/model_shrunk.hpp"

namespace swipeguard {

enum class ModelType { shrunk, bayes_gauss, dp_mixture };

inline std::string_view to_string(ModelType m) {
  switch (m) {
    case ModelType::shrunk: return "shrunk";
    case ModelType::bayes_gauss: return "bayes_gauss";
    case ModelType::dp_mixture: return "dp_mixture";
  }
  return "shrunk";
}

inline std::optional<ModelType> parse_model_type(std::string_view s) {
  if (s == "shrunk") return ModelType::shrunk;
  if (s == "bayes_gauss") return ModelType::bayes_gauss;
  if (s == "dp_mixture") return ModelType::dp_mixture;
  return std::nullopt;
}

/// Display name used in report tables.
inline std::string_view display_name(ModelType m) {
  switch (m) {
    case ModelType::shrunk: return "Shrunk Covariance";
    case ModelType::bayes_gauss: return "Bayesian Gaussian";
    case ModelType::dp_mixture: return "Infinite Mixture";
  }
  return "";
}

using TrainedModel = std::variant<ShrunkModel, BayesGaussModel, DPMixtureModel>;

inline ModelType model_type_of(const TrainedModel& m) { return static_cast<ModelType>(m.index()); }

inline double score(const TrainedModel& m, const VectorXd& x) {
  return std::visit([&](const auto& model) { return model.score(x); }, m);
}

/// Training settings shared by the three model families.
struct ModelConfig {
  ModelType type = ModelType::bayes_gauss;
  std::optional<double> shrunk_alpha;  // unset: cross-validated
  ShrinkageConfig shrinkage;
  NIWConfig niw;
  double dp_alpha = 1.0;
  double dp_sigma0_sq = 1.0;
  double dp_sigma_y_sq = 0.25;
  std::optional<double> dp_sigma_x_sq;  // unset: same as dp_sigma_y_sq
  GibbsSchedule schedule;
  std::uint64_t seed = 0;
  double quantile = 5.0;  // calibration percentile
  int grid = kDefaultGrid;
};

/// What a model may borrow from the wider user population: standardization
/// statistics and, for the Bayesian model, an informative prior built on
/// standardized features. Without it every profile is cold-started.
struct PopulationContext {
  PopulationStats stats;
  std::optional<NIWParams> prior;
};

/// Trains the configured model on standardized features.
inline TrainedModel train_model(const ModelConfig& config, std::span<const VectorXd> features,
                                const std::optional<NIWParams>& prior) {
  if (features.empty()) throw DimensionError("train_model: no training samples");
  const Index d = features.front().size();
  switch (config.type) {
    case ModelType::shrunk:
      return train_shrunk(features, config.shrunk_alpha, config.shrinkage);
    case ModelType::bayes_gauss: {
      const NIWParams p = prior ? *prior : cold_start_prior(d, 2 * config.grid, config.niw);
      return train_bayes(p, features);
    }
    case ModelType::dp_mixture: {
      DPHyperParams h = DPHyperParams::defaults(d, config.dp_alpha, config.dp_sigma0_sq, config.dp_sigma_y_sq);
      if (config.dp_sigma_x_sq) h.sigma_x_sq = VectorXd::Constant(d, *config.dp_sigma_x_sq);
      return DPMixtureModel(h, train_dpgmm(features, h, config.schedule, config.seed));
    }
  }
  throw ConfigError("train_model: unknown model type");
}

/// q-th percentile (0..100) with linear interpolation between order
/// statistics at position q/100 * (N - 1).
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DimensionError("percentile: empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile: q must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Scores used for threshold calibration: leave-one-out for the shrunk model
/// (refit at the trained alpha) and the Bayesian model (posterior rebuilt
/// without the held-out sample), in-sample for the mixture.
inline std::vector<double> calibration_scores(const TrainedModel& model, std::span<const VectorXd> train) {
  std::vector<double> out;
  out.reserve(train.size());
  const auto leave_out = [&](std::size_t skip) {
    SampleSet rest;
    rest.reserve(train.size() - 1);
    for (std::size_t j = 0; j < train.size(); ++j) {
      if (j != skip) rest.push_back(train[j]);
    }
    return rest;
  };

  if (const auto* m = std::get_if<ShrunkModel>(&model)) {
    if (train.size() < 3) {
      for (const auto& x : train) out.push_back(m->score(x));
      return out;
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
      const SampleSet rest = leave_out(i);
      double s;
      try {
        s = train_shrunk(rest, m->alpha()).score(train[i]);
      } catch (const SingularModelError&) {
        s = m->score(train[i]);
      }
      out.push_back(s);
    }
  } else if (const auto* b = std::get_if<BayesGaussModel>(&model)) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      out.push_back(score_bayes(posterior_update(b->prior(), leave_out(i)), train[i]));
    }
  } else {
    const auto& dp = std::get<DPMixtureModel>(model);
    for (const auto& x : train) out.push_back(dp.score(x));
  }
  return out;
}

/// Decision threshold: q-th percentile of the calibration scores.
inline double calibrate(const TrainedModel& model, std::span<const VectorXd> train, double q = 5.0) {
  if (train.size() < 2) throw DimensionError("calibrate: need at least two training samples");
  const auto scores = calibration_scores(model, train);
  for (double s : scores) {
    if (!std::isfinite(s)) throw SingularModelError("calibrate: non-finite training score");
  }
  const double t = percentile(scores, q);
  if (!std::isfinite(t)) throw SingularModelError("calibrate: non-finite threshold");
  return t;
}

/// A trained model together with the standardization it expects.
struct ProfileModel {
  TrainedModel model;
  PopulationStats stats;
};

enum class ProfileState { enrolling, trained, failed_enrollment };

inline std::string_view to_string(ProfileState s) {
  switch (s) {
    case ProfileState::enrolling: return "enrolling";
    case ProfileState::trained: return "trained";
    case ProfileState::failed_enrollment: return "failed_enrollment";
  }
  return "enrolling";
}

inline std::optional<ProfileState> parse_profile_state(std::string_view s) {
  if (s == "enrolling") return ProfileState::enrolling;
  if (s == "trained") return ProfileState::trained;
  if (s == "failed_enrollment") return ProfileState::failed_enrollment;
  return std::nullopt;
}

struct Profile {
  std::string profile_id;
  ProfileState state = ProfileState::enrolling;
  std::vector<FeatureVector> enrolled_features;  // unstandardized, chronological
  std::optional<ProfileModel> model;
  std::optional<double> threshold;
  ModelType model_type = ModelType::bayes_gauss;
  int enrollment_target = 10;
  std::string failure_reason;

  [[nodiscard]] bool ready() const noexcept { return state == ProfileState::trained && model && threshold; }
};

struct Decision {
  double score = 0.0;
  double threshold = 0.0;
  bool accept = false;
  ModelType model_type = ModelType::bayes_gauss;
};

/// Standardization for a profile trained without population data: statistics
/// of its own enrollment samples, with position channels left in unit-square
/// coordinates so the cold-start prior applies to them directly.
inline PopulationStats cold_start_stats(std::span<const FeatureVector> features, int grid) {
  return keep_positions_raw(compute_stats(features), grid);
}

/// Trains and calibrates a profile model from unstandardized features.
inline std::pair<ProfileModel, double> fit_profile(std::span<const FeatureVector> raw, const ModelConfig& config,
                                                   const std::optional<PopulationContext>& population) {
  PopulationStats stats = population ? population->stats : cold_start_stats(raw, config.grid);
  std::optional<NIWParams> prior = population ? population->prior : std::nullopt;
  const auto z = standardize(raw, stats).vectors;
  TrainedModel model = train_model(config, z, prior);
  const double threshold = calibrate(model, z, config.quantile);
  return {ProfileModel{std::move(model), std::move(stats)}, threshold};
}

inline Profile new_profile(std::string id, ModelType type, int enrollment_target = 10) {
  if (enrollment_target < 2) throw ConfigError("profile: enrollment target must be at least 2");
  Profile p;
  p.profile_id = std::move(id);
  p.model_type = type;
  p.enrollment_target = enrollment_target;
  return p;
}

/// Adds one enrollment sample. Reaching the target trains the model and
/// calibrates the threshold; a training error moves the profile to
/// failed_enrollment. Enrolling into a non-enrolling profile throws.
inline Profile enroll(Profile profile, const FeatureVector& feature, const ModelConfig& config,
                      const std::optional<PopulationContext>& population = std::nullopt) {
  if (profile.state != ProfileState::enrolling) {
    throw StateError("enroll: profile '" + profile.profile_id + "' is " + std::string(to_string(profile.state)));
  }
  if (!profile.enrolled_features.empty() && profile.enrolled_features.front().size() != feature.size()) {
    throw DimensionError("enroll: feature dimension differs from earlier samples");
  }
  profile.enrolled_features.push_back(feature);
  if (static_cast<int>(profile.enrolled_features.size()) < profile.enrollment_target) return profile;

  ModelConfig cfg = config;
  cfg.type = profile.model_type;
  try {
    auto [model, threshold] = fit_profile(profile.enrolled_features, cfg, population);
    profile.model = std::move(model);
    profile.threshold = threshold;
    profile.state = ProfileState::trained;
  } catch (const Error& e) {
    profile.state = ProfileState::failed_enrollment;
    profile.failure_reason = e.what();
  }
  return profile;
}

inline double score_profile(const ProfileModel& pm, const FeatureVector& raw) {
  return score(pm.model, apply_stats(raw, pm.stats));
}

inline Decision authenticate(const Profile& profile, const FeatureVector& feature) {
  if (!profile.ready()) {
    throw NotReadyError("authenticate: profile '" + profile.profile_id + "' is not trained");
  }
  Decision d;
  d.score = score_profile(*profile.model, feature);
  d.threshold = *profile.threshold;
  d.accept = d.score >= d.threshold;
  d.model_type = profile.model_type;
  return d;
}

}  // namespace swipeguard
