#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swipeguard/eval.hpp"
#include "swipeguard/model_io.hpp"
#include "swipeguard/synth.hpp"

namespace swipeguard {

/// Every configurable setting of a CLI run or service instance.
struct RunConfig {
  std::vector<ModelType> models = {ModelType::shrunk, ModelType::bayes_gauss, ModelType::dp_mixture};
  std::vector<Scenario> scenarios = {Scenario::blind, Scenario::ots};
  int grid = kDefaultGrid;
  int n_train = 10;
  std::vector<int> learning_curve;
  double quantile = 5.0;
  int enrollment_target = 10;
  std::uint64_t seed = 1;
  PriorSource prior_source = PriorSource::population;
  QualityPolicy quality;
  std::optional<double> shrunk_alpha;
  ShrinkageConfig shrinkage;
  NIWConfig niw;
  double dp_alpha = 1.0;
  double dp_sigma0_sq = 1.0;
  double dp_sigma_y_sq = 0.25;
  std::optional<double> dp_sigma_x_sq;
  GibbsSchedule schedule;
  synth::PopulationConfig synth;

  /// Model used for new service profiles: the first listed model.
  [[nodiscard]] ModelType primary_model() const { return models.front(); }

  void validate() const {
    if (models.empty()) throw ConfigError("config: models must not be empty");
    if (scenarios.empty()) throw ConfigError("config: scenarios must not be empty");
    if (grid < 2) throw ConfigError("config: grid must be >= 2");
    if (n_train < 2) throw ConfigError("config: n_train must be >= 2");
    for (int n : learning_curve) {
      if (n < 2) throw ConfigError("config: learning_curve sizes must be >= 2");
    }
    if (!(quantile >= 0.0 && quantile <= 100.0)) throw ConfigError("config: quantile must lie in [0, 100]");
    if (enrollment_target < 2) throw ConfigError("config: enrollment_target must be >= 2");
    if (quality.min_points < 2 || !(quality.min_duration_ms >= 0.0) || !(quality.min_path_frac >= 0.0)) {
      throw ConfigError("config: invalid quality policy");
    }
    if (shrunk_alpha && !(*shrunk_alpha >= 0.0 && *shrunk_alpha <= 1.0)) {
      throw ConfigError("config: shrinkage alpha must lie in [0, 1]");
    }
    shrinkage.validate();
    if (!(niw.k0 > 0.0) || !(niw.nu0_offset > 1.0) || !(niw.position_std > 0.0) || !(niw.other_variance > 0.0)) {
      throw ConfigError("config: invalid niw settings (k0 > 0, nu0_offset > 1, variances > 0)");
    }
    if (!(dp_alpha > 0.0) || !(dp_sigma0_sq > 0.0) || !(dp_sigma_y_sq > 0.0) ||
        (dp_sigma_x_sq && !(*dp_sigma_x_sq > 0.0))) {
      throw ConfigError("config: dp alpha and variances must be positive");
    }
    if (schedule.n_sweeps < 1 || schedule.convergence_window < 1) throw ConfigError("config: invalid Gibbs schedule");
    if (synth.users < 1 || synth.genuine < 2 || synth.attacks < 1 || synth.behaviours < 0) {
      throw ConfigError("config: invalid synth sizes");
    }
    if (!(synth.fidelity >= 0.0 && synth.fidelity <= 1.0)) throw ConfigError("config: fidelity must lie in [0, 1]");
  }

  [[nodiscard]] ModelConfig model_config() const {
    ModelConfig m;
    m.type = primary_model();
    m.shrunk_alpha = shrunk_alpha;
    m.shrinkage = shrinkage;
    m.niw = niw;
    m.dp_alpha = dp_alpha;
    m.dp_sigma0_sq = dp_sigma0_sq;
    m.dp_sigma_y_sq = dp_sigma_y_sq;
    m.dp_sigma_x_sq = dp_sigma_x_sq;
    m.schedule = schedule;
    m.seed = seed;
    m.quantile = quantile;
    m.grid = grid;
    return m;
  }

  [[nodiscard]] EvalConfig eval_config() const {
    EvalConfig e;
    e.models = models;
    e.scenarios = scenarios;
    e.n_train = n_train;
    e.prior_source = prior_source;
    e.model = model_config();
    return e;
  }
};

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + where + key + "'");
  }
}

template <class T>
void read_into(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + where + key + "' has the wrong type");
  }
}

inline void read_optional(const json& j, const char* key, std::optional<double>& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_null()) {
    out.reset();
  } else if (v.is_number()) {
    out = v.get<double>();
  } else {
    throw ConfigError("config: '" + where + key + "' must be a number or null");
  }
}

}  // namespace detail

inline json config_to_json(const RunConfig& c) {
  json models = json::array();
  for (ModelType m : c.models) models.push_back(std::string(to_string(m)));
  json scenarios = json::array();
  for (Scenario s : c.scenarios) scenarios.push_back(std::string(to_string(s)));
  return {
      {"models", std::move(models)},
      {"scenarios", std::move(scenarios)},
      {"grid", c.grid},
      {"n_train", c.n_train},
      {"learning_curve", c.learning_curve},
      {"quantile", c.quantile},
      {"enrollment_target", c.enrollment_target},
      {"seed", c.seed},
      {"prior_source", std::string(to_string(c.prior_source))},
      {"quality",
       {{"min_points", c.quality.min_points},
        {"min_duration_ms", c.quality.min_duration_ms},
        {"min_path_frac", c.quality.min_path_frac}}},
      {"shrinkage",
       {{"alpha", detail::optional_number(c.shrunk_alpha)},
        {"alpha_grid", c.shrinkage.alpha_grid},
        {"cv_folds", c.shrinkage.cv_folds}}},
      {"niw",
       {{"k0", c.niw.k0},
        {"nu0_offset", c.niw.nu0_offset},
        {"position_std", c.niw.position_std},
        {"other_variance", c.niw.other_variance}}},
      {"dp",
       {{"alpha", c.dp_alpha},
        {"sigma0_sq", c.dp_sigma0_sq},
        {"sigma_y_sq", c.dp_sigma_y_sq},
        {"sigma_x_sq", detail::optional_number(c.dp_sigma_x_sq)},
        {"n_sweeps", c.schedule.n_sweeps},
        {"convergence_window", c.schedule.convergence_window}}},
      {"synth",
       {{"users", c.synth.users},
        {"genuine", c.synth.genuine},
        {"attacks", c.synth.attacks},
        {"fidelity", c.synth.fidelity},
        {"behaviours", c.synth.behaviours}}},
  };
}

/// Overlays the keys present in `j` onto `base`. Unknown keys, wrong types and
/// out-of-range values raise ConfigError.
inline RunConfig apply_config_json(RunConfig base, const json& j) {
  using detail::read_into;
  using detail::reject_unknown;
  reject_unknown(j,
                 {"models", "scenarios", "grid", "n_train", "learning_curve", "quantile", "enrollment_target", "seed",
                  "prior_source", "quality", "shrinkage", "niw", "dp", "synth"},
                 "");
  RunConfig c = std::move(base);
  if (j.contains("models")) {
    std::vector<std::string> names;
    read_into(j, "models", names, "");
    c.models.clear();
    for (const auto& n : names) {
      const auto m = parse_model_type(n);
      if (!m) throw ConfigError("config: unknown model '" + n + "'");
      c.models.push_back(*m);
    }
  }
  if (j.contains("scenarios")) {
    std::vector<std::string> names;
    read_into(j, "scenarios", names, "");
    c.scenarios.clear();
    for (const auto& n : names) {
      const auto s = parse_scenario(n);
      if (!s) throw ConfigError("config: unknown scenario '" + n + "'");
      c.scenarios.push_back(*s);
    }
  }
  read_into(j, "grid", c.grid, "");
  read_into(j, "n_train", c.n_train, "");
  read_into(j, "learning_curve", c.learning_curve, "");
  read_into(j, "quantile", c.quantile, "");
  read_into(j, "enrollment_target", c.enrollment_target, "");
  read_into(j, "seed", c.seed, "");
  if (j.contains("prior_source")) {
    std::string s;
    read_into(j, "prior_source", s, "");
    const auto p = parse_prior_source(s);
    if (!p) throw ConfigError("config: unknown prior_source '" + s + "'");
    c.prior_source = *p;
  }
  if (j.contains("quality")) {
    const json& q = j["quality"];
    reject_unknown(q, {"min_points", "min_duration_ms", "min_path_frac"}, "quality.");
    read_into(q, "min_points", c.quality.min_points, "quality.");
    read_into(q, "min_duration_ms", c.quality.min_duration_ms, "quality.");
    read_into(q, "min_path_frac", c.quality.min_path_frac, "quality.");
  }
  if (j.contains("shrinkage")) {
    const json& s = j["shrinkage"];
    reject_unknown(s, {"alpha", "alpha_grid", "cv_folds"}, "shrinkage.");
    detail::read_optional(s, "alpha", c.shrunk_alpha, "shrinkage.");
    read_into(s, "alpha_grid", c.shrinkage.alpha_grid, "shrinkage.");
    read_into(s, "cv_folds", c.shrinkage.cv_folds, "shrinkage.");
  }
  if (j.contains("niw")) {
    const json& n = j["niw"];
    reject_unknown(n, {"k0", "nu0_offset", "position_std", "other_variance"}, "niw.");
    read_into(n, "k0", c.niw.k0, "niw.");
    read_into(n, "nu0_offset", c.niw.nu0_offset, "niw.");
    read_into(n, "position_std", c.niw.position_std, "niw.");
    read_into(n, "other_variance", c.niw.other_variance, "niw.");
  }
  if (j.contains("dp")) {
    const json& d = j["dp"];
    reject_unknown(d, {"alpha", "sigma0_sq", "sigma_y_sq", "sigma_x_sq", "n_sweeps", "convergence_window"}, "dp.");
    read_into(d, "alpha", c.dp_alpha, "dp.");
    read_into(d, "sigma0_sq", c.dp_sigma0_sq, "dp.");
    read_into(d, "sigma_y_sq", c.dp_sigma_y_sq, "dp.");
    detail::read_optional(d, "sigma_x_sq", c.dp_sigma_x_sq, "dp.");
    read_into(d, "n_sweeps", c.schedule.n_sweeps, "dp.");
    read_into(d, "convergence_window", c.schedule.convergence_window, "dp.");
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    reject_unknown(s, {"users", "genuine", "attacks", "fidelity", "behaviours"}, "synth.");
    read_into(s, "users", c.synth.users, "synth.");
    read_into(s, "genuine", c.synth.genuine, "synth.");
    read_into(s, "attacks", c.synth.attacks, "synth.");
    read_into(s, "fidelity", c.synth.fidelity, "synth.");
    read_into(s, "behaviours", c.synth.behaviours, "synth.");
  }
  c.validate();
  return c;
}

inline RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return apply_config_json(std::move(base), j);
}

}  // namespace swipeguard
