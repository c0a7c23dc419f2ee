#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "swipeguard/authenticator.hpp"
#include "swipeguard/errors.hpp"
#include "swipeguard/trace_io.hpp"

namespace swipeguard {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr int kProfileSchemaVersion = 1;

namespace io {

inline json vec_to_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

/// Nested row arrays (row-major).
inline json mat_to_json(const MatrixXd& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw StructuralError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline double num(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw StructuralError(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

inline std::string str(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw StructuralError(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

inline VectorXd vec_from_json(const json& j) {
  if (!j.is_array()) throw StructuralError("expected a numeric array");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw StructuralError("expected a numeric array");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline MatrixXd mat_from_json(const json& j) {
  if (!j.is_array()) throw StructuralError("expected an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const VectorXd row = vec_from_json(j[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw StructuralError("ragged matrix rows");
    m.row(r) = row.transpose();
  }
  return m;
}

inline void check_version(const json& j, int expected, const char* what) {
  const json& v = field(j, "schema_version");
  if (!v.is_number_integer() || v.get<int>() != expected) {
    throw StructuralError(std::string(what) + ": unsupported schema_version");
  }
}

}  // namespace io

inline json stats_to_json(const PopulationStats& s) {
  return {{"mean", io::vec_to_json(s.mean)}, {"std", io::vec_to_json(s.std)}};
}

inline PopulationStats stats_from_json(const json& j) {
  PopulationStats s{io::vec_from_json(io::field(j, "mean")), io::vec_from_json(io::field(j, "std"))};
  if (s.mean.size() != s.std.size()) throw StructuralError("feature_stats: mean and std differ in length");
  return s;
}

inline json model_to_json(const ShrunkModel& m) {
  json ll = json::array();
  for (double v : m.train_loglik()) ll.push_back(v);
  return {{"model_type", "shrunk"},
          {"alpha", m.alpha()},
          {"mean", io::vec_to_json(m.gaussian().mean)},
          {"cov", io::mat_to_json(m.gaussian().cov)},
          {"train_loglik", std::move(ll)}};
}

inline json model_to_json(const BayesGaussModel& m) {
  const auto& p = m.prior();
  const auto& q = m.posterior();
  return {{"model_type", "bayes_gauss"},
          {"mu0", io::vec_to_json(p.mu0)},
          {"k0", p.k0},
          {"nu0", p.nu0},
          {"psi0", io::mat_to_json(p.psi0)},
          {"muN", io::vec_to_json(q.mu)},
          {"kN", q.k},
          {"nuN", q.nu},
          {"psiN", io::mat_to_json(q.psi)},
          {"n_obs", q.n_obs}};
}

inline json model_to_json(const DPMixtureModel& m) {
  const auto& h = m.hyper();
  const auto& s = m.state();
  json hyper = {{"alpha", h.alpha},
                {"mu0", io::vec_to_json(h.mu0)},
                {"sigma0_sq", io::vec_to_json(h.sigma0_sq)},
                {"sigma_y_sq", io::vec_to_json(h.sigma_y_sq)}};
  if (h.sigma_x_sq) hyper["sigma_x_sq"] = io::vec_to_json(*h.sigma_x_sq);
  json comps = json::array();
  for (const auto& c : s.components) comps.push_back({{"n", c.n}, {"sum", io::vec_to_json(c.sum)}});
  return {{"model_type", "dp_mixture"},
          {"hyper", std::move(hyper)},
          {"assignments", s.assignments},
          {"component_stats", std::move(comps)},
          {"tau", io::vec_to_json(s.tau)},
          {"seed", s.rng_seed},
          {"sweeps_run", s.sweep_count},
          {"converged", s.converged}};
}

inline json model_to_json(const TrainedModel& m) {
  return std::visit([](const auto& model) { return model_to_json(model); }, m);
}

/// Serialized model with the standardization it expects.
inline json model_to_json(const ProfileModel& pm) {
  json j = model_to_json(pm.model);
  j["schema_version"] = kModelSchemaVersion;
  j["feature_stats"] = stats_to_json(pm.stats);
  return j;
}

inline TrainedModel trained_model_from_json(const json& j) {
  const std::string type = io::str(j, "model_type");
  if (type == "shrunk") {
    std::vector<double> ll;
    for (const auto& v : io::field(j, "train_loglik")) ll.push_back(v.get<double>());
    GaussianParams g{io::vec_from_json(io::field(j, "mean")), io::mat_from_json(io::field(j, "cov"))};
    return ShrunkModel(std::move(g), io::num(j, "alpha"), std::move(ll));
  }
  if (type == "bayes_gauss") {
    NIWParams p{io::vec_from_json(io::field(j, "mu0")), io::num(j, "k0"), io::num(j, "nu0"),
                io::mat_from_json(io::field(j, "psi0"))};
    p.validate();
    NIWPosterior q{io::vec_from_json(io::field(j, "muN")), io::num(j, "kN"), io::num(j, "nuN"),
                   io::mat_from_json(io::field(j, "psiN")), io::field(j, "n_obs").get<std::size_t>()};
    if (q.dim() != p.dim() || q.psi.rows() != p.dim()) throw StructuralError("bayes_gauss: dimension mismatch");
    return BayesGaussModel(std::move(p), std::move(q));
  }
  if (type == "dp_mixture") {
    const json& hj = io::field(j, "hyper");
    DPHyperParams h;
    h.alpha = io::num(hj, "alpha");
    h.mu0 = io::vec_from_json(io::field(hj, "mu0"));
    h.sigma0_sq = io::vec_from_json(io::field(hj, "sigma0_sq"));
    h.sigma_y_sq = io::vec_from_json(io::field(hj, "sigma_y_sq"));
    if (hj.contains("sigma_x_sq")) h.sigma_x_sq = io::vec_from_json(hj["sigma_x_sq"]);
    h.validate();

    MixtureState s;
    s.assignments = io::field(j, "assignments").get<std::vector<int>>();
    for (const auto& c : io::field(j, "component_stats")) {
      s.components.push_back({io::field(c, "n").get<std::size_t>(), io::vec_from_json(io::field(c, "sum"))});
    }
    s.tau = io::vec_from_json(io::field(j, "tau"));
    s.rng_seed = io::field(j, "seed").get<std::uint64_t>();
    s.sweep_count = io::field(j, "sweeps_run").get<int>();
    s.converged = io::field(j, "converged").get<bool>();

    std::size_t total = 0;
    for (std::size_t k = 0; k < s.components.size(); ++k) {
      const auto& c = s.components[k];
      if (c.n == 0 || c.sum.size() != h.dim()) throw StructuralError("dp_mixture: bad component statistics");
      total += c.n;
    }
    for (int a : s.assignments) {
      if (a < 0 || static_cast<std::size_t>(a) >= s.components.size()) {
        throw StructuralError("dp_mixture: assignment out of range");
      }
    }
    if (total != s.assignments.size() || s.tau.size() != h.dim()) {
      throw StructuralError("dp_mixture: statistics do not match assignments");
    }
    return DPMixtureModel(std::move(h), std::move(s));
  }
  throw StructuralError("unknown model_type '" + type + "'");
}

inline ProfileModel profile_model_from_json(const json& j) {
  io::check_version(j, kModelSchemaVersion, "model");
  return {trained_model_from_json(j), stats_from_json(io::field(j, "feature_stats"))};
}

inline json profile_to_json(const Profile& p) {
  json feats = json::array();
  for (const auto& f : p.enrolled_features) feats.push_back(io::vec_to_json(f));
  json j = {{"schema_version", kProfileSchemaVersion},
            {"profile_id", p.profile_id},
            {"state", std::string(to_string(p.state))},
            {"model_type", std::string(to_string(p.model_type))},
            {"enrollment_target", p.enrollment_target},
            {"enrolled_features", std::move(feats)},
            {"model", p.model ? model_to_json(*p.model) : json(nullptr)},
            {"threshold", p.threshold ? json(*p.threshold) : json(nullptr)}};
  if (!p.failure_reason.empty()) j["failure_reason"] = p.failure_reason;
  return j;
}

inline Profile profile_from_json(const json& j) {
  io::check_version(j, kProfileSchemaVersion, "profile");
  Profile p;
  p.profile_id = io::str(j, "profile_id");
  const auto state = parse_profile_state(io::str(j, "state"));
  if (!state) throw StructuralError("profile: unknown state");
  p.state = *state;
  const auto type = parse_model_type(io::str(j, "model_type"));
  if (!type) throw StructuralError("profile: unknown model_type");
  p.model_type = *type;
  p.enrollment_target = io::field(j, "enrollment_target").get<int>();
  for (const auto& f : io::field(j, "enrolled_features")) p.enrolled_features.push_back(io::vec_from_json(f));
  const json& m = io::field(j, "model");
  if (!m.is_null()) p.model = profile_model_from_json(m);
  const json& t = io::field(j, "threshold");
  if (!t.is_null()) p.threshold = t.get<double>();
  if (j.contains("failure_reason")) p.failure_reason = io::str(j, "failure_reason");
  if ((p.state == ProfileState::trained) != (p.model.has_value() && p.threshold.has_value())) {
    throw StructuralError("profile: trained state requires both model and threshold");
  }
  return p;
}

}  // namespace swipeguard
