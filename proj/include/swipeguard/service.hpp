#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "swipeguard/config.hpp"
#include "swipeguard/model_io.hpp"
#include "swipeguard/trace_io.hpp"

namespace swipeguard {

/// A profile document as persisted: the profile plus the raw traces it was
/// enrolled with (served back as replays).
struct StoredProfile {
  Profile profile;
  std::vector<RawTrace> traces;
};

inline bool valid_profile_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id.front() == '.') return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

/// Directory of per-profile JSON documents. Writes go to a temporary file that
/// is renamed over the target, so readers never see a partial document.
class ProfileStore {
 public:
  explicit ProfileStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) throw IoError("profile store: cannot use " + dir_.string());
  }

  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

  [[nodiscard]] bool exists(const std::string& id) const { return std::filesystem::exists(path_of(id)); }

  [[nodiscard]] StoredProfile load(const std::string& id) const {
    std::ifstream f(path_of(id), std::ios::binary);
    if (!f) throw NotFoundError("profile '" + id + "' does not exist");
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw IoError("profile '" + id + "': corrupt document: " + e.what());
    }
    StoredProfile sp;
    sp.profile = profile_from_json(j);
    if (j.contains("enrolled_traces")) {
      for (const auto& t : j["enrolled_traces"]) sp.traces.push_back(trace_from_json(t));
    }
    return sp;
  }

  void save(const StoredProfile& sp) const {
    json j = profile_to_json(sp.profile);
    json traces = json::array();
    for (const auto& t : sp.traces) traces.push_back(trace_to_json(t));
    j["enrolled_traces"] = std::move(traces);

    static std::atomic<unsigned long long> counter{0};
    std::ostringstream suffix;
    suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
    const auto target = path_of(sp.profile.profile_id);
    const auto tmp = std::filesystem::path(target.string() + suffix.str());
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("profile store: cannot write " + tmp.string());
      f << j.dump() << '\n';
      f.flush();
      if (!f) throw IoError("profile store: cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw IoError("profile store: cannot rename into " + target.string());
    }
  }

  bool remove(const std::string& id) const {
    std::error_code ec;
    return std::filesystem::remove(path_of(id), ec);
  }

 private:
  [[nodiscard]] std::filesystem::path path_of(const std::string& id) const {
    if (!valid_profile_id(id)) throw StructuralError("invalid profile id '" + id + "'");
    return dir_ / (id + ".json");
  }

  std::filesystem::path dir_;
};

struct ServiceResponse {
  int status = 200;
  json body;
};

/// Error codes carried in {"error": {"code", "message"}} bodies.
namespace error_code {
inline constexpr const char* quality_reject = "quality_reject";
inline constexpr const char* not_ready = "not_ready";
inline constexpr const char* not_found = "not_found";
inline constexpr const char* malformed = "malformed";
inline constexpr const char* conflict = "conflict";
inline constexpr const char* internal = "internal";
}  // namespace error_code

inline ServiceResponse error_response(int status, const char* code, const std::string& message, json extra = {}) {
  json err = {{"code", code}, {"message", message}};
  if (extra.is_object()) {
    for (auto& [k, v] : extra.items()) err[k] = v;
  }
  return {status, {{"error", std::move(err)}}};
}

/// Scoring service over a profile store. `handle` is the whole API: the HTTP
/// adapter only forwards method, path and body. Every request re-reads the
/// profile from the store, so a restarted service with the same store makes
/// the same decisions.
///
/// Routes (all under /v1):
///   GET    /v1/health
///   POST   /v1/profiles                       {profile_id, model_type?, enrollment_target?}
///   GET    /v1/profiles/{id}
///   DELETE /v1/profiles/{id}
///   POST   /v1/profiles/{id}/enroll           raw trace
///   POST   /v1/profiles/{id}/authenticate     raw trace
///   GET    /v1/profiles/{id}/replays
class ScoringService {
 public:
  ScoringService(RunConfig config, std::filesystem::path store_dir,
                 std::optional<PopulationContext> population = std::nullopt)
      : config_(std::move(config)), store_(std::move(store_dir)), population_(std::move(population)) {
    config_.validate();
    if (config_.prior_source == PriorSource::cold_start) population_.reset();
  }

  ServiceResponse handle(std::string_view method, std::string_view path, std::string_view body) {
    try {
      return route(method, path, body);
    } catch (const NotFoundError& e) {
      return error_response(404, error_code::not_found, e.what());
    } catch (const NotReadyError& e) {
      return error_response(409, error_code::not_ready, e.what());
    } catch (const StateError& e) {
      return error_response(409, error_code::conflict, e.what());
    } catch (const StructuralError& e) {
      return error_response(400, error_code::malformed, e.what());
    } catch (const DimensionError& e) {
      return error_response(400, error_code::malformed, e.what());
    } catch (const ConfigError& e) {
      return error_response(400, error_code::malformed, e.what());
    } catch (const json::exception& e) {
      return error_response(400, error_code::malformed, std::string("invalid JSON: ") + e.what());
    } catch (const std::exception& e) {
      return error_response(500, error_code::internal, e.what());
    }
  }

  [[nodiscard]] const RunConfig& config() const noexcept { return config_; }
  [[nodiscard]] const ProfileStore& store() const noexcept { return store_; }

 private:
  static std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i < path.size()) {
      while (i < path.size() && path[i] == '/') ++i;
      const std::size_t j = path.find('/', i);
      const std::size_t end = j == std::string_view::npos ? path.size() : j;
      if (end > i) parts.push_back(path.substr(i, end - i));
      i = end;
    }
    return parts;
  }

  ServiceResponse route(std::string_view method, std::string_view path, std::string_view body) {
    const auto q = path.find('?');
    const auto parts = split_path(path.substr(0, q));
    if (parts.empty() || parts[0] != "v1") throw NotFoundError("no route for " + std::string(path));
    if (parts.size() == 2 && parts[1] == "health" && method == "GET") {
      return {200, {{"status", "ok"}, {"api_version", "v1"}}};
    }
    if (parts.size() < 2 || parts[1] != "profiles") throw NotFoundError("no route for " + std::string(path));
    if (parts.size() == 2 && method == "POST") return create(parse_body(body));
    if (parts.size() < 3) throw NotFoundError("no route for " + std::string(method) + " " + std::string(path));

    const std::string id(parts[2]);
    if (!valid_profile_id(id)) throw StructuralError("invalid profile id '" + id + "'");
    if (parts.size() == 3 && method == "GET") return status(id);
    if (parts.size() == 3 && method == "DELETE") return remove(id);
    if (parts.size() == 4 && parts[3] == "enroll" && method == "POST") return enroll_swipe(id, parse_body(body));
    if (parts.size() == 4 && parts[3] == "authenticate" && method == "POST") {
      return authenticate_swipe(id, parse_body(body));
    }
    if (parts.size() == 4 && parts[3] == "replays" && method == "GET") return replays(id);
    throw NotFoundError("no route for " + std::string(method) + " " + std::string(path));
  }

  static json parse_body(std::string_view body) {
    if (body.empty()) throw StructuralError("request body is empty");
    return json::parse(body);
  }

  std::shared_ptr<std::mutex> lock_for(const std::string& id) {
    std::lock_guard<std::mutex> g(locks_mutex_);
    auto& m = locks_[id];
    if (!m) m = std::make_shared<std::mutex>();
    return m;
  }

  static json status_json(const StoredProfile& sp) {
    const Profile& p = sp.profile;
    json j = {{"profile_id", p.profile_id},
              {"state", std::string(to_string(p.state))},
              {"model_type", std::string(to_string(p.model_type))},
              {"sample_count", p.enrolled_features.size()},
              {"enrollment_target", p.enrollment_target}};
    if (p.threshold) j["threshold"] = *p.threshold;
    if (p.model) {
      if (const auto* dp = std::get_if<DPMixtureModel>(&p.model->model)) j["components"] = dp->components();
    }
    if (!p.failure_reason.empty()) j["failure_reason"] = p.failure_reason;
    return j;
  }

  ServiceResponse create(const json& req) {
    if (!req.is_object()) throw StructuralError("create: expected a JSON object");
    for (const auto& [key, value] : req.items()) {
      if (key != "profile_id" && key != "model_type" && key != "enrollment_target") {
        throw StructuralError("create: unknown field '" + key + "'");
      }
    }
    const std::string id = io::str(req, "profile_id");
    if (!valid_profile_id(id)) throw StructuralError("invalid profile id '" + id + "'");
    ModelType type = config_.primary_model();
    if (req.contains("model_type")) {
      const auto t = parse_model_type(io::str(req, "model_type"));
      if (!t) throw StructuralError("create: unknown model_type");
      type = *t;
    }
    int target = config_.enrollment_target;
    if (req.contains("enrollment_target")) {
      if (!req["enrollment_target"].is_number_integer()) throw StructuralError("create: enrollment_target must be an integer");
      target = req["enrollment_target"].get<int>();
      if (target < 2) throw StructuralError("create: enrollment_target must be >= 2");
    }
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    if (store_.exists(id)) throw StateError("profile '" + id + "' already exists");
    StoredProfile sp{new_profile(id, type, target), {}};
    store_.save(sp);
    return {201, status_json(sp)};
  }

  ServiceResponse status(const std::string& id) {
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    return {200, status_json(store_.load(id))};
  }

  ServiceResponse remove(const std::string& id) {
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    if (!store_.remove(id)) throw NotFoundError("profile '" + id + "' does not exist");
    return {200, {{"profile_id", id}, {"deleted", true}}};
  }

  /// Parses an uploaded trace. The second member holds the error response
  /// when the quality gate rejects the swipe.
  std::pair<RawTrace, std::optional<ServiceResponse>> checked_trace(const json& body, const std::string& id,
                                                                    int attempt) const {
    RawTrace t = trace_from_json(body, Role::victim);
    t.profile_id = id;
    t.attempt_index = attempt;
    const QualityVerdict v = quality_gate(t, config_.quality);
    if (!v.accepted()) {
      json reasons = json::array();
      for (auto r : v.reasons) reasons.push_back(std::string(to_string(r)));
      return {std::move(t), error_response(422, error_code::quality_reject,
                                           "swipe rejected: " + std::string(to_string(v.primary())),
                                           {{"reasons", std::move(reasons)}})};
    }
    return {std::move(t), std::nullopt};
  }

  FeatureVector features_of(const RawTrace& t) const { return extract_features(normalize(t), config_.grid); }

  ServiceResponse enroll_swipe(const std::string& id, const json& body) {
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    StoredProfile sp = store_.load(id);
    if (sp.profile.state != ProfileState::enrolling) {
      throw StateError("profile '" + id + "' is " + std::string(to_string(sp.profile.state)));
    }
    auto [trace, rejected] = checked_trace(body, id, static_cast<int>(sp.profile.enrolled_features.size()));
    if (rejected) return *rejected;
    const FeatureVector f = features_of(trace);
    ModelConfig cfg = config_.model_config();
    sp.profile = enroll(std::move(sp.profile), f, cfg, population_);
    sp.traces.push_back(std::move(trace));
    store_.save(sp);
    json out = status_json(sp);
    out["accepted"] = true;
    return {200, std::move(out)};
  }

  ServiceResponse authenticate_swipe(const std::string& id, const json& body) {
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    const StoredProfile sp = store_.load(id);
    if (!sp.profile.ready()) throw NotReadyError("profile '" + id + "' is " + std::string(to_string(sp.profile.state)));
    auto [trace, rejected] = checked_trace(body, id, 0);
    if (rejected) return *rejected;
    const Decision d = authenticate(sp.profile, features_of(trace));
    json out = {{"profile_id", id},
                {"score", d.score},
                {"threshold", d.threshold},
                {"accept", d.accept},
                {"model_type", std::string(to_string(d.model_type))}};
    audit(out);
    return {200, std::move(out)};
  }

  ServiceResponse replays(const std::string& id) {
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    const StoredProfile sp = store_.load(id);
    json traces = json::array();
    for (const auto& t : sp.traces) traces.push_back(trace_to_json(t));
    return {200, {{"profile_id", id}, {"traces", std::move(traces)}}};
  }

  void audit(const json& decision) {
    std::lock_guard<std::mutex> g(audit_mutex_);
    std::ofstream f(store_.dir() / "audit.log", std::ios::app);
    if (f) f << decision.dump() << '\n';
  }

  RunConfig config_;
  ProfileStore store_;
  std::optional<PopulationContext> population_;
  std::mutex locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
  std::mutex audit_mutex_;
};

}  // namespace swipeguard
