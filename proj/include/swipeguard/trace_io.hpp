#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "swipeguard/errors.hpp"
#include "swipeguard/features.hpp"

namespace swipeguard {

using json = nlohmann::json;

inline json trace_to_json(const RawTrace& t) {
  json pts = json::array();
  for (const auto& p : t.points) {
    pts.push_back({{"t_ms", p.t_ms}, {"x_px", p.x_px}, {"y_px", p.y_px}, {"size", p.size}});
  }
  return {{"profile_id", t.profile_id},
          {"role", std::string(to_string(t.role))},
          {"attempt_index", t.attempt_index},
          {"device",
           {{"width_px", t.device.width_px},
            {"height_px", t.device.height_px},
            {"sample_rate_hz", t.device.sample_rate_hz}}},
          {"points", std::move(pts)}};
}

namespace detail {

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw StructuralError(std::string("trace: missing field '") + key + "'");
  }
  return j.at(key);
}

inline double number(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number()) throw StructuralError(std::string("trace: field '") + key + "' is not a number");
  return v.get<double>();
}

inline int integer(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number_integer()) {
    throw StructuralError(std::string("trace: field '") + key + "' is not an integer");
  }
  return v.get<int>();
}

}  // namespace detail

/// Parses one trace object. Field names and types are checked strictly; the
/// role is optional only when `default_role` is supplied (service uploads).
inline RawTrace trace_from_json(const json& j, std::optional<Role> default_role = std::nullopt) {
  using detail::integer;
  using detail::number;
  using detail::require;
  if (!j.is_object()) throw StructuralError("trace: expected a JSON object");

  RawTrace t;
  if (j.contains("profile_id")) {
    if (!j["profile_id"].is_string()) throw StructuralError("trace: profile_id must be a string");
    t.profile_id = j["profile_id"].get<std::string>();
  } else if (!default_role) {
    throw StructuralError("trace: missing field 'profile_id'");
  }

  if (j.contains("role")) {
    const auto& r = j["role"];
    if (!r.is_string()) throw StructuralError("trace: role must be a string");
    auto role = parse_role(r.get<std::string>());
    if (!role) throw StructuralError("trace: unknown role '" + r.get<std::string>() + "'");
    t.role = *role;
  } else if (default_role) {
    t.role = *default_role;
  } else {
    throw StructuralError("trace: missing field 'role'");
  }

  if (j.contains("attempt_index") || !default_role) {
    t.attempt_index = integer(j, "attempt_index");
    if (t.attempt_index < 0) throw StructuralError("trace: attempt_index must be >= 0");
  }

  const auto& dev = require(j, "device");
  t.device.width_px = integer(dev, "width_px");
  t.device.height_px = integer(dev, "height_px");
  t.device.sample_rate_hz = number(dev, "sample_rate_hz");

  const auto& pts = require(j, "points");
  if (!pts.is_array()) throw StructuralError("trace: points must be an array");
  t.points.reserve(pts.size());
  for (const auto& p : pts) {
    t.points.push_back({number(p, "t_ms"), number(p, "x_px"), number(p, "y_px"), number(p, "size")});
  }
  return t;
}

struct ParseFailure {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct TraceFile {
  std::vector<RawTrace> traces;
  std::vector<ParseFailure> failures;
};

/// Reads line-delimited JSON traces. Blank lines are skipped; malformed lines
/// are collected with their line numbers rather than aborting the read.
inline TraceFile read_traces(std::istream& in) {
  TraceFile out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      RawTrace t = trace_from_json(json::parse(line));
      sanitize(t);
      out.traces.push_back(std::move(t));
    } catch (const json::exception& e) {
      out.failures.push_back({lineno, std::string("invalid JSON: ") + e.what()});
    } catch (const Error& e) {
      out.failures.push_back({lineno, e.what()});
    }
  }
  return out;
}

inline void write_traces(std::ostream& out, const std::vector<RawTrace>& traces) {
  for (const auto& t : traces) out << trace_to_json(t).dump() << '\n';
}

}  // namespace swipeguard
