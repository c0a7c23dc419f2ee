#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "swipeguard/eval.hpp"
#include "swipeguard/model_io.hpp"

namespace swipeguard {

inline constexpr int kReportSchemaVersion = 1;

/// Shortest decimal text that parses back to the same double.
inline std::string exact_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline ModelType model_field(const json& j) {
  const auto m = parse_model_type(io::str(j, "model"));
  if (!m) throw StructuralError("report: unknown model");
  return *m;
}

inline Scenario scenario_field(const json& j) {
  const auto s = parse_scenario(io::str(j, "scenario"));
  if (!s) throw StructuralError("report: unknown scenario");
  return *s;
}

}  // namespace detail

/// Versioned report document. Empty failure and learning-curve sections are
/// left out.
inline json report_to_json(const EvalReport& r) {
  json per_user = json::array();
  for (const auto& u : r.per_user) {
    per_user.push_back({{"profile_id", u.profile_id},
                        {"model", std::string(to_string(u.model))},
                        {"scenario", std::string(to_string(u.scenario))},
                        {"eer_percent", u.eer}});
  }
  json aggregates = json::array();
  for (const auto& a : r.aggregates) {
    aggregates.push_back({{"model", std::string(to_string(a.model))},
                          {"scenario", std::string(to_string(a.scenario))},
                          {"mean_eer", a.mean},
                          {"median_eer", a.median},
                          {"users", a.users}});
  }
  json j = {{"schema_version", kReportSchemaVersion},
            {"per_user_eer", std::move(per_user)},
            {"aggregates", std::move(aggregates)},
            {"config_echo", r.config_echo}};
  if (!r.failed_profiles.empty()) {
    json failed = json::array();
    for (const auto& f : r.failed_profiles) failed.push_back({{"profile_id", f.profile_id}, {"reason", f.reason}});
    j["failed_profiles"] = std::move(failed);
  }
  if (!r.learning_curve.empty()) {
    json curve = json::array();
    for (const auto& c : r.learning_curve) {
      curve.push_back({{"model", std::string(to_string(c.model))},
                       {"scenario", std::string(to_string(c.scenario))},
                       {"n_train", c.n_train},
                       {"mean_eer", c.mean},
                       {"median_eer", c.median}});
    }
    j["learning_curve"] = std::move(curve);
  }
  if (!r.nonconverged.empty()) j["nonconverged_profiles"] = r.nonconverged;
  return j;
}

inline EvalReport report_from_json(const json& j) {
  io::check_version(j, kReportSchemaVersion, "report");
  EvalReport r;
  for (const auto& u : io::field(j, "per_user_eer")) {
    r.per_user.push_back({io::str(u, "profile_id"), detail::model_field(u), detail::scenario_field(u),
                          io::num(u, "eer_percent")});
  }
  for (const auto& a : io::field(j, "aggregates")) {
    r.aggregates.push_back({detail::model_field(a), detail::scenario_field(a), io::num(a, "mean_eer"),
                            io::num(a, "median_eer"), io::field(a, "users").get<std::size_t>()});
  }
  if (j.contains("failed_profiles")) {
    for (const auto& f : j["failed_profiles"]) r.failed_profiles.push_back({io::str(f, "profile_id"), io::str(f, "reason")});
  }
  if (j.contains("learning_curve")) {
    for (const auto& c : j["learning_curve"]) {
      r.learning_curve.push_back({detail::model_field(c), detail::scenario_field(c), io::field(c, "n_train").get<int>(),
                                  io::num(c, "mean_eer"), io::num(c, "median_eer")});
    }
  }
  if (j.contains("nonconverged_profiles")) r.nonconverged = j["nonconverged_profiles"].get<std::vector<std::string>>();
  r.config_echo = io::field(j, "config_echo");
  return r;
}

/// Model rows against Blind/OTS columns, each split into Mean and Median.
/// Missing cells print as "-".
inline std::string render_table(const std::vector<Aggregate>& aggregates) {
  std::vector<ModelType> models;
  for (const auto& a : aggregates) {
    if (std::find(models.begin(), models.end(), a.model) == models.end()) models.push_back(a.model);
  }
  std::sort(models.begin(), models.end());
  const auto cell = [&](ModelType m, Scenario s, bool mean) -> std::string {
    for (const auto& a : aggregates) {
      if (a.model == m && a.scenario == s) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", mean ? a.mean : a.median);
        return buf;
      }
    }
    return "-";
  };
  const auto line = [](const std::string& name, const std::string& a, const std::string& b, const std::string& c,
                       const std::string& d) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-18s | %7s | %7s | %7s | %7s\n", name.c_str(), a.c_str(), b.c_str(), c.c_str(),
                  d.c_str());
    return std::string(buf);
  };
  std::string out;
  char head[160];
  std::snprintf(head, sizeof head, "%-18s | %-17s | %-17s\n", "Model", "Blind EER", "OTS EER");
  out += head;
  out += line("", "Mean", "Median", "Mean", "Median");
  out += std::string(18, '-') + "-+-" + std::string(7, '-') + "-+-" + std::string(7, '-') + "-+-" +
         std::string(7, '-') + "-+-" + std::string(7, '-') + "\n";
  for (ModelType m : models) {
    out += line(std::string(display_name(m)), cell(m, Scenario::blind, true), cell(m, Scenario::blind, false),
                cell(m, Scenario::ots, true), cell(m, Scenario::ots, false));
  }
  return out;
}

inline std::string per_user_csv(const EvalReport& r) {
  std::string out = "profile_id,model,scenario,eer_percent\n";
  for (const auto& u : r.per_user) {
    out += u.profile_id + "," + std::string(to_string(u.model)) + "," + std::string(to_string(u.scenario)) + "," +
           exact_number(u.eer) + "\n";
  }
  return out;
}

inline std::string learning_curve_csv(const EvalReport& r) {
  std::string out = "model,scenario,n_train,mean_eer,median_eer\n";
  for (const auto& c : r.learning_curve) {
    out += std::string(to_string(c.model)) + "," + std::string(to_string(c.scenario)) + "," +
           std::to_string(c.n_train) + "," + exact_number(c.mean) + "," + exact_number(c.median) + "\n";
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  f.close();
  if (!f) throw IoError("cannot write " + path.string());
}

struct ReportFiles {
  std::filesystem::path report_json;
  std::filesystem::path table;
  std::filesystem::path per_user;
  std::optional<std::filesystem::path> learning_curve;
};

/// Writes report.json, table.txt, per_user_eer.csv and, when the report holds
/// a learning curve, learning_curve.csv into `dir` (created if needed).
inline ReportFiles emit_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  ReportFiles files{dir / "report.json", dir / "table.txt", dir / "per_user_eer.csv", std::nullopt};
  write_text_file(files.report_json, report_to_json(r).dump(2) + "\n");
  write_text_file(files.table, render_table(r.aggregates));
  write_text_file(files.per_user, per_user_csv(r));
  if (!r.learning_curve.empty()) {
    files.learning_curve = dir / "learning_curve.csv";
    write_text_file(*files.learning_curve, learning_curve_csv(r));
  }
  return files;
}

}  // namespace swipeguard
