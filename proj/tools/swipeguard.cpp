#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swipeguard/config.hpp"
#include "swipeguard/report.hpp"
#include "swipeguard/service.hpp"
#include "swipeguard/service_http.hpp"
#include "swipeguard/synth.hpp"
#include "swipeguard/trace_io.hpp"

#include <CLI11.hpp>

namespace sg = swipeguard;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

/// Usage problems detected after CLI parsing (bad flag values, config keys).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by every subcommand. Unset options leave the config file or
/// default value in place.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> models;
  std::optional<int> grid;
  std::optional<double> alpha;
  std::optional<double> dp_alpha;
  std::optional<double> sigma_y;
  std::optional<double> quantile;
  std::optional<int> n_train;
  std::optional<std::uint64_t> seed;
  std::optional<double> fidelity;
  std::optional<std::string> prior_source;
  std::string out;

  void attach(CLI::App* app, bool out_required) {
    app->add_option("--config", config_path, "JSON config file (flags override it)");
    app->add_option("--model", models, "Model(s): shrunk, bayes_gauss, dp_mixture or all; comma separated")
        ->delimiter(',');
    app->add_option("--grid", grid, "Grid points per channel");
    app->add_option("--alpha", alpha, "Fixed shrinkage weight in [0, 1] (default: cross-validated)");
    app->add_option("--dp-alpha", dp_alpha, "Mixture concentration");
    app->add_option("--sigma-y", sigma_y, "Mixture per-dimension noise variance");
    app->add_option("--quantile", quantile, "Calibration percentile");
    app->add_option("--n-train", n_train, "Training samples per profile");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--fidelity", fidelity, "Over-the-shoulder attacker fidelity in [0, 1]");
    app->add_option("--prior-source", prior_source, "population or cold_start");
    auto* o = app->add_option("--out", out, "Output path");
    if (out_required) o->required();
  }

  [[nodiscard]] sg::RunConfig resolve() const {
    sg::RunConfig c;
    if (!config_path.empty()) c = sg::load_config_file(config_path, c);
    if (!models.empty()) {
      c.models.clear();
      for (const auto& m : models) {
        if (m == "all") {
          c.models = {sg::ModelType::shrunk, sg::ModelType::bayes_gauss, sg::ModelType::dp_mixture};
          break;
        }
        const auto t = sg::parse_model_type(m);
        if (!t) throw UsageError("unknown model '" + m + "'");
        c.models.push_back(*t);
      }
    }
    if (grid) c.grid = *grid;
    if (alpha) c.shrunk_alpha = *alpha;
    if (dp_alpha) c.dp_alpha = *dp_alpha;
    if (sigma_y) c.dp_sigma_y_sq = *sigma_y;
    if (quantile) c.quantile = *quantile;
    if (n_train) c.n_train = *n_train;
    if (seed) c.seed = *seed;
    if (fidelity) c.synth.fidelity = *fidelity;
    if (prior_source) {
      const auto p = sg::parse_prior_source(*prior_source);
      if (!p) throw UsageError("unknown prior source '" + *prior_source + "'");
      c.prior_source = *p;
    }
    c.validate();
    return c;
  }
};

std::vector<int> parse_range(const std::string& text) {
  std::vector<int> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      if (lo > hi) throw UsageError("empty range '" + text + "'");
      for (int n = lo; n <= hi; ++n) out.push_back(n);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse range '" + text + "'");
  }
  if (out.empty()) throw UsageError("empty range '" + text + "'");
  return out;
}

sg::TraceFile read_trace_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw sg::IoError("cannot read " + path);
  return sg::read_traces(f);
}

void print_failures(const sg::TraceFile& file, std::ostream& os) {
  for (const auto& f : file.failures) os << "line " << f.line << ": " << f.message << "\n";
}

/// Loads a dataset for evaluation; any malformed line is a data error.
sg::Dataset load_dataset(const std::string& path, const sg::RunConfig& cfg) {
  const sg::TraceFile file = read_trace_file(path);
  if (!file.failures.empty()) {
    print_failures(file, std::cerr);
    throw sg::StructuralError(path + ": " + std::to_string(file.failures.size()) + " malformed line(s)");
  }
  if (file.traces.empty()) throw sg::StructuralError(path + ": no traces");
  return sg::build_dataset(file.traces, cfg.quality, cfg.grid);
}

int cmd_ingest(const std::string& path, const sg::RunConfig& cfg) {
  const sg::TraceFile file = read_trace_file(path);
  print_failures(file, std::cerr);
  if (file.traces.empty()) {
    std::cerr << path << ": no valid traces\n";
    return kData;
  }
  const sg::Dataset ds = sg::build_dataset(file.traces, cfg.quality, cfg.grid);
  std::map<std::string, std::size_t> rejected_by_profile;
  std::map<std::string, std::size_t> reasons;
  for (const auto& r : ds.rejected) {
    ++rejected_by_profile[r.profile_id];
    ++reasons[r.reason];
  }
  std::printf("traces: %zu parsed, %zu malformed line(s)\n", file.traces.size(), file.failures.size());
  std::printf("profiles: %zu\n", ds.profiles.size());
  std::printf("%-20s %8s %15s %13s %9s\n", "profile_id", "victim", "blind_attacker", "ots_attacker", "rejected");
  for (const auto& p : ds.profiles) {
    std::printf("%-20s %8zu %15zu %13zu %9zu\n", p.profile_id.c_str(), p.genuine.size(), p.blind.size(),
                p.ots.size(), rejected_by_profile[p.profile_id]);
  }
  std::printf("rejected samples: %zu\n", ds.rejected.size());
  for (const auto& [reason, count] : reasons) std::printf("  %s: %zu\n", reason.c_str(), count);
  return file.failures.empty() ? kOk : kData;
}

int cmd_synth(const sg::RunConfig& cfg, const std::string& out) {
  sg::synth::PopulationConfig pc = cfg.synth;
  pc.seed = cfg.seed;
  const auto pop = sg::synth::gen_population(pc);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw sg::IoError("cannot write " + out);
  sg::write_traces(f, pop.traces);
  f.close();
  if (!f) throw sg::IoError("cannot write " + out);

  std::map<std::string, std::size_t> roles;
  std::map<std::size_t, std::size_t> behaviours;
  for (const auto& t : pop.traces) ++roles[std::string(sg::to_string(t.role))];
  for (const auto& u : pop.users) ++behaviours[u.spec.behaviours.size()];
  std::printf("wrote %zu traces for %zu users to %s (seed %llu, fidelity %.3g)\n", pop.traces.size(),
              pop.users.size(), out.c_str(), static_cast<unsigned long long>(pc.seed), pc.fidelity);
  for (const auto& [role, n] : roles) std::printf("  %s: %zu\n", role.c_str(), n);
  for (const auto& [k, n] : behaviours) std::printf("  users with %zu behaviour(s): %zu\n", k, n);
  return kOk;
}

void finish_report(sg::EvalReport& report, const sg::RunConfig& cfg, const std::string& command,
                   const std::string& out) {
  report.config_echo = sg::config_to_json(cfg);
  report.config_echo["command"] = command;
  const auto files = sg::emit_report(report, out);
  std::cout << sg::render_table(report.aggregates);
  if (!report.failed_profiles.empty()) {
    std::printf("failed profiles: %zu\n", report.failed_profiles.size());
    for (const auto& f : report.failed_profiles) std::printf("  %s: %s\n", f.profile_id.c_str(), f.reason.c_str());
  }
  if (!report.nonconverged.empty()) std::printf("mixture runs at the sweep budget: %zu\n", report.nonconverged.size());
  std::printf("report written to %s\n", files.report_json.parent_path().string().c_str());
}

int cmd_evaluate(const std::string& dataset, const sg::RunConfig& cfg, const std::string& out) {
  const sg::Dataset ds = load_dataset(dataset, cfg);
  sg::EvalReport report = sg::run_experiment(ds, cfg.eval_config());
  if (!cfg.learning_curve.empty()) report.learning_curve = sg::learning_curve(ds, cfg.eval_config(), cfg.learning_curve).learning_curve;
  finish_report(report, cfg, "evaluate", out);
  return kOk;
}

int cmd_learning_curve(const std::string& dataset, const sg::RunConfig& cfg, const std::string& out) {
  const sg::Dataset ds = load_dataset(dataset, cfg);
  sg::EvalReport report = sg::learning_curve(ds, cfg.eval_config(), cfg.learning_curve);
  finish_report(report, cfg, "learning-curve", out);
  return kOk;
}

int cmd_serve(const sg::RunConfig& cfg, const std::string& store, const std::string& host, int port,
              const std::string& population, const std::string& static_dir) {
  std::optional<sg::PopulationContext> ctx;
  if (cfg.prior_source == sg::PriorSource::population) {
    if (population.empty()) {
      std::fprintf(stderr, "no --population file given: profiles are cold-started\n");
    } else {
      const sg::Dataset ds = load_dataset(population, cfg);
      ctx = sg::population_context(ds, cfg.model_config());
      if (!ctx) throw sg::StructuralError(population + ": too few genuine samples for a population context");
    }
  }
  sg::ScoringService service(cfg, store, ctx);
  httplib::Server server;
  sg::mount(server, service);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
    throw sg::IoError("cannot serve static files from " + static_dir);
  }
  std::printf("listening on http://%s:%d/v1/ (store %s)\n", host.c_str(), port, store.c_str());
  std::fflush(stdout);
  if (!server.listen(host, port)) throw sg::IoError("cannot bind " + host + ":" + std::to_string(port));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swipe-dynamics authentication toolkit"};
  app.require_subcommand(1);

  CommonFlags ingest_flags, synth_flags, eval_flags, curve_flags, serve_flags;
  std::string ingest_path, eval_path, curve_path;
  std::string eval_curve, curve_range = "2..10";
  int users = -1, genuine = -1, attacks = -1, behaviours = -1;
  std::string store = "profiles", host = "127.0.0.1", population, static_dir;
  int port = 8080;

  auto* ingest = app.add_subcommand("ingest", "Parse and quality-gate a trace file; print a summary");
  ingest->add_option("path", ingest_path, "Trace file (JSON lines)")->required();
  ingest_flags.attach(ingest, false);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic population trace file");
  synth->add_option("--users", users, "Number of users");
  synth->add_option("--genuine", genuine, "Genuine swipes per user");
  synth->add_option("--attacks", attacks, "Swipes per attacker");
  synth->add_option("--behaviours", behaviours, "Behaviours per user (0: random)");
  synth_flags.attach(synth, true);

  auto* evaluate = app.add_subcommand("evaluate", "Per-user EER evaluation; writes report files");
  evaluate->add_option("dataset", eval_path, "Trace file")->required();
  evaluate->add_option("--learning-curve", eval_curve, "Also compute a learning curve, e.g. 2..10");
  eval_flags.attach(evaluate, true);

  auto* curve = app.add_subcommand("learning-curve", "EER against training-set size");
  curve->add_option("dataset", curve_path, "Trace file")->required();
  curve->add_option("--range", curve_range, "Training sizes, e.g. 2..10 or 2,5,10");
  curve_flags.attach(curve, true);

  auto* serve = app.add_subcommand("serve", "Run the scoring service");
  serve->add_option("--store", store, "Profile store directory");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--population", population, "Trace file used for the population prior");
  serve->add_option("--static", static_dir, "Directory of static files served at /");
  serve_flags.attach(serve, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_path, ingest_flags.resolve());
    if (*synth) {
      sg::RunConfig cfg = synth_flags.resolve();
      if (users >= 0) cfg.synth.users = users;
      if (genuine >= 0) cfg.synth.genuine = genuine;
      if (attacks >= 0) cfg.synth.attacks = attacks;
      if (behaviours >= 0) cfg.synth.behaviours = behaviours;
      cfg.validate();
      return cmd_synth(cfg, synth_flags.out);
    }
    if (*evaluate) {
      sg::RunConfig cfg = eval_flags.resolve();
      if (!eval_curve.empty()) cfg.learning_curve = parse_range(eval_curve);
      cfg.validate();
      return cmd_evaluate(eval_path, cfg, eval_flags.out);
    }
    if (*curve) {
      sg::RunConfig cfg = curve_flags.resolve();
      cfg.learning_curve = parse_range(curve_range);
      cfg.validate();
      return cmd_learning_curve(curve_path, cfg, curve_flags.out);
    }
    if (*serve) return cmd_serve(serve_flags.resolve(), store, host, port, population, static_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const sg::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const sg::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
