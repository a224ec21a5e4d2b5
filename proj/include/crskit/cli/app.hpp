#pragma once

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crskit/config/defaults.hpp"
#include "crskit/corpus/toy_corpus.hpp"
#include "crskit/corpus/unified.hpp"
#include "crskit/serve/http.hpp"
#include "crskit/train/system.hpp"

namespace crskit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitInternal = 2;

// ---- configuration ----

// Keys of `file` that no command reads. task.<name>.<key> may carry any model.* key.
inline std::vector<std::string> unknown_keys(const config::ConfigTree& file) {
  const auto& defaults = config::default_config();
  std::vector<std::string> out;
  std::function<void(const json&, const std::string&)> walk = [&](const json& node, const std::string& at) {
    if (node.is_object() && !node.empty()) {
      for (auto it = node.begin(); it != node.end(); ++it) walk(it.value(), at.empty() ? it.key() : at + "." + it.key());
      return;
    }
    if (at.empty() || defaults.find(at)) return;
    const auto parts = util::split(at, '.');
    if (parts.size() == 3 && parts[0] == "task" && (parts[2] == "model" || defaults.find("model." + parts[2]))) return;
    out.push_back(at);
  };
  walk(file.root(), "");
  return out;
}

inline std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    out[std::string(util::trim(s.substr(0, eq)))] = s.substr(eq + 1);
  }
  return out;
}

// defaults, then the file, then --set; every violation reported at once.
inline config::ConfigTree load_run_config(const std::string& path, const std::vector<std::string>& sets, bool debug) {
  const auto overrides = parse_sets(sets);
  config::ConfigTree c;
  if (path.empty()) {
    c = config::apply_overrides(config::default_config(), overrides, !debug);
  } else {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    const auto file = config::parse_config_text(util::read_file(path));
    const auto unknown = unknown_keys(file);
    if (!unknown.empty()) {
      if (!debug) throw ConfigError("unknown config keys in " + path + ": " + util::join(unknown, ", "));
      for (const auto& k : unknown) util::logger()->warn("unknown config key {} in {}", k, path);
    }
    c = config::load_config(path, overrides, {!debug, config::default_config()});
  }
  auto violations = config::validate_all(c);
  for (auto t : {batching::Task::Rec, batching::Task::Conv, batching::Task::Policy}) {
    const std::string key = std::string("task.") + batching::to_string(t) + ".model";
    const json* v = c.find(key);
    if (!v || !v->is_string() || v->get<std::string>() == "none") continue;
    if (!models::model_serves(v->get<std::string>(), t))
      violations.push_back({key, "unknown model '" + v->get<std::string>() +
                                     "'; valid: " + models::join_names(models::model_names(t))});
  }
  if (!violations.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(violations.size()) + " problem" +
                      (violations.size() == 1 ? "" : "s") + "):";
    for (const auto& v : violations) msg += "\n  " + v.key + ": " + v.message;
    throw ConfigError(msg);
  }
  return c;
}

// ---- corpus ----

// GET <url>/<name> for each missing unified file.
inline void http_fetch(const std::string& url, const fs::path& dir, const std::vector<std::string>& names) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw CorpusError("dataset.url must start with http:// or https://: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  httplib::Client client(origin);
  client.set_follow_location(true);
  for (const auto& name : names) {
    util::logger()->info("fetching {}/{}", url, name);
    auto res = client.Get(base + "/" + name);
    if (!res) throw CorpusError("fetch of " + name + " from " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw CorpusError("fetch of " + name + " from " + url + " returned HTTP " + std::to_string(res->status));
    util::write_file(dir / name, res->body);
  }
}

inline std::shared_ptr<const corpus::DatasetBundle> load_corpus(const config::ConfigTree& c) {
  const fs::path dir = c.get<std::string>("dataset.dir");
  corpus::LoadOptions o;
  o.tokenizer = corpus::tokenizer_from_string(c.get<std::string>("dataset.tokenizer"));
  o.min_freq = static_cast<int>(c.get<std::int64_t>("dataset.min_freq"));
  o.max_vocab = static_cast<int>(c.get<std::int64_t>("dataset.max_vocab"));
  o.url = c.get<std::string>("dataset.url");
  o.fetch = http_fetch;
  std::optional<corpus::Checksums> sums;
  if (c.get<bool>("dataset.verify_checksums") && fs::exists(dir / corpus::kChecksumFile))
    sums = corpus::read_checksums(dir / corpus::kChecksumFile);
  auto b = std::make_shared<corpus::DatasetBundle>(corpus::load_unified(dir, sums, o));
  util::logger()->info("loaded corpus {}: {} / {} / {} dialogs, {} items, vocab {}", dir.string(), b->train.size(),
                       b->valid.size(), b->test.size(), b->catalog_size(), b->vocab.size());
  return b;
}

// ---- run directories ----

// <run.output_dir>/<timestamp>-<hash8>, with a numeric suffix on collision.
inline fs::path make_run_dir(const config::ConfigTree& c, const std::string& salt = "") {
  const std::string hash = util::sha256_hex(config::to_config_text(c) + salt).substr(0, 8);
  const fs::path root = c.get<std::string>("run.output_dir");
  fs::path dir = root / (util::compact_time_now() + "-" + hash);
  for (int n = 2; fs::exists(dir); ++n) dir = root / (util::compact_time_now() + "-" + hash + "-" + std::to_string(n));
  fs::create_directories(dir);
  util::write_file(dir / "config.resolved.yaml", config::to_config_text(c));
  return dir;
}

inline void write_reports(const fs::path& file, const std::vector<eval::MetricReport>& reports, std::ostream& out) {
  for (const auto& r : reports) {
    eval::append_report(file, r);
    out << eval::format_report(r) << "\n";
  }
}

// The evaluation and serving settings of the active config replace the artifact's.
inline config::ConfigTree artifact_config(const train::ModelArtifact& a, const config::ConfigTree& active) {
  config::ConfigTree c(a.config);
  for (const char* section : {"eval", "serve"})
    if (active.find(section)) c.set(section, active.at(section));
  return c;
}

inline std::unique_ptr<train::System> load_system(const fs::path& artifact, const config::ConfigTree& active,
                                                  std::shared_ptr<const corpus::DatasetBundle> bundle) {
  auto a = train::load_artifact(artifact, bundle->fingerprint);
  a.config = artifact_config(a, active).root();
  return train::System::from_artifact(a, std::move(bundle));
}

// ---- serving ----

inline std::atomic<httplib::Server*>& active_server() {
  static std::atomic<httplib::Server*> s{nullptr};
  return s;
}

// Stops a running `serve` command; safe from a signal handler or another thread.
inline void stop_serving() {
  if (auto* s = active_server().load()) s->stop();
}

inline void on_signal(int) { stop_serving(); }

// readiness callback receives the bound port
inline int serve_systems(std::vector<serve::ServedSystem> systems, const config::ConfigTree& c,
                         const std::function<void(int)>& ready = {}) {
  const auto log = util::logger();
  serve::SessionManager mgr(std::move(systems),
                            {c.get<std::string>("serve.sessions_dir"), static_cast<int>(c.get<std::int64_t>("serve.top_k"))});
  httplib::Server svr;
  // no SO_REUSEPORT, so a port held by another process is reported
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  serve::mount_api(svr, mgr);
  const auto host = c.get<std::string>("serve.host");
  const int port = static_cast<int>(c.get<std::int64_t>("serve.port"));
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ServiceError(0, "bind_failed", "cannot listen on " + host + ":" + std::to_string(port) + " (port in use?)");
  active_server() = &svr;
  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  log->info("serving {} system(s) on http://{}:{}", mgr.systems_json().size(), host, bound);
  std::thread notifier;
  if (ready)
    notifier = std::thread([&] {
      svr.wait_until_ready();
      ready(bound);
    });
  svr.listen_after_bind();
  if (notifier.joinable()) notifier.join();
  active_server() = nullptr;
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  log->info("server stopped, {} session journal(s) in {}", mgr.session_count(), c.get<std::string>("serve.sessions_dir"));
  return kExitOk;
}

inline std::string system_id_for(const fs::path& artifact) {
  fs::path p = fs::weakly_canonical(artifact);
  if (p.filename().empty()) p = p.parent_path();
  if (p.filename() == "artifact" && p.has_parent_path()) return p.parent_path().filename().string();
  return p.filename().string();
}

// ---- commands ----

struct Options {
  std::string config;
  std::vector<std::string> sets;
  bool debug = false;
  // convert / toy
  std::string raw, format = "redial", out;
  std::uint64_t seed = 7;
  bool convert = false;
  // eval / serve
  std::vector<std::string> artifacts;
  std::string split = "test";
  int port = -1;
  std::string host;
};

inline int cmd_toy(const Options& o, std::ostream& out) {
  const auto info = corpus::write_toy_raw(o.raw, o.seed);
  out << "wrote toy raw release to " << o.raw << " (" << info.dialogs() << " dialogs, " << info.items << " items)\n";
  if (!o.out.empty()) {
    corpus::ingest_raw(o.raw, "redial", o.out);
    out << "converted to " << o.out << "\n";
  }
  return kExitOk;
}

inline int cmd_convert(const Options& o, std::ostream& out) {
  const auto c = load_run_config(o.config, o.sets, o.debug);
  if (!fs::is_directory(o.raw)) throw CorpusError("raw directory not found: " + o.raw);
  const fs::path dest = o.out.empty() ? fs::path(c.get<std::string>("dataset.dir")) : fs::path(o.out);
  corpus::IngestOptions io;
  io.valid_fraction = c.get<double>("dataset.valid_fraction");
  io.tokenizer = corpus::tokenizer_from_string(c.get<std::string>("dataset.tokenizer"));
  const auto r = corpus::ingest_raw(o.raw, o.format, dest, io);
  out << "converted " << o.raw << " (" << o.format << ") to " << dest.string() << ": " << r.train_dialogs << " train, "
      << r.valid_dialogs << " valid, " << r.test_dialogs << " test dialogs, " << r.utterances << " utterances, " << r.items
      << " items\n";
  return kExitOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  const auto c = load_run_config(o.config, o.sets, o.debug);
  const auto bundle = load_corpus(c);
  train::System sys(c, bundle);
  const fs::path run = make_run_dir(c);
  util::ScopedLogFile log_file(run / "train.log");
  util::logger()->info("run directory {}", run.string());
  const auto st = sys.fit();
  for (const auto& h : st.history) util::append_line(run / "history.jsonl", h.dump());
  const auto reports = sys.evaluate(corpus::Split::Test, c.get<bool>("eval.generate"));
  train::save_artifact(sys.artifact(reports), run / "artifact");
  out << "run " << run.string() << "\n";
  out << "best epoch " << st.best_epoch << " of " << st.epoch << ", " << c.get<std::string>("train.monitor") << " "
      << eval::fixed6(st.best_metric) << "\n";
  write_reports(run / "metrics.jsonl", reports, out);
  return kExitOk;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  const auto c = load_run_config(o.config, o.sets, o.debug);
  const auto split = corpus::split_from_string(o.split);
  if (!split) throw ConfigError("unknown split '" + o.split + "' (expected train, valid or test)");
  if (o.artifacts.size() != 1) throw ConfigError("eval takes exactly one --artifact");
  const auto sys = load_system(o.artifacts.front(), c, load_corpus(c));
  const fs::path run = make_run_dir(sys->config(), "eval:" + fs::absolute(o.artifacts.front()).string() + ":" + o.split);
  util::ScopedLogFile log_file(run / "eval.log");
  const auto reports = sys->evaluate(*split, sys->config().get<bool>("eval.generate"));
  out << "run " << run.string() << "\n";
  write_reports(run / "metrics.jsonl", reports, out);
  return kExitOk;
}

inline int cmd_serve(const Options& o, std::ostream& out, const std::function<void(int)>& ready = {}) {
  auto c = load_run_config(o.config, o.sets, o.debug);
  if (o.port >= 0) c.set("serve.port", o.port);
  if (!o.host.empty()) c.set("serve.host", o.host);
  if (o.artifacts.empty()) throw ConfigError("serve needs at least one --artifact");
  const auto bundle = load_corpus(c);
  std::vector<serve::ServedSystem> systems;
  std::set<std::string> ids;
  for (const auto& a : o.artifacts) {
    std::string id = o.artifacts.size() == 1 && !c.get<std::string>("serve.system_id").empty()
                         ? c.get<std::string>("serve.system_id")
                         : system_id_for(a);
    if (!ids.insert(id).second) throw ConfigError("two artifacts share the system id '" + id + "'");
    systems.push_back({id, load_system(a, c, bundle), fs::absolute(a).string()});
  }
  out << "serving " << util::join(std::vector<std::string>(ids.begin(), ids.end()), ", ") << "\n" << std::flush;
  return serve_systems(std::move(systems), c, ready);
}

// Parses argv and runs one command. Never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               const std::function<void(int)>& serve_ready = {}) {
  CLI::App app{"crskit: conversational recommender system toolkit"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", o.config, "YAML configuration file");
    if (needs_config) opt->required();
    sub->add_option("--set", o.sets, "override a config value, key=value (repeatable)");
    sub->add_flag("--debug", o.debug, "debug logging; unknown config keys only warn");
  };
  auto* toy = app.add_subcommand("toy", "write the seeded toy raw release");
  toy->add_option("raw", o.raw, "output directory for the raw files")->required();
  toy->add_option("--convert-to", o.out, "also convert it to a unified corpus here");
  toy->add_option("--seed", o.seed, "generator seed");
  toy->add_flag("--debug", o.debug, "debug logging");

  auto* convert = app.add_subcommand("convert", "convert a raw dataset release to the unified corpus");
  common(convert, false);
  convert->add_option("--raw", o.raw, "raw release directory")->required();
  convert->add_option("--format", o.format, "raw format name");
  convert->add_option("--out", o.out, "unified corpus directory (default: dataset.dir)");

  auto* trn = app.add_subcommand("train", "fit a system and save its artifact");
  common(trn, true);

  auto* ev = app.add_subcommand("eval", "evaluate a saved artifact");
  common(ev, true);
  ev->add_option("--artifact", o.artifacts, "artifact directory")->required();
  ev->add_option("--split", o.split, "train, valid or test");

  auto* srv = app.add_subcommand("serve", "run the interaction service");
  common(srv, true);
  srv->add_option("--artifact", o.artifacts, "artifact directory (repeatable)")->required();
  srv->add_option("--port", o.port, "listen port (default: serve.port; 0 picks a free port)");
  srv->add_option("--host", o.host, "listen address (default: serve.host)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  }
  util::set_verbose(o.debug);
  try {
    if (*toy) return cmd_toy(o, out);
    if (*convert) return cmd_convert(o, out);
    if (*trn) return cmd_train(o, out);
    if (*ev) return cmd_eval(o, out);
    return cmd_serve(o, out, serve_ready);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CorpusError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ModelError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ServiceError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUser;
}

}  // namespace crskit::cli
