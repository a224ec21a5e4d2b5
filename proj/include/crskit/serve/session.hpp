#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crskit/error.hpp"
#include "crskit/train/system.hpp"
#include "crskit/util/logging.hpp"
#include "crskit/util/strings.hpp"

namespace crskit::serve {

namespace fs = std::filesystem;
using nlohmann::json;
using train::System;

struct TurnRecord {
  int turn_id = 0;
  std::string user_text;
  std::optional<train::PolicyChoice> policy;
  std::vector<train::RecEntry> recommendations;
  std::string response;
  std::string response_raw;
  std::vector<int> response_items;
  json overrides_applied = json::object();
  std::string created_at;
};

enum class Status { Open, Closed };

struct SessionState {
  std::string session_id;
  std::string system_id;
  train::Profile profile;
  std::vector<TurnRecord> turns;
  Status status = Status::Open;
  std::string created_at;
};

// ---- JSON ----

inline json to_json(const train::PolicyChoice& p, const System& sys) {
  json top = json::array();
  for (const auto& [label, prob] : p.top) top.push_back({{"label", label}, {"name", sys.label_name(label)}, {"prob", prob}});
  return {{"label", p.label}, {"name", p.name}, {"top", top}};
}

inline train::PolicyChoice policy_from_json(const json& j) {
  train::PolicyChoice p;
  p.label = j.at("label").get<int>();
  p.name = j.at("name").get<std::string>();
  for (const auto& e : j.at("top")) p.top.emplace_back(e.at("label").get<int>(), e.at("prob").get<double>());
  return p;
}

inline json to_json(const TurnRecord& t, const System& sys) {
  json recs = json::array();
  for (const auto& r : t.recommendations)
    recs.push_back({{"item", r.item},
                    {"name", sys.bundle().item_catalog.at(static_cast<std::size_t>(r.item))},
                    {"score", r.score ? json(*r.score) : json(nullptr)}});
  return {{"turn_id", t.turn_id},
          {"user_text", t.user_text},
          {"policy_output", t.policy ? to_json(*t.policy, sys) : json(nullptr)},
          {"recommendations", recs},
          {"response", t.response},
          {"response_raw", t.response_raw},
          {"response_items", t.response_items},
          {"overrides_applied", t.overrides_applied},
          {"created_at", t.created_at}};
}

inline TurnRecord turn_from_json(const json& j) {
  TurnRecord t;
  t.turn_id = j.at("turn_id").get<int>();
  t.user_text = j.at("user_text").get<std::string>();
  if (!j.at("policy_output").is_null()) t.policy = policy_from_json(j.at("policy_output"));
  for (const auto& r : j.at("recommendations"))
    t.recommendations.push_back({r.at("item").get<int>(),
                                 r.at("score").is_null() ? std::nullopt : std::optional<double>(r.at("score").get<double>())});
  t.response = j.at("response").get<std::string>();
  t.response_raw = j.at("response_raw").get<std::string>();
  t.response_items = j.at("response_items").get<std::vector<int>>();
  t.overrides_applied = j.at("overrides_applied");
  t.created_at = j.at("created_at").get<std::string>();
  return t;
}

inline json profile_to_json(const train::Profile& p) { return {{"history", p.history}, {"text", p.text}}; }

inline json to_json(const SessionState& s, const System& sys) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t, sys));
  return {{"session_id", s.session_id},
          {"system_id", s.system_id},
          {"profile", profile_to_json(s.profile)},
          {"status", s.status == Status::Open ? "open" : "closed"},
          {"turns", turns},
          {"created_at", s.created_at}};
}

namespace detail {

[[noreturn]] inline void invalid(const std::string& msg, std::vector<std::string> details = {}) {
  throw ServiceError(422, "validation_error", msg, std::move(details));
}

inline std::vector<int> item_list(const json& v, const System& sys, const std::string& what) {
  if (!v.is_array()) invalid(what + " must be a list of item ids");
  std::vector<int> out;
  std::vector<std::string> bad;
  for (const auto& e : v) {
    if (!e.is_number_integer()) {
      bad.push_back(e.dump());
      continue;
    }
    const auto id = e.get<std::int64_t>();
    if (id < 0 || id >= sys.bundle().catalog_size()) bad.push_back(std::to_string(id));
    else out.push_back(static_cast<int>(id));
  }
  if (!bad.empty()) invalid("unknown item ids in " + what + ": " + util::join(bad, ", "), bad);
  return out;
}

}  // namespace detail

// Profile from a request body; item ids must exist in the serving catalog.
inline train::Profile parse_profile(const json& j, const System& sys) {
  train::Profile p;
  if (j.is_null()) return p;
  if (!j.is_object()) detail::invalid("profile must be an object");
  if (j.contains("history")) p.history = detail::item_list(j.at("history"), sys, "profile history");
  if (j.contains("text")) {
    if (!j.at("text").is_string()) detail::invalid("profile text must be a string");
    p.text = j.at("text").get<std::string>();
  }
  return p;
}

struct ServedSystem {
  std::string id;
  std::shared_ptr<const System> system;
  std::string artifact;  // where it was loaded from, informational
};

struct ManagerOptions {
  fs::path sessions_dir = "sessions";
  int top_k = 10;
};

// Sessions over loaded systems. Each session is journaled as JSONL under
// sessions_dir/<id>.jsonl and restored from there at construction.
class SessionManager {
 public:
  SessionManager(std::vector<ServedSystem> systems, ManagerOptions opt) : opt_(std::move(opt)) {
    if (opt_.top_k < 1) throw ConfigError("serve.top_k must be >= 1");
    for (auto& s : systems) systems_.emplace(s.id, std::move(s));
    fs::create_directories(opt_.sessions_dir);
    replay_journals();
  }

  json systems_json() const {
    json out = json::array();
    for (const auto& [id, s] : systems_) {
      json tasks = json::object();
      for (auto t : s.system->tasks()) tasks[train::task_key(t)] = s.system->model_name(t);
      out.push_back({{"system_id", id},
                     {"artifact", s.artifact},
                     {"tasks", tasks},
                     {"catalog_size", s.system->bundle().catalog_size()},
                     {"corpus_fingerprint", s.system->bundle().fingerprint}});
    }
    return out;
  }

  const System& system(const std::string& id) const {
    auto it = systems_.find(id);
    if (it == systems_.end()) throw ServiceError(404, "unknown_system", "unknown system_id '" + id + "'", {id});
    return *it->second.system;
  }

  json create_session(const json& profile, std::optional<std::string> system_id) {
    if (!system_id) {
      if (systems_.size() != 1) detail::invalid("system_id is required when several systems are loaded");
      system_id = systems_.begin()->first;
    }
    const System& sys = system(*system_id);
    auto entry = std::make_shared<Entry>();
    entry->state.system_id = *system_id;
    entry->state.profile = parse_profile(profile, sys);
    entry->state.created_at = util::iso_time_now();
    {
      std::lock_guard lock(mu_);
      do entry->state.session_id = fresh_id();
      while (sessions_.count(entry->state.session_id));
      sessions_.emplace(entry->state.session_id, entry);
    }
    journal(entry->state.session_id, {{"op", "create"},
                                      {"system_id", *system_id},
                                      {"profile", profile_to_json(entry->state.profile)},
                                      {"created_at", entry->state.created_at}});
    return to_json(entry->state, sys);
  }

  json post_message(const std::string& id, const json& text) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    auto& s = e->state;
    if (s.status == Status::Closed) throw ServiceError(409, "session_closed", "session " + id + " is closed", {id});
    if (!text.is_string()) detail::invalid("text must be a string");
    const auto msg = text.get<std::string>();
    if (util::trim(msg).empty()) detail::invalid("text is empty");
    const System& sys = system(s.system_id);
    TurnRecord t = run_turn(sys, s, s.turns.size(), msg, std::nullopt, std::nullopt);
    t.turn_id = static_cast<int>(s.turns.size()) + 1;
    t.created_at = util::iso_time_now();
    journal(id, {{"op", "turn"}, {"record", to_json(t, sys)}});
    s.turns.push_back(t);
    return to_json(t, sys);
  }

  json apply_override(const std::string& id, const json& turn_id, const std::string& field, const json& value) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    auto& s = e->state;
    if (s.status == Status::Closed) throw ServiceError(409, "session_closed", "session " + id + " is closed", {id});
    if (!turn_id.is_number_integer()) detail::invalid("turn_id must be an integer");
    const auto tid = turn_id.get<std::int64_t>();
    if (tid < 1 || tid > static_cast<std::int64_t>(s.turns.size()))
      throw ServiceError(404, "unknown_turn", "session " + id + " has no turn " + std::to_string(tid));
    if (tid != static_cast<std::int64_t>(s.turns.size()))
      throw ServiceError(409, "stale_turn",
                         "only the latest turn (" + std::to_string(s.turns.size()) + ") can be overridden, not turn " +
                             std::to_string(tid));
    const System& sys = system(s.system_id);
    const TurnRecord& old = s.turns.back();
    TurnRecord t;
    json applied = old.overrides_applied;
    if (field == "policy") {
      if (!sys.model(batching::Task::Policy)) detail::invalid("this system has no policy sub-task to override");
      train::PolicyChoice p = old.policy.value_or(train::PolicyChoice{});
      p.label = parse_label(value, sys);
      p.name = sys.label_name(p.label);
      t = run_turn(sys, s, s.turns.size() - 1, old.user_text, p, std::nullopt);
      applied["policy"] = p.name;
      applied.erase("recommendations");  // recomputed downstream of the new label
    } else if (field == "recommendations") {
      const auto items = detail::item_list(value, sys, "recommendations");
      if (items.empty()) detail::invalid("recommendations must not be empty");
      if (std::set<int>(items.begin(), items.end()).size() != items.size()) detail::invalid("recommendations contain duplicates");
      if (static_cast<int>(items.size()) > opt_.top_k)
        detail::invalid("at most " + std::to_string(opt_.top_k) + " recommendations can be given");
      std::vector<train::RecEntry> recs;
      for (int item : items) {
        std::optional<double> score;
        for (const auto& r : old.recommendations)
          if (r.item == item) score = r.score;
        recs.push_back({item, score});
      }
      // remaining slots follow the model's ranking
      if (sys.model(batching::Task::Rec)) {
        const auto tc = sys.turn_context(history(s, s.turns.size() - 1), s.profile, old.user_text);
        for (const auto& r : sys.run_rec(tc, sys.bundle().catalog_size())) {
          if (static_cast<int>(recs.size()) >= opt_.top_k) break;
          if (std::find(items.begin(), items.end(), r.item) == items.end()) recs.push_back(r);
        }
      }
      t = run_turn(sys, s, s.turns.size() - 1, old.user_text, old.policy, recs);
      applied["recommendations"] = items;
    } else {
      detail::invalid("field must be recommendations or policy, got '" + field + "'", {field});
    }
    t.turn_id = old.turn_id;
    t.created_at = old.created_at;
    t.overrides_applied = applied;
    journal(id, {{"op", "revise"}, {"field", field}, {"value", value}, {"record", to_json(t, sys)}});
    s.turns.back() = t;
    return to_json(t, sys);
  }

  json get_state(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return to_json(e->state, system(e->state.system_id));
  }

  json close_session(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    if (e->state.status == Status::Open) {
      journal(id, {{"op", "close"}, {"at", util::iso_time_now()}});
      e->state.status = Status::Closed;
    }
    return to_json(e->state, system(e->state.system_id));
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  struct Entry {
    mutable std::mutex mu;
    SessionState state;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown_session", "unknown session '" + id + "'", {id});
    return it->second;
  }

  static int parse_label(const json& v, const System& sys) {
    if (v.is_string()) {
      if (auto id = sys.bundle().find_policy_label(v.get<std::string>())) return *id;
      detail::invalid("unknown policy label '" + v.get<std::string>() + "'", {v.get<std::string>()});
    }
    if (v.is_number_integer()) {
      const auto id = v.get<std::int64_t>();
      for (const auto& l : sys.bundle().policy_labels)
        if (l.id == id) return l.id;
      detail::invalid("unknown policy label " + std::to_string(id), {std::to_string(id)});
    }
    detail::invalid("policy override must be a label name or id");
  }

  static std::vector<train::PastTurn> history(const SessionState& s, std::size_t n) {
    std::vector<train::PastTurn> hist;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = s.turns[i];
      hist.push_back({t.user_text, t.response_raw, t.response_items,
                      t.policy ? std::optional<int>(t.policy->label) : std::nullopt});
    }
    return hist;
  }

  // Runs the policy, rec and conv stages on the first `n` turns of `s` plus
  // `text`; a forced stage output replaces that stage.
  TurnRecord run_turn(const System& sys, const SessionState& s, std::size_t n, const std::string& text,
                      std::optional<train::PolicyChoice> policy, std::optional<std::vector<train::RecEntry>> recs) const {
    const auto tc = sys.turn_context(history(s, n), s.profile, text);
    TurnRecord out;
    out.user_text = text;
    out.policy = policy ? policy : sys.run_policy(tc);
    out.recommendations = recs ? *recs : sys.run_rec(tc, opt_.top_k);
    const auto conv = sys.run_conv(tc, out.recommendations);
    out.response = conv.response;
    out.response_raw = conv.response_raw;
    out.response_items = conv.response_items;
    return out;
  }

  std::string fresh_id() {
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 16; ++i) id += hex[id_rng_() % 16];
    return id;
  }

  fs::path journal_path(const std::string& id) const { return opt_.sessions_dir / (id + ".jsonl"); }

  void journal(const std::string& id, const json& line) const { util::append_line(journal_path(id), line.dump()); }

  void replay_journals() {
    for (const auto& f : fs::directory_iterator(opt_.sessions_dir)) {
      if (f.path().extension() != ".jsonl") continue;
      const std::string id = f.path().stem().string();
      try {
        auto e = std::make_shared<Entry>();
        e->state.session_id = id;
        for (const auto& line : util::split(util::read_file(f.path()), '\n')) {
          if (util::trim(line).empty()) continue;
          const json j = json::parse(line);
          const auto op = j.at("op").get<std::string>();
          if (op == "create") {
            e->state.system_id = j.at("system_id").get<std::string>();
            e->state.profile.history = j.at("profile").at("history").get<std::vector<int>>();
            e->state.profile.text = j.at("profile").at("text").get<std::string>();
            e->state.created_at = j.at("created_at").get<std::string>();
          } else if (op == "turn") {
            e->state.turns.push_back(turn_from_json(j.at("record")));
          } else if (op == "revise") {
            if (e->state.turns.empty()) throw ServiceError(500, "corrupt_journal", "revision before any turn");
            e->state.turns.back() = turn_from_json(j.at("record"));
          } else if (op == "close") {
            e->state.status = Status::Closed;
          }
        }
        if (!systems_.count(e->state.system_id)) {
          util::logger()->warn("session {} belongs to system '{}', which is not loaded; skipped", id, e->state.system_id);
          continue;
        }
        sessions_.emplace(id, e);
      } catch (const std::exception& ex) {
        util::logger()->warn("could not replay session journal {}: {}", f.path().string(), ex.what());
      }
    }
    if (!sessions_.empty()) util::logger()->info("restored {} session(s) from {}", sessions_.size(), opt_.sessions_dir.string());
  }

  ManagerOptions opt_;
  std::map<std::string, ServedSystem> systems_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace crskit::serve
