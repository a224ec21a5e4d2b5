#include <gtest/gtest.h>

#include <thread>

#include "crskit/serve/http.hpp"
#include "support/toy_system.hpp"

using namespace crskit;
using namespace crskit::serve;
using test::small_config;
using test::toy_bundle;

namespace {

std::shared_ptr<const train::System> toy_system(const std::string& rec = "popularity", const std::string& conv = "transformer",
                                                const std::string& policy = "pmi") {
  auto s = std::make_shared<train::System>(small_config(rec, conv, policy), toy_bundle());
  s->fit_statistics();
  return s;
}

// Flat decoder whose first token follows the recommended item: item 1 -> "enjoy", item 2 -> "thanks".
std::shared_ptr<const train::System> crafted_kbrd() {
  auto s = std::make_shared<train::System>(small_config("kbrd", "kbrd", "pmi"), toy_bundle());
  s->fit_statistics();
  auto* m = s->model(batching::Task::Conv);
  m->params().at("kbrd/kbrd.transformer.out.w").value.setZero();
  m->params().at("kbrd/kbrd.transformer.out.b").value.setZero();
  const auto& kbrd = dynamic_cast<const models::Kbrd&>(*m);
  nn::Tape t(false);
  const nn::Matrix states = kbrd.encoder().node_states(t).value();
  nn::Matrix pair(2, states.cols());
  pair << states.row(toy_bundle()->item2entity.at(1)), states.row(toy_bundle()->item2entity.at(2));
  const nn::Matrix dual = pair.completeOrthogonalDecomposition().pseudoInverse();
  auto& proj = m->params().at("kbrd/kbrd.bias_projection").value;
  proj.setZero();
  proj.col(toy_bundle()->vocab.id("enjoy")) = 1e3 * dual.col(0);
  proj.col(toy_bundle()->vocab.id("thanks")) = 1e3 * dual.col(1);
  return s;
}

json strip_times(json j) {
  if (j.is_object()) {
    j.erase("created_at");
    for (auto& [k, v] : j.items()) v = strip_times(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_times(v);
  }
  return j;
}

int status_of(const std::function<void()>& fn, std::string* code = nullptr, std::string* message = nullptr) {
  try {
    fn();
  } catch (const ServiceError& e) {
    if (code) *code = e.code();
    if (message) *message = e.what();
    return e.status();
  }
  return 0;
}

struct Fixture {
  test::TempDir dir;
  SessionManager mgr;
  explicit Fixture(std::shared_ptr<const train::System> sys, int k = 3)
      : mgr({{"toy", std::move(sys), "memory"}}, {dir.path() / "sessions", k}) {}
};

}  // namespace

// ---- sessions ----

TEST(Sessions, CreateValidProfile) {
  Fixture f(toy_system());
  const auto s = f.mgr.create_session({{"history", {1, 2}}, {"text", "i like comedy"}}, "toy");
  EXPECT_EQ(s["status"], "open");
  EXPECT_TRUE(s["turns"].empty());
  EXPECT_EQ(s["profile"]["history"], json({1, 2}));
  EXPECT_EQ(s["system_id"], "toy");
}

TEST(Sessions, UnknownProfileItemIsNamed) {
  Fixture f(toy_system());
  std::string code, msg;
  EXPECT_EQ(status_of([&] { f.mgr.create_session({{"history", {1, 9999}}}, "toy"); }, &code, &msg), 422);
  EXPECT_EQ(code, "validation_error");
  EXPECT_NE(msg.find("9999"), std::string::npos);
  EXPECT_EQ(f.mgr.session_count(), 0u);
}

TEST(Sessions, IdsAreDistinctAndSystemMustExist) {
  Fixture f(toy_system());
  const auto a = f.mgr.create_session(json(), "toy"), b = f.mgr.create_session(json(), std::nullopt);
  EXPECT_NE(a["session_id"], b["session_id"]);
  EXPECT_EQ(status_of([&] { f.mgr.create_session(json(), "other"); }), 404);
}

TEST(Sessions, FirstMessagePopulatesEveryComponent) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  const auto t = f.mgr.post_message(id, "i like comedy movies , something funny .");
  EXPECT_EQ(t["turn_id"], 1);
  EXPECT_FALSE(t["policy_output"].is_null());
  EXPECT_FALSE(t["policy_output"]["top"].empty());
  EXPECT_LE(t["policy_output"]["top"].size(), 5u);
  EXPECT_EQ(t["recommendations"].size(), 3u);
  EXPECT_TRUE(t["recommendations"][0]["score"].is_number());
  EXPECT_FALSE(t["response"].get<std::string>().empty());
  EXPECT_TRUE(t["overrides_applied"].empty());
  EXPECT_FALSE(t["created_at"].get<std::string>().empty());
}

TEST(Sessions, IdenticalSessionsGiveIdenticalTurns) {
  Fixture f(toy_system("sasrec", "hred", "mgcg"));
  const std::string a = f.mgr.create_session({{"history", {0}}}, "toy")["session_id"];
  const std::string b = f.mgr.create_session({{"history", {0}}}, "toy")["session_id"];
  for (const char* msg : {"hello", "i like action movies", "yes i love it"})
    EXPECT_EQ(strip_times(f.mgr.post_message(a, msg)), strip_times(f.mgr.post_message(b, msg)));
}

TEST(Sessions, MessageValidation) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  EXPECT_EQ(status_of([&] { f.mgr.post_message(id, "   "); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.post_message(id, 5); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.post_message("nope", "hi"); }), 404);
  f.mgr.close_session(id);
  std::string code;
  EXPECT_EQ(status_of([&] { f.mgr.post_message(id, "hi"); }, &code), 409);
  EXPECT_EQ(code, "session_closed");
}

TEST(Sessions, StateAndClose) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  f.mgr.post_message(id, "hello");
  f.mgr.post_message(id, "i like drama");
  const auto s = f.mgr.get_state(id);
  ASSERT_EQ(s["turns"].size(), 2u);
  EXPECT_EQ(s["turns"][0]["turn_id"], 1);
  EXPECT_EQ(s["turns"][1]["turn_id"], 2);
  EXPECT_EQ(f.mgr.close_session(id)["status"], "closed");
  EXPECT_EQ(f.mgr.get_state(id)["status"], "closed");
  EXPECT_EQ(f.mgr.close_session(id), f.mgr.get_state(id));
}

// ---- overrides ----

TEST(Overrides, IdenticalValueOnlyAddsTheRecord) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  const auto t = f.mgr.post_message(id, "hello");
  json items = json::array();
  for (const auto& r : t["recommendations"]) items.push_back(r["item"]);
  auto revised = f.mgr.apply_override(id, 1, "recommendations", items);
  EXPECT_EQ(revised["overrides_applied"]["recommendations"], items);
  revised["overrides_applied"] = json::object();
  EXPECT_EQ(revised, t);
  auto again = f.mgr.apply_override(id, 1, "policy", t["policy_output"]["name"]);
  EXPECT_EQ(again["overrides_applied"], json({{"policy", t["policy_output"]["name"]}}));
  again["overrides_applied"] = json::object();
  EXPECT_EQ(again, t);
}

TEST(Overrides, OnlyTheLatestTurn) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  f.mgr.post_message(id, "hello");
  f.mgr.post_message(id, "i like drama");
  std::string code;
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "recommendations", {1}); }, &code), 409);
  EXPECT_EQ(code, "stale_turn");
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 3, "recommendations", {1}); }), 404);
}

TEST(Overrides, BadValues) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  f.mgr.post_message(id, "hello");
  std::string msg;
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "recommendations", {1, 777}); }, nullptr, &msg), 422);
  EXPECT_NE(msg.find("777"), std::string::npos);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "recommendations", json::array()); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "recommendations", {1, 1}); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "policy", "no_such_label"); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "policy", 99); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "response", "x"); }), 422);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, "1", "policy", 0); }), 422);
}

TEST(Overrides, RecommendationOverrideLeavesPolicyAlone) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  const auto t = f.mgr.post_message(id, "hello");
  const auto r = f.mgr.apply_override(id, 1, "recommendations", {4, 0});
  EXPECT_EQ(r["policy_output"], t["policy_output"]);
  EXPECT_EQ(r["user_text"], t["user_text"]);
  ASSERT_EQ(r["recommendations"].size(), 3u);
  EXPECT_EQ(r["recommendations"][0]["item"], 4);
  EXPECT_EQ(r["recommendations"][1]["item"], 0);
  // the last slot is the best-ranked item not already listed
  std::vector<int> ranked;
  for (const auto& e : t["recommendations"]) ranked.push_back(e["item"]);
  auto full = f.mgr.apply_override(id, 1, "recommendations", {ranked[0]});
  EXPECT_EQ(full["recommendations"], t["recommendations"]);
  EXPECT_EQ(status_of([&] { f.mgr.apply_override(id, 1, "recommendations", {0, 1, 2, 3}); }), 422);
  const auto third = r["recommendations"][2]["item"].get<int>();
  EXPECT_NE(third, 4);
  EXPECT_NE(third, 0);
}

TEST(Overrides, PolicyOverrideRecordsTheLabel) {
  Fixture f(toy_system());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  const auto t = f.mgr.post_message(id, "hello");
  const auto& labels = toy_bundle()->policy_labels;
  const auto other = labels.back().id == t["policy_output"]["label"] ? labels.front() : labels.back();
  const auto r = f.mgr.apply_override(id, 1, "policy", other.id);
  EXPECT_EQ(r["policy_output"]["label"], other.id);
  EXPECT_EQ(r["policy_output"]["name"], other.name);
  EXPECT_EQ(r["overrides_applied"]["policy"], other.name);
  EXPECT_EQ(r["user_text"], t["user_text"]);
  EXPECT_EQ(r["turn_id"], 1);
}

TEST(Overrides, KbrdRecommendationChangesFirstToken) {
  Fixture f(crafted_kbrd());
  const std::string id = f.mgr.create_session(json(), "toy")["session_id"];
  f.mgr.post_message(id, "hello");
  const auto a = f.mgr.apply_override(id, 1, "recommendations", {1});
  const auto b = f.mgr.apply_override(id, 1, "recommendations", {2});
  EXPECT_EQ(a["response_raw"].get<std::string>().rfind("enjoy", 0), 0u) << a["response_raw"];
  EXPECT_EQ(b["response_raw"].get<std::string>().rfind("thanks", 0), 0u) << b["response_raw"];
}

// ---- journal ----

TEST(Journal, RestartRestoresSessions) {
  test::TempDir dir;
  const auto sys = toy_system();
  json before;
  std::string id;
  {
    SessionManager m({{"toy", sys, ""}}, {dir.path(), 3});
    id = m.create_session({{"history", {2}}}, "toy")["session_id"];
    m.post_message(id, "hello");
    m.post_message(id, "i like drama");
    m.apply_override(id, 2, "recommendations", {3});
    m.close_session(id);
    before = m.get_state(id);
  }
  SessionManager m2({{"toy", sys, ""}}, {dir.path(), 3});
  EXPECT_EQ(m2.get_state(id), before);
  EXPECT_EQ(status_of([&] { m2.post_message(id, "more"); }), 409);
}

TEST(Journal, UnreadableJournalIsSkipped) {
  test::TempDir dir;
  util::write_file(dir.path() / "broken.jsonl", "{not json\n");
  SessionManager m({{"toy", toy_system(), ""}}, {dir.path(), 3});
  EXPECT_EQ(m.session_count(), 0u);
}

// ---- HTTP ----

namespace {

struct Server {
  test::TempDir dir;
  SessionManager mgr;
  httplib::Server svr;
  std::thread th;
  int port = 0;

  explicit Server(std::shared_ptr<const train::System> sys) : mgr({{"toy", std::move(sys), "memory"}}, {dir.path(), 3}) {
    mount_api(svr, mgr);
    port = svr.bind_to_any_port("127.0.0.1");
    th = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~Server() {
    svr.stop();
    th.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto r = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(r);
  if (!r) return {};
  EXPECT_EQ(r->status, expect) << path << " " << r->body;
  return json::parse(r->body);
}

}  // namespace

TEST(Http, ScriptedSessionReplaysIdentically) {
  Server s(toy_system("kbrd", "kbrd", "mgcg"));
  auto c = s.client();
  const json profile = {{"history", {1}}, {"text", "i like comedy movies"}};
  const std::vector<std::string> script{"hello !", "i like comedy movies , something funny .", "yes i love it"};

  const auto run = [&](json* overridden) {
    const std::string id = post(c, "/api/sessions", {{"profile", profile}, {"system_id", "toy"}}, 201)["session"]["session_id"];
    json turns = json::array();
    for (const auto& m : script) turns.push_back(post(c, "/api/sessions/" + id + "/messages", {{"text", m}}, 200)["turn"]);
    const json rev =
        post(c, "/api/sessions/" + id + "/override", {{"turn_id", 3}, {"field", "recommendations"}, {"value", {4, 2}}}, 200)["turn"];
    if (overridden) *overridden = rev;
    // override locality: upstream fields untouched, earlier turns untouched
    EXPECT_EQ(rev["policy_output"], turns[2]["policy_output"]);
    EXPECT_EQ(rev["user_text"], turns[2]["user_text"]);
    EXPECT_EQ(rev["turn_id"], 3);
    auto got = c.Get("/api/sessions/" + id);
    EXPECT_EQ(got->status, 200);
    const json state = json::parse(got->body)["session"];
    EXPECT_EQ(state["turns"][0], turns[0]);
    EXPECT_EQ(state["turns"][1], turns[1]);
    EXPECT_EQ(state["turns"][2], rev);
    return state;
  };
  json rev_a, rev_b;
  const json a = run(&rev_a), b = run(&rev_b);
  EXPECT_EQ(strip_times(a["turns"]), strip_times(b["turns"]));
  EXPECT_EQ(rev_a["recommendations"][0]["item"], 4);
  EXPECT_EQ(rev_a["overrides_applied"]["recommendations"], json({4, 2}));
}

TEST(Http, ErrorsAreStructured) {
  Server s(toy_system());
  auto c = s.client();
  auto e = post(c, "/api/sessions", {{"profile", {{"history", {9999}}}}}, 422);
  EXPECT_EQ(e["error"]["code"], "validation_error");
  EXPECT_EQ(e["error"]["details"], json({"9999"}));
  e = post(c, "/api/sessions/missing/messages", {{"text", "hi"}}, 404);
  EXPECT_EQ(e["error"]["code"], "unknown_session");
  auto r = c.Post("/api/sessions", "{oops", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["error"]["code"], "invalid_json");
  r = c.Get("/api/nothing/here");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body)["error"]["code"], "not_found");
}

TEST(Http, LifecycleEndpoints) {
  Server s(toy_system());
  auto c = s.client();
  auto r = c.Get("/api/systems");
  ASSERT_TRUE(r);
  const json systems = json::parse(r->body)["systems"];
  ASSERT_EQ(systems.size(), 1u);
  EXPECT_EQ(systems[0]["system_id"], "toy");
  EXPECT_EQ(systems[0]["tasks"]["rec"], "popularity");
  const std::string id = post(c, "/api/sessions", json::object(), 201)["session"]["session_id"];
  post(c, "/api/sessions/" + id + "/messages", {{"text", "hello"}}, 200);
  r = c.Delete("/api/sessions/" + id);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["session"]["status"], "closed");
  const auto e = post(c, "/api/sessions/" + id + "/messages", {{"text", "again"}}, 409);
  EXPECT_EQ(e["error"]["code"], "session_closed");
  const auto stale = post(c, "/api/sessions/" + id + "/override", {{"turn_id", 1}, {"field", "policy"}, {"value", 0}}, 409);
  EXPECT_EQ(stale["error"]["code"], "session_closed");
}
