#include <gtest/gtest.h>

#include <future>
#include <regex>
#include <sstream>

#include "crskit/cli/app.hpp"
#include "support/temp_dir.hpp"

using namespace crskit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "crskit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config_path() { return std::string(CRSKIT_SOURCE_DIR) + "/configs/toy.yaml"; }

// Toy raw + unified corpus plus the --set flags pointing a run into `dir`.
struct Workspace {
  test::TempDir tmp;
  fs::path raw = tmp.path() / "raw", data = tmp.path() / "data", runs = tmp.path() / "runs";
  Workspace() { EXPECT_EQ(run_cli({"toy", raw.string(), "--convert-to", data.string()}).code, 0); }
  std::vector<std::string> with(std::vector<std::string> args) const {
    for (const auto& s : {"dataset.dir=" + data.string(), "run.output_dir=" + runs.string(),
                          "serve.sessions_dir=" + (tmp.path() / "sessions").string()}) {
      args.push_back("--set");
      args.push_back(s);
    }
    return args;
  }
  fs::path only_run() const {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(runs)) dirs.push_back(e.path());
    EXPECT_EQ(dirs.size(), 1u);
    return dirs.empty() ? fs::path() : dirs.front();
  }
};

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  for (const auto& l : util::split(util::read_file(p), '\n'))
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, ConvertWritesUnifiedFilesDeterministically) {
  Workspace w;
  const fs::path a = w.tmp.path() / "a", b = w.tmp.path() / "b";
  auto r = run_cli({"convert", "--raw", w.raw.string(), "--out", a.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("8 train, 2 valid, 2 test"), std::string::npos) << r.out;
  ASSERT_EQ(run_cli({"convert", "--raw", w.raw.string(), "--out", b.string()}).code, 0);
  EXPECT_TRUE(fs::exists(a / corpus::kChecksumFile));
  for (const auto& f : fs::directory_iterator(a))
    EXPECT_EQ(util::read_file(f.path()), util::read_file(b / f.path().filename())) << f.path();
}

TEST(Cli, ConvertMissingRawDirNamesIt) {
  test::TempDir tmp;
  const auto missing = (tmp.path() / "nowhere").string();
  const auto r = run_cli({"convert", "--raw", missing, "--out", (tmp.path() / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, ConvertUnknownFormat) {
  Workspace w;
  const auto r = run_cli({"convert", "--raw", w.raw.string(), "--format", "nope", "--out", (w.tmp.path() / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("redial"), std::string::npos);
}

TEST(Cli, TrainWritesRunDirectory) {
  Workspace w;
  const auto r = run_cli(w.with({"train", "--config", config_path()}));
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path run = w.only_run();
  EXPECT_TRUE(std::regex_match(run.filename().string(), std::regex(R"(\d{8}T\d{6}Z-[0-9a-f]{8})"))) << run;
  for (const char* f : {"config.resolved.yaml", "history.jsonl", "metrics.jsonl", "train.log", "artifact/artifact.manifest.json",
                        "artifact/artifact.params.bin"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  EXPECT_EQ(lines(run / "history.jsonl").size(), 2u);
  const auto metrics = lines(run / "metrics.jsonl");
  ASSERT_EQ(metrics.size(), 3u);
  for (const auto& l : metrics) {
    const json j = json::parse(l);
    EXPECT_EQ(j["split"], "test");
    for (const auto& [k, v] : j["metrics"].items()) EXPECT_TRUE(std::isfinite(v.get<double>())) << k;
  }
  EXPECT_NE(r.out.find("ppl"), std::string::npos);
  EXPECT_NE(r.out.find("hit@10"), std::string::npos);
}

TEST(Cli, SetOverridesEpochs) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path(), "--set", "train.epochs=1"})).code, 0);
  EXPECT_EQ(lines(w.only_run() / "history.jsonl").size(), 1u);
}

TEST(Cli, SnapshotConfigReproducesTheRun) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path()})).code, 0);
  const fs::path first = w.only_run();
  const fs::path moved = w.tmp.path() / "first";
  fs::rename(first, moved);
  const auto r = run_cli({"train", "--config", (moved / "config.resolved.yaml").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path second = w.only_run();
  EXPECT_EQ(util::read_file(moved / "history.jsonl"), util::read_file(second / "history.jsonl"));
  EXPECT_EQ(util::read_file(moved / "artifact/artifact.params.bin"), util::read_file(second / "artifact/artifact.params.bin"));
  EXPECT_EQ(util::read_file(moved / "config.resolved.yaml"), util::read_file(second / "config.resolved.yaml"));
}

TEST(Cli, InvalidModelListsRegistry) {
  Workspace w;
  const auto r = run_cli(w.with({"train", "--config", config_path(), "--set", "task.rec.model=bogus"}));
  EXPECT_EQ(r.code, 1);
  for (const char* name : {"popularity", "gru4rec", "sasrec", "kbrd", "rgcn", "textcnn"})
    EXPECT_NE(r.err.find(name), std::string::npos) << name;
  EXPECT_FALSE(fs::exists(w.runs));
}

TEST(Cli, ConfigViolationsAreListedTogether) {
  Workspace w;
  const auto r = run_cli(w.with({"train", "--config", config_path(), "--set", "train.mode=up", "--set", "data.batch_size=0",
                                 "--set", "task.conv.model=popularity"}));
  EXPECT_EQ(r.code, 1);
  for (const char* key : {"train.mode", "data.batch_size", "task.conv.model"}) EXPECT_NE(r.err.find(key), std::string::npos) << key;
}

TEST(Cli, UnknownKeysFailStrictAndWarnInDebug) {
  Workspace w;
  const fs::path cfg = w.tmp.path() / "c.yaml";
  util::write_file(cfg, util::read_file(config_path()) + "extra:\n  knob: 1\n");
  auto r = run_cli(w.with({"train", "--config", cfg.string(), "--set", "train.epochs=1"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("extra.knob"), std::string::npos);
  r = run_cli(w.with({"train", "--config", cfg.string(), "--set", "train.epochs=1", "--debug"}));
  EXPECT_EQ(r.code, 0) << r.err;
  util::set_verbose(false);
  r = run_cli(w.with({"train", "--config", config_path(), "--set", "train.nonsense=3"}));
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, TaskSpecificModelKeysAreKnown) {
  config::ConfigTree file = config::parse_config_text("task:\n  rec:\n    model: gru4rec\n    hidden_dim: 4\n    bogus: 1\n");
  EXPECT_EQ(cli::unknown_keys(file), (std::vector<std::string>{"task.rec.bogus"}));
}

TEST(Cli, EvalPrintsConfiguredMetrics) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path()})).code, 0);
  const fs::path art = w.only_run() / "artifact";
  const auto r = run_cli(w.with({"eval", "--config", config_path(), "--artifact", art.string(), "--split", "test"}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* m : {"accuracy", "hit@1", "mrr@10", "ndcg@50", "ppl", "bleu-1", "dist-2", "embedding-greedy"})
    EXPECT_NE(r.out.find(m), std::string::npos) << m;
  // the reports match those stored with the artifact
  const auto stored = train::load_artifact(art).metrics;
  for (const auto& rep : stored) EXPECT_NE(r.out.find(eval::format_report(rep)), std::string::npos) << rep.task;
}

TEST(Cli, EvalUnknownSplit) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path(), "--set", "train.epochs=1"})).code, 0);
  const auto r = run_cli(w.with({"eval", "--config", config_path(), "--artifact", (w.only_run() / "artifact").string(),
                                 "--split", "dev"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dev"), std::string::npos);
}

TEST(Cli, EvalOnChangedCorpusWarnsThenReports) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path(), "--set", "train.epochs=1"})).code, 0);
  const fs::path art = w.only_run() / "artifact";
  // same sizes, different bytes
  const fs::path test_file = w.data / "test.jsonl";
  util::write_file(test_file, util::read_file(test_file) + "\n");
  testing::internal::CaptureStderr();
  const auto r = run_cli(w.with({"eval", "--config", config_path(), "--artifact", art.string(), "--set",
                                 "dataset.verify_checksums=false"}));
  const std::string log = testing::internal::GetCapturedStderr();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(log.find("warning"), std::string::npos) << log;
  EXPECT_NE(r.out.find("ppl"), std::string::npos);
}

TEST(Cli, MissingArtifactIsUserError) {
  Workspace w;
  const auto r = run_cli(w.with({"eval", "--config", config_path(), "--artifact", (w.tmp.path() / "none").string()}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("none"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"train"}).code, 1);
  EXPECT_EQ(run_cli({"train", "--config", "/nonexistent.yaml"}).code, 1);
  EXPECT_EQ(run_cli({"train", "--config", config_path(), "--set", "novalue"}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, ServeScriptedSession) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path(), "--set", "train.epochs=1"})).code, 0);
  const fs::path art = w.only_run() / "artifact";
  const auto args = w.with({"serve", "--config", config_path(), "--artifact", art.string(), "--port", "0"});
  std::vector<const char*> argv{"crskit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::promise<int> port;
  std::ostringstream out, err;
  auto served = std::async(std::launch::async, [&] {
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err, [&](int p) { port.set_value(p); });
  });
  auto fut = port.get_future();
  ASSERT_EQ(fut.wait_for(std::chrono::seconds(30)), std::future_status::ready);
  httplib::Client c("127.0.0.1", fut.get());
  auto r = c.Get("/api/systems");
  ASSERT_TRUE(r);
  const std::string sid = json::parse(r->body)["systems"][0]["system_id"];
  EXPECT_EQ(sid, w.only_run().filename().string());
  r = c.Post("/api/sessions", json({{"profile", {{"history", {1}}}}}).dump(), "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 201);
  const std::string id = json::parse(r->body)["session"]["session_id"];
  r = c.Post("/api/sessions/" + id + "/messages", R"({"text": "hello"})", "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  const json turn = json::parse(r->body)["turn"];
  EXPECT_EQ(turn["turn_id"], 1);
  EXPECT_EQ(turn["recommendations"].size(), 5u);
  cli::stop_serving();
  EXPECT_EQ(served.get(), 0) << err.str();
  EXPECT_TRUE(fs::exists(w.tmp.path() / "sessions" / (id + ".jsonl")));
}

TEST(Cli, ServePortInUse) {
  Workspace w;
  ASSERT_EQ(run_cli(w.with({"train", "--config", config_path(), "--set", "train.epochs=1"})).code, 0);
  httplib::Server blocker;
  const int port = blocker.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  const auto r = run_cli(w.with({"serve", "--config", config_path(), "--artifact", (w.only_run() / "artifact").string(),
                                 "--port", std::to_string(port)}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(std::to_string(port)), std::string::npos) << r.err;
}
