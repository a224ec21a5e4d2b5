// Acceptance checks: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <future>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "crskit/cli/app.hpp"
#include "support/gradcheck.hpp"
#include "support/metric_oracles.hpp"
#include "support/model_fixtures.hpp"
#include "support/rgcn_oracle.hpp"
#include "support/temp_dir.hpp"
#include "support/toy_system.hpp"

using namespace crskit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Kind { Pass, Fail, Skip } kind = Pass;
  std::string detail;
};

Outcome fail(const std::string& why) { return {Outcome::Fail, why}; }

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(2) << std::scientific << v;
  return os.str();
}

// Tracks the largest deviation against a tolerance and the first offender.
struct Worst {
  double tol;
  double max = 0.0;
  std::string first_bad;
  void check(double got, double want, const std::string& what) {
    const double d = std::isnan(got) || std::isnan(want) ? INFINITY : std::abs(got - want);
    max = std::max(max, d);
    if (d > tol && first_bad.empty()) first_bad = what + ": got " + std::to_string(got) + " want " + std::to_string(want);
  }
  bool ok() const { return first_bad.empty(); }
};

// ---- metric oracles ----

Outcome metric_oracles() {
  Worst w{1e-9};
  std::mt19937_64 rng(20260101);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string at = "corpus " + std::to_string(trial);
    const int vocab = 1 + static_cast<int>(rng() % 10);
    const int sentences = 1 + static_cast<int>(rng() % 20);
    const int items = 1 + static_cast<int>(rng() % 8);
    const auto hyps = test::random_corpus(rng, sentences, vocab);
    const auto refs = test::random_corpus(rng, sentences, vocab);
    for (int n = 1; n <= 4; ++n) {
      double oracle = 0.0;
      for (int i = 0; i < sentences; ++i) oracle += test::oracle_sentence_bleu(hyps[i], refs[i], n);
      w.check(eval::bleu_n(hyps, refs, n), oracle / sentences, at + " bleu-" + std::to_string(n));
      long total = 0;
      for (const auto& h : hyps) total += std::max<long>(0, static_cast<long>(h.size()) - n + 1);
      if (total > 0) w.check(eval::distinct_n(hyps, n), test::oracle_distinct(hyps, n), at + " dist-" + std::to_string(n));
    }
    corpus::WordVectors wv;
    for (int t = 0; t < vocab; ++t)
      if (t % 4 != 3) wv["w" + std::to_string(t)] = {g(rng), g(rng), g(rng)};
    bool scorable = false;
    for (int i = 0; i < sentences; ++i) {
      bool h = false, r = false;
      for (const auto& t : hyps[i]) h |= wv.count(t) > 0;
      for (const auto& t : refs[i]) r |= wv.count(t) > 0;
      scorable |= h && r;
    }
    if (scorable) {
      const auto e = eval::embedding_metrics(hyps, refs, wv);
      const auto o = test::oracle_embedding(hyps, refs, wv);
      w.check(e.average, o.average, at + " embedding-average");
      w.check(e.extreme, o.extreme, at + " embedding-extreme");
      w.check(e.greedy, o.greedy, at + " embedding-greedy");
    }
    // one recommendation per sentence over the item catalog, integer scores for ties
    std::vector<int> ranks;
    for (int i = 0; i < sentences; ++i) {
      std::vector<double> s(static_cast<std::size_t>(items));
      for (auto& x : s) x = static_cast<double>(rng() % 4);
      const int truth = static_cast<int>(rng() % items);
      const Eigen::RowVectorXd row = Eigen::Map<const Eigen::RowVectorXd>(s.data(), items);
      const int got = eval::rank_from_scores(row, truth), want = test::oracle_rank(s, truth);
      w.check(got, want, at + " rank");
      ranks.push_back(want);
    }
    const std::vector<int> ks{1, 3, 5, 10, 50};
    const auto m = eval::rank_metrics_from_ranks(ranks, ks);
    for (int k : ks) {
      const auto o = test::oracle_rank_metrics(ranks, k);
      const auto s = "@" + std::to_string(k);
      w.check(m.at("hit" + s), o.hit, at + " hit" + s);
      w.check(m.at("mrr" + s), o.mrr, at + " mrr" + s);
      w.check(m.at("ndcg" + s), o.ndcg, at + " ndcg" + s);
    }
    std::vector<double> nlls;
    for (const auto& r : refs)
      for (std::size_t t = 0; t <= r.size(); ++t) nlls.push_back(u(rng));
    w.check(eval::perplexity(nlls), test::oracle_perplexity(nlls), at + " ppl");
    const int labels = 1 + static_cast<int>(rng() % 8);
    std::vector<Eigen::VectorXd> dists;
    std::vector<int> truths;
    for (int i = 0; i < sentences; ++i) {
      Eigen::VectorXd d(labels);
      for (int k = 0; k < labels; ++k) d(k) = static_cast<double>(1 + rng() % 4);
      dists.push_back(d / d.sum());
      truths.push_back(static_cast<int>(rng() % labels));
    }
    const auto pm = eval::policy_metrics(dists, truths, {1, 3, 5});
    w.check(pm.at("accuracy"), test::oracle_policy_hit(dists, truths, 1), at + " accuracy");
    for (int k : {1, 3, 5}) w.check(pm.at("hit@" + std::to_string(k)), test::oracle_policy_hit(dists, truths, k), at + " policy hit");
  }
  if (!w.ok()) return fail(w.first_bad);

  const auto words = [](const std::string& s) { return corpus::split_whitespace(s); };
  Worst anchors{1e-6};
  anchors.check(eval::rank_metrics_from_ranks({4}, {10}).at("ndcg@10"), 0.430677, "ndcg@10 at rank 4");
  anchors.check(eval::bleu_n({words("the cat sat")}, {words("the cat sat down")}, 1), 0.716531, "bleu-1 brevity case");
  anchors.check(eval::distinct_n({words("a b a b")}, 1), 0.5, "distinct-1 of a b a b");
  anchors.check(eval::perplexity(std::vector<double>(10, std::log(10.0))), 10.0, "ppl of uniform-10");
  if (!anchors.ok()) return fail(anchors.first_bad);
  return {Outcome::Pass, "200 corpora, max |diff| " + sci(w.max) + " (tol 1e-9); 4 anchors hold"};
}

// ---- gradients ----

Outcome gradient_suite() {
  const auto ctx = test::tiny_context();
  std::vector<std::string> parts, bad;
  std::size_t models_checked = 0;
  for (const auto& [name, entry] : models::model_registry()) {
    auto m = models::make_model(test::tiny(name), ctx, name == "kbrd" ? "kbrd" : "m");
    if (!m->trainable()) continue;
    ++models_checked;
    for (auto task : entry.tasks) {
      batching::TaskBatch b;
      if (task == batching::Task::Rec) b = test::batch_of(test::rec_instances(2, 7));
      if (task == batching::Task::Conv) b = test::batch_of(test::conv_instances(2, 8));
      if (task == batching::Task::Policy) b = test::batch_of(test::policy_instances(3, 10));
      const auto rep = test::gradcheck(m->params(), [&](nn::Tape& t) { return m->loss(t, b); }, 1e-5, 1e-4);
      std::ostringstream os;
      os << name << "/" << batching::to_string(task) << " " << rep.passed << "/" << rep.checked;
      parts.push_back(os.str());
      if (rep.checked == 0 || rep.pass_fraction() < 0.99) bad.push_back(os.str() + ": " + rep.summary());
    }
  }
  if (!bad.empty()) return fail(util::join(bad, "; "));
  return {Outcome::Pass, std::to_string(models_checked) + " trainable models, >= 99% within 1e-4: " + util::join(parts, ", ")};
}

// ---- R-GCN ----

Outcome rgcn_equivalence() {
  std::mt19937_64 rng(50);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = test::random_graph(rng);
    for (auto act : {nn::Activation::Identity, nn::Activation::Relu}) {
      const nn::Matrix got = test::run_rgcn(g, g.edges, g.h, act);
      const nn::Matrix want = test::rgcn_oracle(g.h, g.w_rel, g.w_self, g.n, g.edges, act == nn::Activation::Relu);
      worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    }
    std::vector<int> perm(static_cast<std::size_t>(g.n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    nn::Matrix hp(g.n, g.d);
    for (int i = 0; i < g.n; ++i) hp.row(perm[static_cast<std::size_t>(i)]) = g.h.row(i);
    std::vector<nn::Edge> ep;
    for (const auto& e : g.edges)
      ep.push_back({perm[static_cast<std::size_t>(e.head)], e.relation, perm[static_cast<std::size_t>(e.tail)]});
    std::shuffle(ep.begin(), ep.end(), rng);
    const nn::Matrix base = test::run_rgcn(g, g.edges, g.h, nn::Activation::Relu);
    const nn::Matrix moved = test::run_rgcn(g, ep, hp, nn::Activation::Relu);
    for (int i = 0; i < g.n; ++i)
      if (!(moved.row(perm[static_cast<std::size_t>(i)]) == base.row(i)))
        return fail("relabeling changed node " + std::to_string(i) + " on graph " + std::to_string(trial));
  }
  if (worst > 1e-10) return fail("max |diff| from nested-loop oracle " + sci(worst));
  return {Outcome::Pass, "50 graphs, max |diff| " + sci(worst) + " (tol 1e-10); relabeling exact"};
}

// ---- decoding ----

Outcome decode_correctness() {
  const std::vector<std::string> names{"hred", "transformer", "kbrd"};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto& name = names[seed % names.size()];
    auto m = models::make_model(test::tiny(name, seed), test::tiny_context(), "conv");
    std::mt19937_64 rng(seed);
    models::ConvQuery q{test::random_tokens(rng, 3 + static_cast<int>(seed % 5)), {static_cast<int>(seed % 6)},
                        {static_cast<int>(seed % test::kCatalog)}};
    const auto src = m->decoder(q);
    models::DecodeOptions o;
    o.max_len = 6;
    o.min_len = static_cast<int>(seed % 3);
    const auto greedy = models::greedy_decode(*src, o);
    o.beam_size = 1;
    const auto beam = models::beam_decode(*src, o);
    if (greedy.tokens != beam.tokens || greedy.step_log_probs != beam.step_log_probs)
      return fail("beam(1) differs from greedy for " + name + " seed " + std::to_string(seed));
  }
  const auto src = test::markov_fixture();
  models::DecodeOptions o;
  o.strategy = models::Strategy::Beam;
  o.beam_size = 2;
  o.max_len = 3;
  double best_score = 0;
  const auto best = test::exhaustive_best(src, o, {1, 3, 4, 5, 6}, &best_score);
  const auto out = models::beam_decode(src, o);
  if (out.tokens != best || std::abs(out.score() - best_score) > 1e-12) return fail("beam(2) misses the exhaustive optimum");
  return {Outcome::Pass, "beam(1) == greedy on 100 models; beam(2) == exhaustive optimum, score " + std::to_string(best_score)};
}

// ---- CLI round trips ----

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli_run(std::vector<std::string> args, const std::function<void(int)>& ready = {}) {
  args.insert(args.begin(), "crskit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, ready);
  return {code, out.str(), err.str()};
}

struct Workspace {
  test::TempDir tmp;
  fs::path raw = tmp.path() / "raw", data = tmp.path() / "data", runs = tmp.path() / "runs",
           sessions = tmp.path() / "sessions";
  fs::path artifact;
  std::vector<std::string> with(std::vector<std::string> args) const {
    for (const auto& s : {"dataset.dir=" + data.string(), "run.output_dir=" + runs.string(),
                          "serve.sessions_dir=" + sessions.string()}) {
      args.push_back("--set");
      args.push_back(s);
    }
    return args;
  }
};

std::string toy_config() { return std::string(CRSKIT_SOURCE_DIR) + "/configs/toy.yaml"; }

fs::path newest_run(const fs::path& runs, const std::set<fs::path>& seen) {
  for (const auto& e : fs::directory_iterator(runs))
    if (!seen.count(e.path())) return e.path();
  throw std::runtime_error("no new run directory under " + runs.string());
}

Outcome end_to_end(Workspace& w) {
  auto r = cli_run({"toy", w.raw.string()});
  if (r.code) return fail("toy: " + r.err);
  r = cli_run({"convert", "--raw", w.raw.string(), "--out", w.data.string()});
  if (r.code) return fail("convert: " + r.err);
  r = cli_run(w.with({"train", "--config", toy_config(), "--set", "train.epochs=2"}));
  if (r.code) return fail("train: " + r.err);
  const fs::path first = newest_run(w.runs, {});
  w.artifact = first / "artifact";
  r = cli_run(w.with({"eval", "--config", toy_config(), "--artifact", w.artifact.string()}));
  if (r.code) return fail("eval: " + r.err);
  const fs::path eval_run = newest_run(w.runs, {first});
  std::size_t metrics = 0;
  for (const auto& f : {first / "metrics.jsonl", eval_run / "metrics.jsonl"})
    for (const auto& line : util::split(util::read_file(f), '\n')) {
      if (line.empty()) continue;
      const json report = json::parse(line);
      for (const auto& [k, v] : report["metrics"].items()) {
        ++metrics;
        if (!std::isfinite(v.get<double>())) return fail(f.string() + ": " + k + " is not finite");
      }
    }
  if (metrics == 0) return fail("no metrics written");
  const auto history_lines = util::split(util::read_file(first / "history.jsonl"), '\n');
  if (std::count_if(history_lines.begin(), history_lines.end(), [](const auto& l) { return !l.empty(); }) != 2)
    return fail("expected two history entries");
  r = cli_run({"train", "--config", (first / "config.resolved.yaml").string()});
  if (r.code) return fail("snapshot rerun: " + r.err);
  const fs::path second = newest_run(w.runs, {first, eval_run});
  for (const char* f : {"history.jsonl", "artifact/artifact.params.bin"})
    if (util::read_file(first / f) != util::read_file(second / f)) return fail(std::string(f) + " differs on snapshot rerun");
  return {Outcome::Pass, "convert, train 2 epochs, eval: " + std::to_string(metrics) +
                             " finite metrics; snapshot rerun has identical history and parameters"};
}

// ---- training control ----

Outcome training_control() {
  train::TrainState sim;
  const std::vector<double> seq{3, 2, 2, 2, 1};
  int stopped = 0;
  for (double v : seq) {
    ++sim.epoch;
    if (train::early_stop_update(sim, v, train::Mode::Min, 2) == train::StopDecision::Stop) {
      stopped = sim.epoch;
      break;
    }
  }
  if (stopped != 4 || sim.best_epoch != 2) return fail("simulation stopped at epoch " + std::to_string(stopped));

  auto c = test::small_config("gru4rec", "none", "none");
  c.set("train.epochs", 10);
  c.set("train.patience", 2);
  c.set("train.monitor", "rec.loss");
  train::System loop(c, test::toy_bundle());
  std::map<int, std::map<std::string, nn::Matrix>> at_epoch;
  const auto st = loop.fit([&](train::System& s, int epoch) {
    at_epoch[epoch] = s.parameters();
    return eval::MetricMap{{"rec.loss", epoch <= 4 ? seq[static_cast<std::size_t>(epoch - 1)] : 1.0}};
  });
  if (st.epoch != 4 || st.best_epoch != 2) return fail("training loop stopped at epoch " + std::to_string(st.epoch));
  if (loop.parameters() != at_epoch[2]) return fail("best epoch parameters were not restored");

  if (train::lr_schedule(3, 0.1, 4, 0.9) != 0.1) return fail("warmup endpoint differs from base");
  if (std::abs(train::lr_schedule(1, 0.1, 4, 0.9) - 0.05) > 1e-15) return fail("warmup 4, base 0.1, step 1 is not 0.05");

  test::TempDir tmp;
  auto kc = test::small_config("kbrd", "kbrd", "mgcg");
  kc.set("train.epochs", 1);
  train::System trained(kc, test::toy_bundle());
  trained.fit();
  const auto reports = trained.evaluate(corpus::Split::Valid, false);
  train::save_artifact(trained.artifact(reports), tmp.path() / "a");
  const auto restored = train::System::from_artifact(train::load_artifact(tmp.path() / "a"), test::toy_bundle());
  const auto pa = trained.parameters(), pb = restored->parameters();
  if (pa.size() != pb.size()) return fail("parameter count changed on reload");
  std::size_t values = 0;
  for (const auto& [name, m] : pa) {
    const auto& n = pb.at(name);
    if (m.rows() != n.rows() || m.cols() != n.cols() ||
        std::memcmp(m.data(), n.data(), sizeof(double) * static_cast<std::size_t>(m.size())) != 0)
      return fail(name + " differs after reload");
    values += static_cast<std::size_t>(m.size());
  }
  if (restored->evaluate(corpus::Split::Valid, false) != reports) return fail("reloaded system evaluates differently");
  return {Outcome::Pass, "[3,2,2,2] stops at epoch 4 with epoch 2 restored; lr anchors hold; " + std::to_string(values) +
                             " parameter values round-trip bit-exact"};
}

// ---- interaction replay ----

json strip_times(json j) {
  if (j.is_object()) {
    j.erase("created_at");
    for (auto& [k, v] : j.items()) v = strip_times(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_times(v);
  }
  return j;
}

// `serve` on the artifact until `body` returns.
template <typename Fn>
auto with_server(const Workspace& w, Fn&& body) {
  std::promise<int> port;
  auto served = std::async(std::launch::async, [&] {
    return cli_run(w.with({"serve", "--config", toy_config(), "--artifact", w.artifact.string(), "--port", "0"}),
                   [&](int p) { port.set_value(p); });
  });
  auto fut = port.get_future();
  if (fut.wait_for(std::chrono::seconds(60)) != std::future_status::ready) {
    cli::stop_serving();
    throw std::runtime_error("server did not come up: " + served.get().err);
  }
  httplib::Client client("127.0.0.1", fut.get());
  client.set_read_timeout(60, 0);
  auto result = [&] {
    try {
      return body(client);
    } catch (...) {
      cli::stop_serving();
      served.get();
      throw;
    }
  }();
  cli::stop_serving();
  const auto r = served.get();
  if (r.code) throw std::runtime_error("serve exited with " + std::to_string(r.code) + ": " + r.err);
  return result;
}

json call(httplib::Client& c, const std::string& method, const std::string& path, const json& body, int want) {
  auto r = method == "GET" ? c.Get(path) : c.Post(path, body.dump(), "application/json");
  if (!r) throw std::runtime_error(method + " " + path + ": no response");
  if (r->status != want)
    throw std::runtime_error(method + " " + path + ": status " + std::to_string(r->status) + " " + r->body);
  return json::parse(r->body);
}

Outcome interaction_replay(const Workspace& w) {
  if (w.artifact.empty()) return fail("no artifact from the end-to-end run");
  const json profile = {{"history", {1}}, {"text", "i like comedy movies"}};
  const std::vector<std::string> script{"hello !", "i like comedy movies , something funny .", "yes i love it"};
  std::vector<std::string> problems;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  struct Replay {
    std::string id;
    json state;
  };
  const auto run = [&](httplib::Client& c) {
    const std::string id = call(c, "POST", "/api/sessions", {{"profile", profile}}, 201)["session"]["session_id"];
    json turns = json::array();
    for (const auto& m : script) turns.push_back(call(c, "POST", "/api/sessions/" + id + "/messages", {{"text", m}}, 200)["turn"]);
    json recs = json::array();
    for (const auto& r : turns[2]["recommendations"]) recs.push_back(r["item"]);
    std::reverse(recs.begin(), recs.end());
    const json rev = call(c, "POST", "/api/sessions/" + id + "/override",
                          {{"turn_id", 3}, {"field", "recommendations"}, {"value", recs}}, 200)["turn"];
    expect(rev["turn_id"] == 3, "revised turn keeps its id");
    expect(rev["user_text"] == turns[2]["user_text"], "override keeps the user text");
    expect(rev["policy_output"] == turns[2]["policy_output"], "override keeps the upstream policy output");
    expect(rev["recommendations"][0]["item"] == recs[0], "override sets the recommendation list");
    expect(rev["overrides_applied"]["recommendations"] == recs, "override is recorded");
    const json state = call(c, "GET", "/api/sessions/" + id, json(), 200)["session"];
    expect(state["turns"][0] == turns[0] && state["turns"][1] == turns[1], "earlier turns untouched by the override");
    expect(state["turns"][2] == rev, "state holds the revised turn");
    return Replay{id, state};
  };
  const auto [a, b] = with_server(w, [&](httplib::Client& c) { return std::make_pair(run(c), run(c)); });
  expect(strip_times(a.state["turns"]) == strip_times(b.state["turns"]), "the scripted session replays to identical turns");
  const json after_restart =
      with_server(w, [&](httplib::Client& c) { return call(c, "GET", "/api/sessions/" + a.id, json(), 200)["session"]; });
  expect(after_restart == a.state, "a restarted service restores the session");
  if (!problems.empty()) return fail(util::join(problems, "; "));
  return {Outcome::Pass, "3 messages + 1 override over HTTP replay identically; override is local; journal restores it"};
}

// ---- ReDial counts ----

Outcome redial_counts() {
  const char* raw = std::getenv("CRSKIT_REDIAL_RAW");
  if (!raw || !*raw) return {Outcome::Skip, "set CRSKIT_REDIAL_RAW to the raw ReDial release directory"};
  test::TempDir tmp;
  const auto r = corpus::ingest_raw(raw, "redial", tmp.path() / "u");
  const long dialogs = r.train_dialogs + r.valid_dialogs + r.test_dialogs;
  const double rel = std::abs(static_cast<double>(r.utterances) - 182150.0) / 182150.0;
  std::ostringstream os;
  os << dialogs << " dialogs (want 10006), " << r.utterances << " utterances (want 182150 +-1%, off " << std::setprecision(3)
     << 100 * rel << "%)";
  if (dialogs != 10006 || rel > 0.01) return fail(os.str());
  return {Outcome::Pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const bool verbose = argc > 1 && std::string(argv[1]) == "--verbose";
  if (!verbose) util::logger()->sinks().clear();
  Workspace w;
  struct Criterion {
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"metric-oracles", 30, metric_oracles},
      {"gradient-suite", 120, gradient_suite},
      {"rgcn-equivalence", 0, rgcn_equivalence},
      {"decode-correctness", 0, decode_correctness},
      {"end-to-end", 180, [&] { return end_to_end(w); }},
      {"training-control", 0, training_control},
      {"interaction-replay", 0, [&] { return interaction_replay(w); }},
      {"redial-counts", 0, redial_counts},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.kind == Outcome::Pass && c.limit_s > 0 && secs >= c.limit_s) o = fail("took longer than the limit");
    const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Skip ? "SKIP" : "FAIL";
    std::ostringstream time;
    time << std::fixed << std::setprecision(2) << secs << " s";
    if (c.limit_s > 0) time << ", limit " << static_cast<int>(c.limit_s) << " s";
    std::cout << tag << "  " << std::left << std::setw(20) << c.name << o.detail << " (" << time.str() << ")" << std::endl;
    failed += o.kind == Outcome::Fail;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
