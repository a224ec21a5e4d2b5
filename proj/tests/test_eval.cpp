#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "crskit/eval/report.hpp"
#include "crskit/corpus/text.hpp"
#include "support/metric_oracles.hpp"
#include "support/temp_dir.hpp"

using namespace crskit;
using namespace crskit::eval;
using namespace crskit::test;

namespace {

Tokens words(const std::string& s) { return corpus::split_whitespace(s); }

}  // namespace

// ---- ranking ----

TEST(RankMetrics, WorkedExamples) {
  const std::vector<int> ranking{7, 2, 9, 4, 1, 0};
  auto m = rank_metrics({ranking}, {7}, {10});
  EXPECT_EQ(m.at("hit@10"), 1.0);
  EXPECT_EQ(m.at("mrr@10"), 1.0);
  EXPECT_EQ(m.at("ndcg@10"), 1.0);
  m = rank_metrics({ranking}, {4}, {1, 10});
  EXPECT_EQ(m.at("hit@10"), 1.0);
  EXPECT_DOUBLE_EQ(m.at("mrr@10"), 0.25);
  EXPECT_NEAR(m.at("ndcg@10"), 0.430677, 1e-6);
  EXPECT_DOUBLE_EQ(m.at("ndcg@10"), 1.0 / std::log2(5.0));
  EXPECT_EQ(m.at("hit@1"), 0.0);
  EXPECT_EQ(m.at("mrr@1"), 0.0);
  EXPECT_EQ(m.at("ndcg@1"), 0.0);
  EXPECT_THROW(rank_metrics({ranking}, {5}, {10}), EvaluationError);
}

TEST(RankMetrics, ScoreRankMatchesSortedRanking) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> score(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::RowVectorXd s(12);
    for (int i = 0; i < 12; ++i) s(i) = score(rng);
    std::vector<int> order(12);
    for (int i = 0; i < 12; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s(a) > s(b); });
    for (int t = 0; t < 12; ++t) ASSERT_EQ(rank_from_scores(s, t), rank_in(order, t));
  }
}

TEST(RankMetrics, MonotoneAndDominatedOnRandomRanks) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> r(1, 80);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ranks(1 + trial % 20);
    for (auto& x : ranks) x = r(rng);
    const auto m = rank_metrics_from_ranks(ranks, {1, 10, 50});
    EXPECT_LE(m.at("hit@1"), m.at("hit@10"));
    EXPECT_LE(m.at("hit@10"), m.at("hit@50"));
    for (int k : {1, 10, 50}) {
      const auto s = "@" + std::to_string(k);
      EXPECT_LE(m.at("ndcg" + s), m.at("hit" + s));
      EXPECT_LE(m.at("mrr" + s), m.at("hit" + s));
      EXPECT_GE(m.at("mrr" + s), 0.0);
    }
    // oracle: direct per-instance formulas
    for (int k : {1, 10, 50}) {
      double hit = 0, mrr = 0, ndcg = 0;
      for (int x : ranks) {
        hit += x <= k ? 1.0 : 0.0;
        mrr += x <= k ? 1.0 / x : 0.0;
        ndcg += x <= k ? 1.0 / (std::log(x + 1.0) / std::log(2.0)) : 0.0;
      }
      const auto s = "@" + std::to_string(k);
      EXPECT_NEAR(m.at("hit" + s), hit / ranks.size(), 1e-9);
      EXPECT_NEAR(m.at("mrr" + s), mrr / ranks.size(), 1e-9);
      EXPECT_NEAR(m.at("ndcg" + s), ndcg / ranks.size(), 1e-9);
    }
    auto shuffled = ranks;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto m2 = rank_metrics_from_ranks(shuffled, {1, 10, 50});
    for (const auto& [k, v] : m) EXPECT_NEAR(m2.at(k), v, 1e-12);
  }
}

// ---- BLEU ----

TEST(Bleu, WorkedExamples) {
  const auto s = words("the cat sat on the mat");
  for (int n = 1; n <= 4; ++n) EXPECT_DOUBLE_EQ(bleu_n({s}, {s}, n), 1.0);
  EXPECT_NEAR(bleu_n({words("the cat sat")}, {words("the cat sat down")}, 1), 0.716531, 1e-6);
  EXPECT_DOUBLE_EQ(bleu_n({words("the cat sat")}, {words("the cat sat down")}, 1), std::exp(1.0 - 4.0 / 3.0));
  EXPECT_EQ(bleu_n({words("a b c")}, {words("c b a")}, 2), 0.0);
  EXPECT_EQ(bleu_n({{}}, {words("a b")}, 1), 0.0);
  EXPECT_THROW(bleu_n({}, {}, 1), EvaluationError);
  EXPECT_THROW(bleu_n({s}, {s}, 5), EvaluationError);
}

TEST(Bleu, ClippedCountsAndBrevity) {
  // "the the the" vs "the cat": clipped unigram precision 1/3, hyp longer so BP 1
  EXPECT_DOUBLE_EQ(sentence_bleu(words("the the the"), words("the cat"), 1), 1.0 / 3.0);
}

// ---- Distinct ----

TEST(Distinct, WorkedExamples) {
  EXPECT_DOUBLE_EQ(distinct_n({words("a b a b")}, 1), 0.5);
  EXPECT_DOUBLE_EQ(distinct_n({words("x y"), words("z")}, 1), 1.0);
  EXPECT_DOUBLE_EQ(distinct_n({words("the cat"), words("the dog")}, 1), 0.75);
  EXPECT_DOUBLE_EQ(distinct_n({words("a b a b"), words("a")}, 2), 2.0 / 3.0);
  EXPECT_THROW(distinct_n({words("a")}, 2), EvaluationError);
}

// ---- Perplexity ----

TEST(Perplexity, WorkedExamples) {
  EXPECT_NEAR(perplexity(std::vector<double>(7, std::log(10.0))), 10.0, 1e-12);
  EXPECT_EQ(perplexity({0.0, 0.0}), 1.0);
  EXPECT_NEAR(perplexity({std::log(2.0), std::log(8.0)}), 4.0, 1e-12);
  EXPECT_THROW(perplexity({}), EvaluationError);
}

// ---- Embedding ----

TEST(Embedding, IdentityAndOrthogonality) {
  corpus::WordVectors wv{{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}, {"c", {0.6, -0.8}}};
  auto e = embedding_metrics({words("a c b")}, {words("a c b")}, wv);
  EXPECT_NEAR(e.average, 1.0, 1e-12);
  EXPECT_NEAR(e.extreme, 1.0, 1e-12);
  EXPECT_NEAR(e.greedy, 1.0, 1e-12);
  e = embedding_metrics({words("a")}, {words("b")}, wv);
  EXPECT_NEAR(e.average, 0.0, 1e-12);
  EXPECT_NEAR(e.greedy, 0.0, 1e-12);
}

TEST(Embedding, HandBuiltTwoTokenSentences) {
  corpus::WordVectors wv{{"a", {1.0, 2.0}}, {"b", {-3.0, 0.5}}, {"c", {0.5, -1.0}}, {"d", {2.0, 2.0}}};
  const std::vector<Tokens> h{words("a b")}, r{words("c d")};
  const auto e = embedding_metrics(h, r, wv);
  const auto o = oracle_embedding(h, r, wv);
  EXPECT_NEAR(e.average, o.average, 1e-10);
  EXPECT_NEAR(e.extreme, o.extreme, 1e-10);
  EXPECT_NEAR(e.greedy, o.greedy, 1e-10);
  // extrema: hyp (-3, 2), ref (2, 2)
  EXPECT_NEAR(e.extreme, (-6.0 + 4.0) / (std::sqrt(13.0) * std::sqrt(8.0)), 1e-12);
}

TEST(Embedding, SkipsOutOfVectorTokensAndEmptyPairs) {
  corpus::WordVectors wv{{"a", {1.0, 0.0}}};
  const auto e = embedding_metrics({words("a zzz"), words("qqq")}, {words("a"), words("a")}, wv);
  EXPECT_EQ(e.scored, 1);
  EXPECT_EQ(e.skipped, 1);
  EXPECT_NEAR(e.average, 1.0, 1e-12);
  EXPECT_THROW(embedding_metrics({words("qqq")}, {words("a")}, wv), EvaluationError);
}

// ---- Policy ----

TEST(PolicyMetrics, WorkedExamples) {
  Eigen::VectorXd d(5);
  d << 0.1, 0.5, 0.2, 0.15, 0.05;
  auto m = policy_metrics({d}, {1}, {1, 3, 5});
  EXPECT_EQ(m.at("accuracy"), 1.0);
  EXPECT_EQ(m.at("hit@5"), 1.0);
  m = policy_metrics({d}, {2}, {1, 3, 5});
  EXPECT_EQ(m.at("accuracy"), 0.0);
  EXPECT_EQ(m.at("hit@1"), 0.0);
  EXPECT_EQ(m.at("hit@3"), 1.0);
  EXPECT_EQ(m.at("hit@5"), 1.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(5, 0.2);
  m = policy_metrics({u}, {0}, {1, 3, 5});
  EXPECT_EQ(m.at("hit@1"), 1.0);
  EXPECT_EQ(policy_metrics({u}, {4}, {1, 3, 5}).at("hit@3"), 0.0);
  EXPECT_THROW(policy_metrics({u}, {5}, {1}), EvaluationError);
}

TEST(PolicyMetrics, HitAtOneEqualsAccuracyAndIsMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::uniform_int_distribution<int> t(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Eigen::VectorXd> ds;
    std::vector<int> ts;
    for (int i = 0; i < 1 + trial % 10; ++i) {
      Eigen::VectorXd d(6);
      for (int k = 0; k < 6; ++k) d(k) = std::round(p(rng) * 4) / 4;  // frequent ties
      d /= std::max(d.sum(), 1e-9);
      ds.push_back(d);
      ts.push_back(t(rng));
    }
    const auto m = policy_metrics(ds, ts, {1, 3, 5});
    EXPECT_EQ(m.at("hit@1"), m.at("accuracy"));
    EXPECT_LE(m.at("hit@1"), m.at("hit@3"));
    EXPECT_LE(m.at("hit@3"), m.at("hit@5"));
    // oracle: argmax with ascending-id ties, and explicit top-k
    double acc = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      int arg = 0;
      for (int k = 1; k < 6; ++k)
        if (ds[i](k) > ds[i](arg)) arg = k;
      acc += arg == ts[i];
    }
    EXPECT_NEAR(m.at("accuracy"), acc / ds.size(), 1e-12);
  }
}

// ---- random-corpus oracle equivalence ----

TEST(OracleEquivalence, TwoHundredRandomCorpora) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int vocab = 2 + trial % 9;
    const int sentences = 1 + trial % 20;
    const auto hyps = random_corpus(rng, sentences, vocab);
    const auto refs = random_corpus(rng, sentences, vocab);
    for (int n = 1; n <= 4; ++n) {
      double oracle = 0.0;
      for (int i = 0; i < sentences; ++i) oracle += oracle_sentence_bleu(hyps[i], refs[i], n);
      ASSERT_NEAR(bleu_n(hyps, refs, n), oracle / sentences, 1e-9) << "trial " << trial << " n " << n;
      long total = 0;
      for (const auto& h : hyps) total += std::max<long>(0, static_cast<long>(h.size()) - n + 1);
      if (total > 0) {
        const double d = distinct_n(hyps, n);
        ASSERT_NEAR(d, oracle_distinct(hyps, n), 1e-9);
        ASSERT_GE(d, 0.0);
        ASSERT_LE(d, 1.0);
      }
    }
    corpus::WordVectors wv;
    for (int w = 0; w < vocab; ++w)
      if (w % 4 != 3) wv["w" + std::to_string(w)] = {g(rng), g(rng), g(rng)};
    bool any = false;
    for (int i = 0; i < sentences && !any; ++i) {
      bool h = false, r = false;
      for (const auto& t : hyps[i]) h |= wv.count(t) > 0;
      for (const auto& t : refs[i]) r |= wv.count(t) > 0;
      any = h && r;
    }
    if (!any) continue;
    const auto e = embedding_metrics(hyps, refs, wv);
    const auto o = oracle_embedding(hyps, refs, wv);
    ASSERT_NEAR(e.average, o.average, 1e-9);
    ASSERT_NEAR(e.extreme, o.extreme, 1e-9);
    ASSERT_NEAR(e.greedy, o.greedy, 1e-9);
    for (double v : {e.average, e.extreme, e.greedy}) {
      ASSERT_GE(v, -1.0 - 1e-12);
      ASSERT_LE(v, 1.0 + 1e-12);
    }
    // permutation invariance of the corpus mean
    std::vector<std::size_t> perm(static_cast<std::size_t>(sentences));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tokens> ph, pr;
    for (auto i : perm) {
      ph.push_back(hyps[i]);
      pr.push_back(refs[i]);
    }
    ASSERT_NEAR(bleu_n(ph, pr, 2), bleu_n(hyps, refs, 2), 1e-12);
    ASSERT_NEAR(embedding_metrics(ph, pr, wv).greedy, e.greedy, 1e-12);
  }
}

// ---- report ----

TEST(Report, FormatIsStableAndAlphabetical) {
  MetricReport r{"rec", "test", 4, {{"ndcg@1", 0.25}, {"hit@1", 0.5}, {"mrr@1", 1.0 / 3.0}}};
  const auto text = format_report(r);
  EXPECT_NE(text.find("hit@1  0.500000"), std::string::npos);
  EXPECT_LT(text.find("hit@1"), text.find("mrr@1"));
  EXPECT_LT(text.find("mrr@1"), text.find("ndcg@1"));
  EXPECT_NE(text.find("mrr@1  0.333333"), std::string::npos);
  EXPECT_EQ(format_report(r), text);
}

TEST(Report, JsonlRoundTrip) {
  test::TempDir dir;
  const auto path = dir.path() / "metrics.jsonl";
  MetricReport a{"rec", "test", 4, {{"hit@1", 0.1 + 0.2}, {"mrr@1", 1.0 / 3.0}}};
  MetricReport b{"conv", "valid", 9, {{"ppl", 12.5}}};
  append_report(path, a);
  append_report(path, b);
  const auto back = read_reports(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
  const auto line = report_to_json(a, "2026-01-01T00:00:00Z");
  for (const char* k : {"split", "task", "metrics", "count", "timestamp"}) EXPECT_TRUE(line.contains(k)) << k;
}
