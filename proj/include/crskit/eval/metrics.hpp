#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crskit/corpus/types.hpp"
#include "crskit/error.hpp"

namespace crskit::eval {

using Tokens = std::vector<std::string>;
using MetricMap = std::map<std::string, double>;

// ---- ranking ----

// 1-based rank of `truth` within `ranking`.
inline int rank_in(const std::vector<int>& ranking, int truth) {
  auto it = std::find(ranking.begin(), ranking.end(), truth);
  if (it == ranking.end()) throw EvaluationError("truth item " + std::to_string(truth) + " is absent from the ranking");
  return static_cast<int>(it - ranking.begin()) + 1;
}

// Rank `truth` would get under the score-descending, id-ascending order,
// without sorting.
inline int rank_from_scores(const Eigen::Ref<const Eigen::RowVectorXd>& scores, int truth) {
  if (truth < 0 || truth >= scores.size()) throw EvaluationError("truth item " + std::to_string(truth) + " is outside the catalog");
  const double s = scores(truth);
  int r = 1;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores(i) > s || (scores(i) == s && i < truth)) ++r;
  return r;
}

// Hit/MRR/NDCG at each cutoff, averaged over instances given their ranks.
inline MetricMap rank_metrics_from_ranks(const std::vector<int>& ranks, const std::vector<int>& ks) {
  if (ranks.empty()) throw EvaluationError("rank metrics over zero instances");
  MetricMap out;
  for (int k : ks) {
    double hit = 0, mrr = 0, ndcg = 0;
    for (int r : ranks) {
      if (r > k) continue;
      hit += 1.0;
      mrr += 1.0 / r;
      ndcg += 1.0 / std::log2(r + 1.0);
    }
    const double n = static_cast<double>(ranks.size());
    const std::string suffix = "@" + std::to_string(k);
    out["hit" + suffix] = hit / n;
    out["mrr" + suffix] = mrr / n;
    out["ndcg" + suffix] = ndcg / n;
  }
  return out;
}

inline MetricMap rank_metrics(const std::vector<std::vector<int>>& rankings, const std::vector<int>& truths,
                              const std::vector<int>& ks) {
  if (rankings.size() != truths.size()) throw EvaluationError("rankings and truths differ in length");
  std::vector<int> ranks;
  for (std::size_t i = 0; i < rankings.size(); ++i) ranks.push_back(rank_in(rankings[i], truths[i]));
  return rank_metrics_from_ranks(ranks, ks);
}

// ---- n-gram metrics ----

inline std::map<Tokens, int> ngram_counts(const Tokens& s, int n) {
  std::map<Tokens, int> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i)
    ++out[Tokens(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  return out;
}

// Cumulative sentence BLEU-n without smoothing.
inline double sentence_bleu(const Tokens& hyp, const Tokens& ref, int n) {
  if (n < 1 || n > 4) throw EvaluationError("BLEU order must be in 1..4");
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (int m = 1; m <= n; ++m) {
    const auto h = ngram_counts(hyp, m);
    const auto r = ngram_counts(ref, m);
    int matched = 0, total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      auto it = r.find(g);
      if (it != r.end()) matched += std::min(c, it->second);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / total);
  }
  const double h = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  const double bp = h > r ? 1.0 : std::exp(1.0 - r / h);
  return bp * std::exp(log_sum / n);
}

inline double bleu_n(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, int n) {
  if (hyps.size() != refs.size()) throw EvaluationError("hypothesis and reference lists differ in length");
  if (hyps.empty()) throw EvaluationError("BLEU over an empty corpus");
  double sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) sum += sentence_bleu(hyps[i], refs[i], n);
  return sum / static_cast<double>(hyps.size());
}

inline double distinct_n(const std::vector<Tokens>& responses, int n) {
  std::set<Tokens> seen;
  long total = 0;
  for (const auto& r : responses)
    for (const auto& [g, c] : ngram_counts(r, n)) {
      seen.insert(g);
      total += c;
    }
  if (total == 0) throw EvaluationError("distinct-" + std::to_string(n) + " over zero n-grams");
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

inline double perplexity(const std::vector<double>& token_nlls) {
  if (token_nlls.empty()) throw EvaluationError("perplexity over zero tokens");
  double sum = 0.0;
  for (double v : token_nlls) sum += v;
  return std::exp(sum / static_cast<double>(token_nlls.size()));
}

// ---- embedding metrics ----

struct EmbeddingScores {
  double average = 0.0;
  double extreme = 0.0;
  double greedy = 0.0;
  int scored = 0;
  int skipped = 0;
};

namespace detail {

using Vec = Eigen::VectorXd;

inline double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

inline std::vector<Vec> lookup(const Tokens& s, const corpus::WordVectors& wv) {
  std::vector<Vec> out;
  for (const auto& t : s) {
    auto it = wv.find(t);
    if (it != wv.end()) out.push_back(Eigen::Map<const Vec>(it->second.data(), static_cast<Eigen::Index>(it->second.size())));
  }
  return out;
}

inline Vec mean_of(const std::vector<Vec>& vs) {
  Vec m = Vec::Zero(vs.front().size());
  for (const auto& v : vs) m += v;
  return m / static_cast<double>(vs.size());
}

inline Vec extrema_of(const std::vector<Vec>& vs) {
  Vec e = Vec::Zero(vs.front().size());
  for (const auto& v : vs)
    for (Eigen::Index d = 0; d < v.size(); ++d)
      if (std::abs(v(d)) > std::abs(e(d))) e(d) = v(d);
  return e;
}

inline double greedy_match(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double sum = 0.0;
  for (const auto& w : a) {
    double best = -1.0;
    for (const auto& v : b) best = std::max(best, cosine(w, v));
    sum += best;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace detail

inline EmbeddingScores embedding_metrics(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs,
                                         const corpus::WordVectors& wv) {
  if (hyps.size() != refs.size()) throw EvaluationError("hypothesis and reference lists differ in length");
  EmbeddingScores s;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = detail::lookup(hyps[i], wv);
    const auto r = detail::lookup(refs[i], wv);
    if (h.empty() || r.empty()) {
      ++s.skipped;
      continue;
    }
    ++s.scored;
    s.average += detail::cosine(detail::mean_of(h), detail::mean_of(r));
    s.extreme += detail::cosine(detail::extrema_of(h), detail::extrema_of(r));
    s.greedy += 0.5 * (detail::greedy_match(h, r) + detail::greedy_match(r, h));
  }
  if (s.scored == 0) throw EvaluationError("embedding metrics: every sentence pair lacks in-vector tokens");
  s.average /= s.scored;
  s.extreme /= s.scored;
  s.greedy /= s.scored;
  return s;
}

// ---- policy ----

// Rank of `truth` among labels by probability, ties by ascending id.
inline MetricMap policy_metrics(const std::vector<Eigen::VectorXd>& dists, const std::vector<int>& truths,
                                const std::vector<int>& ks) {
  if (dists.size() != truths.size()) throw EvaluationError("distributions and truths differ in length");
  std::vector<int> ranks;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (truths[i] < 0 || truths[i] >= dists[i].size())
      throw EvaluationError("policy truth " + std::to_string(truths[i]) + " is outside the label set");
    ranks.push_back(rank_from_scores(dists[i].transpose(), truths[i]));
  }
  if (ranks.empty()) throw EvaluationError("policy metrics over zero instances");
  MetricMap out;
  const double n = static_cast<double>(ranks.size());
  out["accuracy"] = static_cast<double>(std::count(ranks.begin(), ranks.end(), 1)) / n;
  for (int k : ks)
    out["hit@" + std::to_string(k)] = static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [&](int r) { return r <= k; })) / n;
  return out;
}

}  // namespace crskit::eval
