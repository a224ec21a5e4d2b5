#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "crskit/corpus/vocabulary.hpp"
#include "crskit/error.hpp"

namespace crskit::models {

// Next-token distribution of a conditioned generator.
class DecodeSource {
 public:
  virtual ~DecodeSource() = default;
  // Log-probabilities over the vocabulary given the emitted prefix (no start id).
  virtual Eigen::VectorXd log_probs(const std::vector<int>& prefix) const = 0;
};

enum class Strategy { Greedy, Beam };

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "greedy") return Strategy::Greedy;
  if (s == "beam") return Strategy::Beam;
  throw ModelError("unknown decode strategy: " + s);
}

struct DecodeOptions {
  Strategy strategy = Strategy::Greedy;
  int beam_size = 1;
  int max_len = 30;
  int min_len = 0;  // end is masked until this many tokens are emitted
  int end_id = corpus::kEndId;
  std::vector<int> banned = {corpus::kPadId, corpus::kStartId};
};

struct GenOutput {
  std::vector<int> tokens;            // no start id, end id not included
  std::vector<double> step_log_probs; // one per step, including the end step when finished
  bool finished = false;              // false when cut at max_len

  double total() const { return std::accumulate(step_log_probs.begin(), step_log_probs.end(), 0.0); }
  // Length-normalized score: mean log-probability per emitted step.
  double score() const {
    return step_log_probs.empty() ? 0.0 : total() / static_cast<double>(step_log_probs.size());
  }
};

namespace detail {

inline Eigen::VectorXd masked_log_probs(const DecodeSource& src, const std::vector<int>& prefix, const DecodeOptions& o) {
  Eigen::VectorXd lp = src.log_probs(prefix);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (int b : o.banned)
    if (b >= 0 && b < lp.size()) lp(b) = ninf;
  if (static_cast<int>(prefix.size()) < o.min_len && o.end_id < lp.size()) lp(o.end_id) = ninf;
  return lp;
}

}  // namespace detail

inline GenOutput greedy_decode(const DecodeSource& src, const DecodeOptions& o) {
  if (o.max_len < 1) throw ModelError("max_len must be >= 1");
  GenOutput out;
  double run = 0.0;
  for (int step = 0; step < o.max_len; ++step) {
    const Eigen::VectorXd lp = detail::masked_log_probs(src, out.tokens, o);
    int best = -1;
    for (int v = 0; v < lp.size(); ++v)
      if (std::isfinite(lp(v)) && (best < 0 || run + lp(v) > run + lp(best))) best = v;
    if (best < 0) break;
    run += lp(best);
    out.step_log_probs.push_back(lp(best));
    if (best == o.end_id) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(best);
  }
  return out;
}

// Keeps the k best prefixes by summed log-probability (ties: lexicographically
// smaller sequence first); returns the finished hypothesis with the best
// length-normalized score.
inline GenOutput beam_decode(const DecodeSource& src, const DecodeOptions& o) {
  if (o.max_len < 1) throw ModelError("max_len must be >= 1");
  if (o.beam_size < 1) throw ModelError("beam_size must be >= 1");
  struct Cand {
    std::size_t parent;
    int token;
    double lp;
    double sum;
  };
  std::vector<GenOutput> alive(1), done;
  std::vector<double> sums(1, 0.0);
  for (int step = 0; step < o.max_len && !alive.empty(); ++step) {
    std::vector<Cand> cands;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const Eigen::VectorXd lp = detail::masked_log_probs(src, alive[h].tokens, o);
      for (int v = 0; v < lp.size(); ++v)
        if (std::isfinite(lp(v))) cands.push_back({h, v, lp(v), sums[h] + lp(v)});
    }
    const auto seq_less = [&](const Cand& a, const Cand& b) {
      const auto& ta = alive[a.parent].tokens;
      const auto& tb = alive[b.parent].tokens;
      if (a.parent != b.parent) return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
      return a.token < b.token;
    };
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.sum != b.sum) return a.sum > b.sum;
      return seq_less(a, b);
    });
    if (cands.size() > static_cast<std::size_t>(o.beam_size)) cands.resize(static_cast<std::size_t>(o.beam_size));
    std::vector<GenOutput> next;
    std::vector<double> next_sums;
    for (const auto& c : cands) {
      GenOutput g = alive[c.parent];
      g.step_log_probs.push_back(c.lp);
      if (c.token == o.end_id) {
        g.finished = true;
        done.push_back(std::move(g));
      } else {
        g.tokens.push_back(c.token);
        next.push_back(std::move(g));
        next_sums.push_back(c.sum);
      }
    }
    alive = std::move(next);
    sums = std::move(next_sums);
  }
  for (auto& g : alive) done.push_back(std::move(g));
  if (done.empty()) return {};
  return *std::min_element(done.begin(), done.end(), [](const GenOutput& a, const GenOutput& b) {
    if (a.score() != b.score()) return a.score() > b.score();
    return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(), b.tokens.end());
  });
}

inline GenOutput decode(const DecodeSource& src, const DecodeOptions& o) {
  return o.strategy == Strategy::Greedy ? greedy_decode(src, o) : beam_decode(src, o);
}

}  // namespace crskit::models
