#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "crskit/error.hpp"

namespace crskit::corpus {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kStartId = 2;
inline constexpr int kEndId = 3;
inline constexpr int kNumSpecials = 4;

inline constexpr const char* kPadToken = "__pad__";
inline constexpr const char* kUnkToken = "__unk__";
inline constexpr const char* kStartToken = "__start__";
inline constexpr const char* kEndToken = "__end__";
// Stands in for an item mention in dialog text; filled with an item name when
// a generated response is rendered.
inline constexpr const char* kItemToken = "__item__";

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* s : {kPadToken, kUnkToken, kStartToken, kEndToken}) push(s);
  }

  // Specials are prepended; `tokens` must not contain them.
  explicit Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
    for (const auto& t : tokens) {
      if (to_id_.count(t)) throw CorpusError("duplicate vocabulary token: " + t);
      push(t);
    }
  }

  int size() const { return static_cast<int>(to_token_.size()); }
  bool contains(const std::string& token) const { return to_id_.count(token) > 0; }

  int id(const std::string& token) const {
    auto it = to_id_.find(token);
    return it == to_id_.end() ? kUnkId : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw CorpusError("token id out of range: " + std::to_string(id));
    return to_token_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const { return to_token_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.to_token_ == b.to_token_; }

 private:
  void push(const std::string& t) {
    to_id_.emplace(t, size());
    to_token_.push_back(t);
  }

  std::unordered_map<std::string, int> to_id_;
  std::vector<std::string> to_token_;
};

// Frequency-ranked vocabulary: count >= min_freq, most frequent first, ties
// lexicographic, at most max_size entries including the four specials.
inline Vocabulary vocab_from_counts(const std::map<std::string, long>& counts, int min_freq, int max_size) {
  if (min_freq < 1) throw CorpusError("min_freq must be >= 1");
  if (max_size < kNumSpecials) throw CorpusError("max_size must be >= 4");
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    if (tok == kPadToken || tok == kUnkToken || tok == kStartToken || tok == kEndToken) continue;
    kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const auto cap = static_cast<std::size_t>(max_size - kNumSpecials);
  if (kept.size() > cap) kept.resize(cap);
  std::vector<std::string> toks;
  toks.reserve(kept.size());
  for (auto& [t, n] : kept) toks.push_back(std::move(t));
  return Vocabulary(toks);
}

}  // namespace crskit::corpus
