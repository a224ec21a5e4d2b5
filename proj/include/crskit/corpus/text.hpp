#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "crskit/corpus/types.hpp"
#include "crskit/corpus/vocabulary.hpp"

namespace crskit::corpus {

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// are passed through as single-byte code points.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  }
  if (len > 1) {
    if (i + static_cast<std::size_t>(len) > s.size()) {
      ++i;
      return b0;
    }
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) {
        ++i;
        return b0;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

inline std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace detail

namespace detail {

inline std::vector<std::string> split_code_points(std::string_view src, bool per_char) {
  std::vector<std::string> out;
  std::string current;
  std::size_t i = 0;
  while (i < src.size()) {
    const std::size_t start = i;
    const char32_t cp = detail::next_code_point(src, i);
    const std::string_view bytes(src.data() + start, i - start);
    if (detail::is_unicode_space(cp)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (per_char)
      out.emplace_back(bytes);
    else
      current.append(bytes);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace detail

// Splits on Unicode whitespace, case preserved.
inline std::vector<std::string> split_whitespace(std::string_view text) {
  return detail::split_code_points(text, false);
}

// whitespace: lowercase, then split on Unicode whitespace.
// char: one token per non-space code point.
inline std::vector<std::string> tokenize(std::string_view text, TokenizerKind kind) {
  if (kind == TokenizerKind::Char) return detail::split_code_points(text, true);
  return detail::split_code_points(detail::lowercase_ascii(text), false);
}

inline TokenizerKind tokenizer_from_string(const std::string& s) {
  if (s == "whitespace") return TokenizerKind::Whitespace;
  if (s == "char") return TokenizerKind::Char;
  throw CorpusError("unknown tokenizer: " + s);
}

// Vocabulary over the train split: utterance tokens and profile sentences.
inline Vocabulary build_vocab(const std::vector<Dialog>& train_dialogs, int min_freq, int max_size,
                              TokenizerKind kind = TokenizerKind::Whitespace) {
  std::map<std::string, long> counts;
  for (const auto& d : train_dialogs) {
    for (const auto& u : d.utterances) {
      if (!u.tokens.empty() || u.text.empty()) {
        for (const auto& t : u.tokens) ++counts[t];
      } else {
        for (const auto& t : tokenize(u.text, kind)) ++counts[t];
      }
    }
    if (d.user_profile)
      for (const auto& s : d.user_profile->sentences)
        for (const auto& t : tokenize(s, kind)) ++counts[t];
  }
  return vocab_from_counts(counts, min_freq, max_size);
}

// Greedy longest match (n <= 3) left to right; matched tokens are consumed.
inline std::vector<int> link_entities(const std::vector<std::string>& tokens,
                                      const std::map<std::string, int>& surface_map) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t n = std::min<std::size_t>(3, tokens.size() - i); n >= 1; --n) {
      std::string key = tokens[i];
      for (std::size_t k = 1; k < n; ++k) key += " " + tokens[i + k];
      auto it = surface_map.find(key);
      if (it != surface_map.end()) {
        out.push_back(it->second);
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

// Tokens that name a word-KG node, in order of appearance.
inline std::vector<int> link_words(const std::vector<std::string>& tokens, const KnowledgeGraph& word_kg) {
  std::vector<int> out;
  for (const auto& t : tokens)
    if (auto id = word_kg.find_node(t)) out.push_back(*id);
  return out;
}

// Turns free text into an encoded utterance against a loaded corpus. Items
// are recovered from linked entities that stand for catalog items.
class TextEncoder {
 public:
  explicit TextEncoder(const DatasetBundle& bundle) : bundle_(&bundle), entity2item_(bundle.entity2item()) {}

  Utterance encode(Role role, const std::string& text) const {
    Utterance u;
    u.role = role;
    u.text = text;
    u.tokens = tokenize(text, bundle_->tokenizer);
    u.token_ids = bundle_->vocab.encode(u.tokens);
    u.entity_ids = link_entities(u.tokens, bundle_->surface_forms);
    u.word_ids = link_words(u.tokens, bundle_->word_kg);
    for (int e : u.entity_ids) {
      auto it = entity2item_.find(e);
      if (it != entity2item_.end()) u.item_ids.push_back(it->second);
    }
    return u;
  }

  std::vector<int> encode_tokens(const std::string& text) const {
    return bundle_->vocab.encode(tokenize(text, bundle_->tokenizer));
  }

 private:
  const DatasetBundle* bundle_;
  std::map<int, int> entity2item_;
};

}  // namespace crskit::corpus
