#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "crskit/corpus/knowledge_graph.hpp"
#include "crskit/corpus/vocabulary.hpp"

namespace crskit::corpus {

enum class Role { Seeker, Recommender };

inline const char* to_string(Role r) { return r == Role::Seeker ? "seeker" : "recommender"; }

inline Role role_from_string(const std::string& s) {
  if (s == "seeker") return Role::Seeker;
  if (s == "recommender") return Role::Recommender;
  throw CorpusError("unknown role: " + s);
}

struct PolicyLabel {
  std::string type;
  int id = 0;
  friend bool operator==(const PolicyLabel&, const PolicyLabel&) = default;
};

struct UserProfile {
  std::vector<int> history;  // catalog item ids
  std::vector<std::string> sentences;
  std::vector<std::vector<int>> sentence_ids;  // filled by encoding, not stored on disk
  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct Utterance {
  Role role = Role::Seeker;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<int> token_ids;
  std::vector<int> item_ids;
  std::vector<int> entity_ids;
  std::vector<int> word_ids;
  std::optional<PolicyLabel> policy;
};

struct Dialog {
  std::string conv_id;
  std::optional<UserProfile> user_profile;
  std::vector<Utterance> utterances;
};

enum class Split { Train, Valid, Test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

inline std::optional<Split> split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

struct PolicyLabelInfo {
  int id = 0;
  std::string type;
  std::string name;
};

using WordVectors = std::unordered_map<std::string, std::vector<double>>;

enum class TokenizerKind { Whitespace, Char };

// The unified, model-independent corpus.
struct DatasetBundle {
  std::vector<Dialog> train, valid, test;
  Vocabulary vocab;
  KnowledgeGraph entity_kg;
  KnowledgeGraph word_kg;
  std::vector<std::string> item_catalog;  // item id -> name
  std::map<int, int> item2entity;         // item id -> entity node id
  std::vector<PolicyLabelInfo> policy_labels;
  std::map<std::string, int> surface_forms;  // lowercase surface -> entity id
  WordVectors word_vectors;
  TokenizerKind tokenizer = TokenizerKind::Whitespace;
  std::string fingerprint;  // corpus checksum used to pair artifacts with data

  const std::vector<Dialog>& split(Split s) const {
    switch (s) {
      case Split::Train: return train;
      case Split::Valid: return valid;
      default: return test;
    }
  }

  int catalog_size() const { return static_cast<int>(item_catalog.size()); }

  // entity id -> item id for entities that stand for a catalog item.
  std::map<int, int> entity2item() const {
    std::map<int, int> out;
    for (const auto& [item, entity] : item2entity) out.emplace(entity, item);
    return out;
  }

  std::optional<int> find_policy_label(const std::string& name) const {
    for (const auto& l : policy_labels)
      if (l.name == name) return l.id;
    return std::nullopt;
  }
};

}  // namespace crskit::corpus
