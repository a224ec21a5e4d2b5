#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "crskit/error.hpp"

namespace crskit::corpus {

struct Triple {
  int head = 0;
  int relation = 0;
  int tail = 0;
  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Typed triple store; node and relation ids are dense from 0.
class KnowledgeGraph {
 public:
  int add_node(const std::string& name) {
    auto [it, inserted] = node_ids_.emplace(name, node_count());
    if (inserted) nodes_.push_back(name);
    return it->second;
  }

  int add_relation(const std::string& name) {
    auto [it, inserted] = relation_ids_.emplace(name, relation_count());
    if (inserted) relations_.push_back(name);
    return it->second;
  }

  void add_triple(int head, int relation, int tail) {
    if (head < 0 || head >= node_count() || tail < 0 || tail >= node_count())
      throw CorpusError("triple endpoint is not a known node");
    if (relation < 0 || relation >= relation_count()) throw CorpusError("triple relation is not known");
    triples_.push_back({head, relation, tail});
  }

  void add_triple(const std::string& head, const std::string& relation, const std::string& tail) {
    const int h = add_node(head);
    const int t = add_node(tail);
    add_triple(h, add_relation(relation), t);
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int relation_count() const { return static_cast<int>(relations_.size()); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<Triple>& triples() const { return triples_; }
  bool empty() const { return nodes_.empty(); }

  const std::string& node_name(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::string& relation_name(int id) const { return relations_.at(static_cast<std::size_t>(id)); }

  std::optional<int> find_node(const std::string& name) const {
    auto it = node_ids_.find(name);
    if (it == node_ids_.end()) return std::nullopt;
    return it->second;
  }

  bool has_node(int id) const { return id >= 0 && id < node_count(); }

 private:
  std::vector<std::string> nodes_;
  std::map<std::string, int> node_ids_;
  std::vector<std::string> relations_;
  std::map<std::string, int> relation_ids_;
  std::vector<Triple> triples_;
};

}  // namespace crskit::corpus
