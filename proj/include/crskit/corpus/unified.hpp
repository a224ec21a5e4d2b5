#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crskit/corpus/text.hpp"
#include "crskit/corpus/types.hpp"
#include "crskit/error.hpp"
#include "crskit/util/sha256.hpp"
#include "crskit/util/strings.hpp"
#include "json.hpp"

namespace crskit::corpus {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kChecksumFile = "checksums.txt";
inline constexpr const char* kEmbeddingFile = "embeddings.txt";

// Files every unified corpus directory carries.
inline const std::vector<std::string>& required_unified_files() {
  static const std::vector<std::string> files = {
      "train.jsonl", "valid.jsonl", "test.jsonl",   "items.tsv",         "entities.tsv", "words.tsv",
      "entity_kg.tsv", "word_kg.tsv", "item2entity.tsv", "surface_forms.tsv", "policy_labels.tsv"};
  return files;
}

// On-disk corpus contents: dialogs carry text and ids but no token encoding.
struct UnifiedCorpus {
  std::vector<Dialog> train, valid, test;
  std::vector<std::string> items;
  KnowledgeGraph entity_kg;
  KnowledgeGraph word_kg;
  std::map<int, int> item2entity;
  std::map<std::string, int> surface_forms;
  std::vector<PolicyLabelInfo> policy_labels;
  std::optional<std::string> embeddings_text;

  std::vector<Dialog>& split(Split s) { return s == Split::Train ? train : s == Split::Valid ? valid : test; }
  const std::vector<Dialog>& split(Split s) const {
    return s == Split::Train ? train : s == Split::Valid ? valid : test;
  }
};

namespace detail {

inline std::string clean_field(std::string s) {
  for (auto& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

inline json dialog_to_json(const Dialog& d) {
  json j;
  j["conv_id"] = d.conv_id;
  if (d.user_profile)
    j["user_profile"] = {{"history", d.user_profile->history}, {"sentences", d.user_profile->sentences}};
  else
    j["user_profile"] = nullptr;
  json msgs = json::array();
  for (const auto& u : d.utterances) {
    json m;
    m["role"] = to_string(u.role);
    m["text"] = u.text;
    m["items"] = u.item_ids;
    m["entities"] = u.entity_ids;
    m["words"] = u.word_ids;
    if (u.policy)
      m["policy"] = {{"type", u.policy->type}, {"id", u.policy->id}};
    else
      m["policy"] = nullptr;
    msgs.push_back(std::move(m));
  }
  j["messages"] = std::move(msgs);
  return j;
}

inline Dialog dialog_from_json(const json& j) {
  Dialog d;
  d.conv_id = j.at("conv_id").get<std::string>();
  if (j.contains("user_profile") && !j.at("user_profile").is_null()) {
    UserProfile p;
    const auto& jp = j.at("user_profile");
    p.history = jp.value("history", std::vector<int>{});
    p.sentences = jp.value("sentences", std::vector<std::string>{});
    d.user_profile = std::move(p);
  }
  for (const auto& m : j.at("messages")) {
    Utterance u;
    u.role = role_from_string(m.at("role").get<std::string>());
    u.text = m.at("text").get<std::string>();
    u.item_ids = m.value("items", std::vector<int>{});
    u.entity_ids = m.value("entities", std::vector<int>{});
    u.word_ids = m.value("words", std::vector<int>{});
    if (m.contains("policy") && !m.at("policy").is_null())
      u.policy = PolicyLabel{m.at("policy").at("type").get<std::string>(), m.at("policy").at("id").get<int>()};
    d.utterances.push_back(std::move(u));
  }
  return d;
}

inline std::vector<std::vector<std::string>> read_tsv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw CorpusError("missing corpus file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = util::split(line, '\t');
    if (cols.size() != columns)
      throw CorpusError(path.filename().string() + " line " + std::to_string(lineno) + ": expected " +
                        std::to_string(columns) + " columns");
    rows.push_back(std::move(cols));
  }
  return rows;
}

inline int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CorpusError(where + ": not an integer: " + s);
  }
}

inline KnowledgeGraph read_graph(const fs::path& nodes_file, const fs::path& triples_file) {
  KnowledgeGraph kg;
  int expected = 0;
  for (const auto& row : read_tsv(nodes_file, 2)) {
    if (parse_int(row[0], nodes_file.filename().string()) != expected)
      throw CorpusError(nodes_file.filename().string() + ": node ids must be dense and ordered");
    if (kg.find_node(row[1])) throw CorpusError(nodes_file.filename().string() + ": duplicate node " + row[1]);
    kg.add_node(row[1]);
    ++expected;
  }
  for (const auto& row : read_tsv(triples_file, 3)) {
    const auto h = kg.find_node(row[0]);
    const auto t = kg.find_node(row[2]);
    if (!h || !t)
      throw CorpusError(triples_file.filename().string() + ": triple endpoint is not a known node: " + row[0] +
                        " / " + row[2]);
    kg.add_triple(*h, kg.add_relation(row[1]), *t);
  }
  return kg;
}

inline std::string graph_nodes_text(const KnowledgeGraph& kg) {
  std::string out;
  for (int i = 0; i < kg.node_count(); ++i) out += std::to_string(i) + "\t" + clean_field(kg.node_name(i)) + "\n";
  return out;
}

inline std::string graph_triples_text(const KnowledgeGraph& kg) {
  std::string out;
  for (const auto& t : kg.triples())
    out += clean_field(kg.node_name(t.head)) + "\t" + clean_field(kg.relation_name(t.relation)) + "\t" +
           clean_field(kg.node_name(t.tail)) + "\n";
  return out;
}

}  // namespace detail

using Checksums = std::map<std::string, std::string>;  // file name -> sha256 hex

inline Checksums read_checksums(const fs::path& path) {
  Checksums out;
  std::istringstream in(util::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto t = std::string(util::trim(line));
    if (t.empty()) continue;
    const auto sp = t.find(' ');
    if (sp == std::string::npos) throw CorpusError("malformed checksum line: " + t);
    out[std::string(util::trim(t.substr(sp)))] = t.substr(0, sp);
  }
  return out;
}

inline std::string checksums_text(const Checksums& sums) {
  std::string out;
  for (const auto& [name, hex] : sums) out += hex + "  " + name + "\n";
  return out;
}

inline std::vector<std::string> corpus_files(const fs::path& dir) {
  std::vector<std::string> files = required_unified_files();
  if (fs::exists(dir / kEmbeddingFile)) files.push_back(kEmbeddingFile);
  std::sort(files.begin(), files.end());
  return files;
}

// Corpus fingerprint: hash over (file name, file hash) of every corpus file.
inline std::string corpus_fingerprint(const fs::path& dir) {
  util::Sha256 h;
  for (const auto& name : corpus_files(dir)) h.update(name + ":" + util::sha256_file(dir / name) + "\n");
  return h.hex_digest();
}

inline void verify_checksums(const fs::path& dir, const Checksums& expected) {
  for (const auto& [name, hex] : expected) {
    const auto p = dir / name;
    if (!fs::exists(p)) throw IntegrityError("checksummed file is missing: " + name);
    const auto actual = util::sha256_file(p);
    if (actual != hex) throw IntegrityError("checksum mismatch for " + name + ": expected " + hex + ", got " + actual);
  }
}

// Writes the unified files plus checksums.txt. Output is a pure function of
// the corpus contents.
inline void write_unified(const UnifiedCorpus& c, const fs::path& dir) {
  fs::create_directories(dir);
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    std::string text;
    for (const auto& d : c.split(s)) text += detail::dialog_to_json(d).dump() + "\n";
    util::write_file(dir / (std::string(to_string(s)) + ".jsonl"), text);
  }
  std::string items;
  for (std::size_t i = 0; i < c.items.size(); ++i) items += std::to_string(i) + "\t" + detail::clean_field(c.items[i]) + "\n";
  util::write_file(dir / "items.tsv", items);
  util::write_file(dir / "entities.tsv", detail::graph_nodes_text(c.entity_kg));
  util::write_file(dir / "words.tsv", detail::graph_nodes_text(c.word_kg));
  util::write_file(dir / "entity_kg.tsv", detail::graph_triples_text(c.entity_kg));
  util::write_file(dir / "word_kg.tsv", detail::graph_triples_text(c.word_kg));
  std::string i2e;
  for (const auto& [item, ent] : c.item2entity)
    i2e += std::to_string(item) + "\t" + detail::clean_field(c.entity_kg.node_name(ent)) + "\n";
  util::write_file(dir / "item2entity.tsv", i2e);
  std::string sf;
  for (const auto& [surface, ent] : c.surface_forms)
    sf += detail::clean_field(surface) + "\t" + detail::clean_field(c.entity_kg.node_name(ent)) + "\n";
  util::write_file(dir / "surface_forms.tsv", sf);
  std::string pl;
  for (const auto& l : c.policy_labels)
    pl += std::to_string(l.id) + "\t" + detail::clean_field(l.type) + "\t" + detail::clean_field(l.name) + "\n";
  util::write_file(dir / "policy_labels.tsv", pl);
  if (c.embeddings_text)
    util::write_file(dir / kEmbeddingFile, *c.embeddings_text);
  else if (fs::exists(dir / kEmbeddingFile))
    fs::remove(dir / kEmbeddingFile);

  Checksums sums;
  for (const auto& name : corpus_files(dir)) sums[name] = util::sha256_file(dir / name);
  util::write_file(dir / kChecksumFile, checksums_text(sums));
}

inline WordVectors parse_word_vectors(const std::string& text) {
  WordVectors out;
  std::istringstream in(text);
  std::string line;
  std::size_t dim = 0;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> v;
    double x = 0;
    while (ls >> x) v.push_back(x);
    if (v.empty()) throw CorpusError("embeddings.txt line " + std::to_string(lineno) + ": no vector");
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw CorpusError("embeddings.txt line " + std::to_string(lineno) + ": inconsistent dimension");
    out[token] = std::move(v);
  }
  return out;
}

// Parses and validates a unified corpus directory (no vocabulary encoding).
inline UnifiedCorpus read_unified(const fs::path& dir) {
  UnifiedCorpus c;
  for (const auto& row : detail::read_tsv(dir / "items.tsv", 2)) {
    if (detail::parse_int(row[0], "items.tsv") != static_cast<int>(c.items.size()))
      throw CorpusError("items.tsv: item ids must be dense and ordered");
    c.items.push_back(row[1]);
  }
  c.entity_kg = detail::read_graph(dir / "entities.tsv", dir / "entity_kg.tsv");
  c.word_kg = detail::read_graph(dir / "words.tsv", dir / "word_kg.tsv");
  for (const auto& row : detail::read_tsv(dir / "item2entity.tsv", 2)) {
    const int item = detail::parse_int(row[0], "item2entity.tsv");
    const auto ent = c.entity_kg.find_node(row[1]);
    if (item < 0 || item >= static_cast<int>(c.items.size()))
      throw CorpusError("item2entity.tsv: unknown item id " + row[0]);
    if (!ent) throw CorpusError("item2entity.tsv: unknown entity " + row[1]);
    c.item2entity[item] = *ent;
  }
  for (const auto& row : detail::read_tsv(dir / "surface_forms.tsv", 2)) {
    const auto ent = c.entity_kg.find_node(row[1]);
    if (!ent) throw CorpusError("surface_forms.tsv: unknown entity " + row[1]);
    c.surface_forms[row[0]] = *ent;
  }
  for (const auto& row : detail::read_tsv(dir / "policy_labels.tsv", 3)) {
    const int id = detail::parse_int(row[0], "policy_labels.tsv");
    if (id != static_cast<int>(c.policy_labels.size()))
      throw CorpusError("policy_labels.tsv: label ids must be dense and ordered");
    c.policy_labels.push_back({id, row[1], row[2]});
  }
  if (fs::exists(dir / kEmbeddingFile)) c.embeddings_text = util::read_file(dir / kEmbeddingFile);

  std::set<std::string> seen_ids;
  const int n_items = static_cast<int>(c.items.size());
  const int n_labels = static_cast<int>(c.policy_labels.size());
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    const std::string name = std::string(to_string(s)) + ".jsonl";
    std::ifstream in(dir / name);
    if (!in) throw CorpusError("missing corpus file: " + (dir / name).string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (util::trim(line).empty()) continue;
      const std::string where = name + " line " + std::to_string(lineno);
      Dialog d;
      try {
        d = detail::dialog_from_json(json::parse(line));
      } catch (const json::exception& e) {
        throw CorpusError(where + ": malformed record: " + e.what());
      }
      const std::string rec = where + " (conv_id " + d.conv_id + ")";
      if (!seen_ids.insert(d.conv_id).second) throw CorpusError(rec + ": conv_id appears in more than one record");
      if (d.utterances.empty()) throw CorpusError(rec + ": dialog has no utterances");
      if (d.user_profile)
        for (int item : d.user_profile->history)
          if (item < 0 || item >= n_items) throw CorpusError(rec + ": unknown profile item id " + std::to_string(item));
      for (const auto& u : d.utterances) {
        for (int item : u.item_ids)
          if (item < 0 || item >= n_items) throw CorpusError(rec + ": unknown item id " + std::to_string(item));
        for (int e : u.entity_ids)
          if (!c.entity_kg.has_node(e)) throw CorpusError(rec + ": unknown entity id " + std::to_string(e));
        for (int w : u.word_ids)
          if (!c.word_kg.has_node(w)) throw CorpusError(rec + ": unknown word id " + std::to_string(w));
        if (u.policy && (u.policy->id < 0 || u.policy->id >= n_labels))
          throw CorpusError(rec + ": unknown policy label id " + std::to_string(u.policy->id));
      }
      c.split(s).push_back(std::move(d));
    }
  }
  return c;
}

struct LoadOptions {
  TokenizerKind tokenizer = TokenizerKind::Whitespace;
  int min_freq = 1;
  int max_vocab = 30000;
  std::string url;  // base URL for the fetch hook
  // Called with (url, dir, missing file names) when files are absent and a
  // URL is configured.
  std::function<void(const std::string&, const fs::path&, const std::vector<std::string>&)> fetch;
};

// Encodes dialog text against a vocabulary in place.
inline void encode_dialogs(std::vector<Dialog>& dialogs, const Vocabulary& vocab, TokenizerKind kind) {
  for (auto& d : dialogs)
    for (auto& u : d.utterances) {
      u.tokens = tokenize(u.text, kind);
      u.token_ids = vocab.encode(u.tokens);
    }
  for (auto& d : dialogs)
    if (d.user_profile) {
      d.user_profile->sentence_ids.clear();
      for (const auto& s : d.user_profile->sentences) d.user_profile->sentence_ids.push_back(vocab.encode(tokenize(s, kind)));
    }
}

inline DatasetBundle load_unified(const fs::path& data_dir, const std::optional<Checksums>& expected_checksums,
                                  const LoadOptions& options = {}) {
  std::vector<std::string> missing;
  for (const auto& f : required_unified_files())
    if (!fs::exists(data_dir / f)) missing.push_back(f);
  if (!missing.empty()) {
    if (options.url.empty() || !options.fetch)
      throw CorpusError("unified corpus incomplete in " + data_dir.string() + ": missing " + missing.front());
    fs::create_directories(data_dir);
    options.fetch(options.url, data_dir, missing);
  }
  if (expected_checksums) verify_checksums(data_dir, *expected_checksums);

  UnifiedCorpus c = read_unified(data_dir);
  DatasetBundle b;
  b.tokenizer = options.tokenizer;
  for (Split s : {Split::Train, Split::Valid, Split::Test})
    for (auto& d : c.split(s))
      for (auto& u : d.utterances) u.tokens = tokenize(u.text, options.tokenizer);
  b.vocab = build_vocab(c.train, options.min_freq, options.max_vocab, options.tokenizer);
  for (Split s : {Split::Train, Split::Valid, Split::Test}) encode_dialogs(c.split(s), b.vocab, options.tokenizer);
  b.train = std::move(c.train);
  b.valid = std::move(c.valid);
  b.test = std::move(c.test);
  b.entity_kg = std::move(c.entity_kg);
  b.word_kg = std::move(c.word_kg);
  b.item_catalog = std::move(c.items);
  b.item2entity = std::move(c.item2entity);
  b.policy_labels = std::move(c.policy_labels);
  b.surface_forms = std::move(c.surface_forms);
  if (c.embeddings_text) b.word_vectors = parse_word_vectors(*c.embeddings_text);
  b.fingerprint = corpus_fingerprint(data_dir);
  return b;
}

}  // namespace crskit::corpus
