#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "crskit/corpus/text.hpp"
#include "crskit/corpus/unified.hpp"
#include "crskit/util/logging.hpp"

namespace crskit::corpus {

struct IngestOptions {
  double valid_fraction = 0.1;
  TokenizerKind tokenizer = TokenizerKind::Whitespace;
};

struct IngestReport {
  int train_dialogs = 0;
  int valid_dialogs = 0;
  int test_dialogs = 0;
  long utterances = 0;
  long unresolved_mentions = 0;
  long malformed_records = 0;
  int items = 0;

  int dialogs() const { return train_dialogs + valid_dialogs + test_dialogs; }
};

using Converter = std::function<IngestReport(const fs::path& raw_dir, const fs::path& out_dir, const IngestOptions&)>;

namespace detail {

// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// "Star Quest (1999)" -> "star quest"
inline std::string surface_of_title(const std::string& title, TokenizerKind kind) {
  static const std::regex year(R"(\s*\(\d{4}\)\s*$)");
  return util::join(tokenize(std::regex_replace(title, year, ""), kind), " ");
}

struct RawSideData {
  std::vector<std::array<std::string, 3>> entity_triples;
  std::vector<std::array<std::string, 3>> word_triples;
  std::map<std::string, std::string> item2entity;  // raw movie id -> entity name
  std::map<std::string, std::string> surface_forms;
  bool has_item2entity = false;
};

inline std::vector<std::array<std::string, 3>> read_name_triples(const fs::path& p) {
  std::vector<std::array<std::string, 3>> out;
  if (!fs::exists(p)) return out;
  for (auto& row : read_tsv(p, 3)) out.push_back({row[0], row[1], row[2]});
  return out;
}

inline KnowledgeGraph graph_from_names(const std::set<std::string>& names,
                                       const std::vector<std::array<std::string, 3>>& triples) {
  KnowledgeGraph kg;
  for (const auto& n : names) kg.add_node(n);
  for (const auto& [h, r, t] : triples) kg.add_triple(*kg.find_node(h), kg.add_relation(r), *kg.find_node(t));
  return kg;
}

}  // namespace detail

// ReDial release layout: {train,valid?,test}_data.jsonl with "@<movieId>"
// mention markup and movies_with_mentions.csv. Optional side files in the
// same directory: entity_kg.tsv, word_kg.tsv (name triples), item2entity.tsv
// (movieId -> entity name), surface_forms.tsv, embeddings.txt. Messages may
// carry an "action" string (policy label) and conversations a "userProfile"
// {history: [movieId], sentences: [...]}.
inline IngestReport ingest_redial(const fs::path& raw_dir, const fs::path& out_dir, const IngestOptions& options) {
  if (!fs::is_directory(raw_dir)) throw IngestError("raw directory not found: " + raw_dir.string());
  const auto movies_csv = raw_dir / "movies_with_mentions.csv";
  if (!fs::exists(movies_csv)) throw IngestError("missing movie table: " + movies_csv.string());

  auto log = util::logger();
  IngestReport report;
  UnifiedCorpus c;

  // Movie table -> catalog, in file order.
  std::map<std::string, int> raw_to_item;
  {
    std::ifstream in(movies_csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (util::trim(line).empty()) continue;
      auto cols = detail::split_csv_line(line);
      if (cols.size() < 2 || cols[0].empty() || raw_to_item.count(cols[0])) {
        ++report.malformed_records;
        continue;
      }
      raw_to_item[cols[0]] = static_cast<int>(c.items.size());
      c.items.push_back(cols[1]);
    }
  }
  report.items = static_cast<int>(c.items.size());

  detail::RawSideData side;
  side.entity_triples = detail::read_name_triples(raw_dir / "entity_kg.tsv");
  side.word_triples = detail::read_name_triples(raw_dir / "word_kg.tsv");
  if (fs::exists(raw_dir / "item2entity.tsv")) {
    side.has_item2entity = true;
    for (auto& row : detail::read_tsv(raw_dir / "item2entity.tsv", 2)) side.item2entity[row[0]] = row[1];
  }
  if (fs::exists(raw_dir / "surface_forms.tsv"))
    for (auto& row : detail::read_tsv(raw_dir / "surface_forms.tsv", 2)) side.surface_forms[row[0]] = row[1];

  // Entity names of items: explicit map, or one node per item when the raw
  // release has no entity side data.
  std::map<int, std::string> item_entity_name;
  for (const auto& [raw, item] : raw_to_item) {
    if (side.has_item2entity) {
      auto it = side.item2entity.find(raw);
      if (it != side.item2entity.end()) item_entity_name[item] = it->second;
    } else {
      item_entity_name[item] = c.items[static_cast<std::size_t>(item)];
    }
  }
  std::set<std::string> entity_names;
  for (const auto& [h, r, t] : side.entity_triples) {
    entity_names.insert(h);
    entity_names.insert(t);
  }
  for (const auto& [item, name] : item_entity_name) entity_names.insert(name);
  for (const auto& [surface, name] : side.surface_forms) entity_names.insert(name);
  c.entity_kg = detail::graph_from_names(entity_names, side.entity_triples);

  std::set<std::string> word_names;
  for (const auto& [h, r, t] : side.word_triples) {
    word_names.insert(h);
    word_names.insert(t);
  }
  c.word_kg = detail::graph_from_names(word_names, side.word_triples);

  for (const auto& [item, name] : item_entity_name) c.item2entity[item] = *c.entity_kg.find_node(name);
  for (const auto& [surface, name] : side.surface_forms)
    c.surface_forms[util::join(tokenize(surface, options.tokenizer), " ")] = *c.entity_kg.find_node(name);
  for (const auto& [item, ent] : c.item2entity) {
    const auto s = detail::surface_of_title(c.items[static_cast<std::size_t>(item)], options.tokenizer);
    if (!s.empty() && std::count(s.begin(), s.end(), ' ') < 3) c.surface_forms.emplace(s, ent);
  }

  // Policy labels: every distinct "action" across the files, sorted.
  struct RawDialog {
    json record;
    Split split;
  };
  std::vector<RawDialog> raws;
  std::set<std::string> actions;
  const auto read_split = [&](const fs::path& p, Split split) {
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
      if (util::trim(line).empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
        if (!rec.contains("conversationId") || !rec.at("messages").is_array() || rec.at("messages").empty())
          throw std::runtime_error("missing fields");
        for (const auto& m : rec.at("messages")) {
          (void)m.at("text").get<std::string>();
          (void)m.at("senderWorkerId");
          if (m.contains("action")) actions.insert(m.at("action").get<std::string>());
        }
      } catch (const std::exception&) {
        ++report.malformed_records;
        continue;
      }
      raws.push_back({std::move(rec), split});
    }
  };
  const auto train_file = raw_dir / "train_data.jsonl";
  const auto valid_file = raw_dir / "valid_data.jsonl";
  const auto test_file = raw_dir / "test_data.jsonl";
  if (!fs::exists(train_file) && !fs::exists(test_file))
    throw IngestError("no dialog files (train_data.jsonl / test_data.jsonl) in " + raw_dir.string());
  if (fs::exists(train_file)) read_split(train_file, Split::Train);
  const bool has_valid = fs::exists(valid_file);
  if (has_valid) read_split(valid_file, Split::Valid);
  if (fs::exists(test_file)) read_split(test_file, Split::Test);

  std::map<std::string, int> action_ids;
  for (const auto& a : actions) {
    action_ids[a] = static_cast<int>(c.policy_labels.size());
    c.policy_labels.push_back({static_cast<int>(c.policy_labels.size()), "action", a});
  }

  static const std::regex mention(R"(@(\d+))");
  std::set<std::string> seen;
  for (auto& raw : raws) {
    const auto& rec = raw.record;
    Dialog d;
    d.conv_id = rec.at("conversationId").is_string() ? rec.at("conversationId").get<std::string>()
                                                     : rec.at("conversationId").dump();
    if (!seen.insert(d.conv_id).second) {
      ++report.malformed_records;
      continue;
    }
    const auto initiator = rec.value("initiatorWorkerId", json());
    if (rec.contains("userProfile")) {
      UserProfile p;
      for (const auto& h : rec.at("userProfile").value("history", json::array())) {
        const std::string key = h.is_string() ? h.get<std::string>() : h.dump();
        auto it = raw_to_item.find(key);
        if (it == raw_to_item.end())
          ++report.unresolved_mentions;
        else
          p.history.push_back(it->second);
      }
      p.sentences = rec.at("userProfile").value("sentences", std::vector<std::string>{});
      d.user_profile = std::move(p);
    }
    for (const auto& m : rec.at("messages")) {
      Utterance u;
      u.role = m.at("senderWorkerId") == initiator ? Role::Seeker : Role::Recommender;
      const std::string text = m.at("text").get<std::string>();
      std::string rewritten;
      auto begin = std::sregex_iterator(text.begin(), text.end(), mention);
      std::size_t last = 0;
      for (auto it = begin; it != std::sregex_iterator(); ++it) {
        rewritten += text.substr(last, static_cast<std::size_t>(it->position()) - last);
        auto found = raw_to_item.find((*it)[1].str());
        if (found == raw_to_item.end()) {
          ++report.unresolved_mentions;
        } else {
          rewritten += kItemToken;
          u.item_ids.push_back(found->second);
        }
        last = static_cast<std::size_t>(it->position() + it->length());
      }
      rewritten += text.substr(last);
      u.text = util::join(split_whitespace(rewritten), " ");
      const auto tokens = tokenize(u.text, options.tokenizer);
      u.entity_ids = link_entities(tokens, c.surface_forms);
      for (int item : u.item_ids) {
        auto e = c.item2entity.find(item);
        if (e != c.item2entity.end() && std::find(u.entity_ids.begin(), u.entity_ids.end(), e->second) == u.entity_ids.end())
          u.entity_ids.push_back(e->second);
      }
      u.word_ids = link_words(tokens, c.word_kg);
      if (m.contains("action")) u.policy = PolicyLabel{"action", action_ids.at(m.at("action").get<std::string>())};
      d.utterances.push_back(std::move(u));
      ++report.utterances;
    }
    c.split(raw.split).push_back(std::move(d));
  }

  if (!has_valid && !c.train.empty()) {
    const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(c.train.size()) * options.valid_fraction));
    c.valid.assign(std::make_move_iterator(c.train.end() - static_cast<std::ptrdiff_t>(n_valid)),
                   std::make_move_iterator(c.train.end()));
    c.train.resize(c.train.size() - n_valid);
  }
  report.train_dialogs = static_cast<int>(c.train.size());
  report.valid_dialogs = static_cast<int>(c.valid.size());
  report.test_dialogs = static_cast<int>(c.test.size());
  if (report.dialogs() == 0) throw IngestError("no dialogs parsed from " + raw_dir.string());

  if (fs::exists(raw_dir / kEmbeddingFile)) c.embeddings_text = util::read_file(raw_dir / kEmbeddingFile);
  write_unified(c, out_dir);

  if (report.malformed_records) log->warn("skipped {} malformed raw records", report.malformed_records);
  if (report.unresolved_mentions) log->info("dropped {} unresolved item mentions", report.unresolved_mentions);
  return report;
}

inline std::map<std::string, Converter>& converter_registry() {
  static std::map<std::string, Converter> registry = {{"redial", ingest_redial}};
  return registry;
}

inline IngestReport ingest_raw(const fs::path& raw_dir, const std::string& format_name, const fs::path& out_dir,
                               const IngestOptions& options = {}) {
  auto& reg = converter_registry();
  auto it = reg.find(format_name);
  if (it == reg.end()) {
    std::string names;
    for (const auto& [n, f] : reg) names += (names.empty() ? "" : ", ") + n;
    throw IngestError("unknown raw format '" + format_name + "' (known: " + names + ")");
  }
  return it->second(raw_dir, out_dir, options);
}

}  // namespace crskit::corpus
