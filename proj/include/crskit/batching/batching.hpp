#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "crskit/corpus/types.hpp"
#include "crskit/corpus/vocabulary.hpp"
#include "crskit/error.hpp"

namespace crskit::batching {

using corpus::Dialog;
using corpus::Role;
using corpus::Utterance;

enum class Task { Rec, Conv, Policy };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::Rec: return "rec";
    case Task::Conv: return "conv";
    case Task::Policy: return "policy";
  }
  return "?";
}

inline Task task_from_string(const std::string& s) {
  if (s == "rec") return Task::Rec;
  if (s == "conv") return Task::Conv;
  if (s == "policy") return Task::Policy;
  throw BatchError("unknown task: " + s);
}

// Turns are joined with this id in flattened token contexts.
inline constexpr int kSeparatorId = corpus::kEndId;

struct InstanceOptions {
  int max_context_turns = 8;
  int max_response_len = 30;  // response body tokens, excluding start/end
  bool rec_from_seeker = false;
};

// Everything a model may read about the turns preceding a target turn.
struct Context {
  std::vector<int> token_ids;   // turns joined by kSeparatorId
  std::vector<int> entity_ids;  // in order of mention, duplicates removed
  std::vector<int> item_ids;    // in order of mention, duplicates kept
  std::vector<int> word_ids;
  std::vector<int> labels;      // policy labels of the window's turns
  std::vector<int> profile_item_ids;
  std::vector<int> profile_token_ids;  // profile sentences joined by kSeparatorId
};

// Context for the turn at index `turn`: the last `max_turns` turns before it.
inline Context build_context(const Dialog& d, std::size_t turn, int max_turns) {
  if (max_turns < 1) throw BatchError("max_context_turns must be >= 1");
  Context c;
  const std::size_t begin = turn > static_cast<std::size_t>(max_turns) ? turn - static_cast<std::size_t>(max_turns) : 0;
  for (std::size_t t = begin; t < turn && t < d.utterances.size(); ++t) {
    const auto& u = d.utterances[t];
    if (t > begin) c.token_ids.push_back(kSeparatorId);
    c.token_ids.insert(c.token_ids.end(), u.token_ids.begin(), u.token_ids.end());
    for (int e : u.entity_ids)
      if (std::find(c.entity_ids.begin(), c.entity_ids.end(), e) == c.entity_ids.end()) c.entity_ids.push_back(e);
    c.item_ids.insert(c.item_ids.end(), u.item_ids.begin(), u.item_ids.end());
    c.word_ids.insert(c.word_ids.end(), u.word_ids.begin(), u.word_ids.end());
    if (u.policy) c.labels.push_back(u.policy->id);
  }
  if (d.user_profile) {
    c.profile_item_ids = d.user_profile->history;
    for (std::size_t s = 0; s < d.user_profile->sentence_ids.size(); ++s) {
      if (s > 0) c.profile_token_ids.push_back(kSeparatorId);
      const auto& ids = d.user_profile->sentence_ids[s];
      c.profile_token_ids.insert(c.profile_token_ids.end(), ids.begin(), ids.end());
    }
  }
  return c;
}

struct RecInstance {
  static constexpr Task task = Task::Rec;
  std::string conv_id;
  int turn = 0;
  std::vector<int> context_entity_ids;
  std::vector<int> context_token_ids;
  std::vector<int> context_item_ids;
  std::vector<int> profile_item_ids;
  int target_item = 0;

  static RecInstance from_context(const Context& c, int target) {
    return {"", 0, c.entity_ids, c.token_ids, c.item_ids, c.profile_item_ids, target};
  }
  std::vector<std::pair<std::string, const std::vector<int>*>> fields() const {
    return {{"context_entities", &context_entity_ids},
            {"context_items", &context_item_ids},
            {"context_tokens", &context_token_ids},
            {"profile_items", &profile_item_ids}};
  }
  int target() const { return target_item; }
};

struct ConvInstance {
  static constexpr Task task = Task::Conv;
  std::string conv_id;
  int turn = 0;
  std::vector<int> context_token_ids;
  std::vector<int> context_entity_ids;
  std::vector<int> response_token_ids;  // start ... end
  std::vector<int> response_item_ids;   // items the response recommends

  std::vector<std::pair<std::string, const std::vector<int>*>> fields() const {
    return {{"context_entities", &context_entity_ids},
            {"context_tokens", &context_token_ids},
            {"response", &response_token_ids},
            {"response_items", &response_item_ids}};
  }
  int target() const { return -1; }
};

struct PolicyInstance {
  static constexpr Task task = Task::Policy;
  std::string conv_id;
  int turn = 0;
  std::vector<int> context_token_ids;
  std::vector<int> profile_token_ids;
  std::vector<int> context_labels;
  int target_label = 0;

  std::vector<std::pair<std::string, const std::vector<int>*>> fields() const {
    return {{"context_labels", &context_labels},
            {"context_tokens", &context_token_ids},
            {"profile_tokens", &profile_token_ids}};
  }
  int target() const { return target_label; }
};

// Response ids: start, the first max_len body tokens, end.
inline std::vector<int> response_ids(const std::vector<int>& body, int max_len) {
  std::vector<int> out{corpus::kStartId};
  const auto n = std::min<std::size_t>(body.size(), static_cast<std::size_t>(std::max(0, max_len)));
  out.insert(out.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(n));
  out.push_back(corpus::kEndId);
  return out;
}

inline std::vector<RecInstance> make_rec_instances(const std::vector<Dialog>& split, const InstanceOptions& o) {
  std::vector<RecInstance> out;
  for (const auto& d : split)
    for (std::size_t t = 0; t < d.utterances.size(); ++t) {
      const auto& u = d.utterances[t];
      if (u.item_ids.empty() || (u.role != Role::Recommender && !o.rec_from_seeker)) continue;
      const Context c = build_context(d, t, o.max_context_turns);
      for (int item : u.item_ids) {
        auto inst = RecInstance::from_context(c, item);
        inst.conv_id = d.conv_id;
        inst.turn = static_cast<int>(t);
        out.push_back(std::move(inst));
      }
    }
  return out;
}

inline std::vector<ConvInstance> make_conv_instances(const std::vector<Dialog>& split, const InstanceOptions& o) {
  std::vector<ConvInstance> out;
  for (const auto& d : split)
    for (std::size_t t = 0; t < d.utterances.size(); ++t) {
      const auto& u = d.utterances[t];
      if (u.role != Role::Recommender) continue;
      const Context c = build_context(d, t, o.max_context_turns);
      out.push_back({d.conv_id, static_cast<int>(t), c.token_ids, c.entity_ids,
                     response_ids(u.token_ids, o.max_response_len), u.item_ids});
    }
  return out;
}

inline std::vector<PolicyInstance> make_policy_instances(const std::vector<Dialog>& split, const InstanceOptions& o) {
  std::vector<PolicyInstance> out;
  for (const auto& d : split)
    for (std::size_t t = 0; t < d.utterances.size(); ++t) {
      const auto& u = d.utterances[t];
      if (!u.policy) continue;
      const Context c = build_context(d, t, o.max_context_turns);
      out.push_back({d.conv_id, static_cast<int>(t), c.token_ids, c.profile_token_ids, c.labels, u.policy->id});
    }
  return out;
}

// One padded integer matrix; mask(i, j) == 1 exactly for j < lengths[i].
struct PaddedField {
  int rows = 0;
  int width = 0;
  std::vector<int> ids;
  std::vector<int> mask;
  std::vector<int> lengths;

  int at(int i, int j) const { return ids[static_cast<std::size_t>(i * width + j)]; }
  int mask_at(int i, int j) const { return mask[static_cast<std::size_t>(i * width + j)]; }
  int length(int i) const { return lengths[static_cast<std::size_t>(i)]; }
  std::vector<int> row(int i) const {
    const auto b = ids.begin() + static_cast<std::ptrdiff_t>(i * width);
    return {b, b + length(i)};
  }
};

// Right-pads rows to the batch maximum, capped at max_len. Longer rows keep
// their last max_len ids.
inline PaddedField pad_rows(const std::vector<const std::vector<int>*>& rows, int pad_id, int max_len) {
  if (max_len < 0) throw BatchError("max_len must be >= 0");
  PaddedField f;
  f.rows = static_cast<int>(rows.size());
  for (const auto* r : rows) f.width = std::max(f.width, static_cast<int>(std::min<std::size_t>(r->size(), static_cast<std::size_t>(max_len))));
  f.ids.assign(static_cast<std::size_t>(f.rows * f.width), pad_id);
  f.mask.assign(static_cast<std::size_t>(f.rows * f.width), 0);
  for (int i = 0; i < f.rows; ++i) {
    const auto& r = *rows[static_cast<std::size_t>(i)];
    const int len = static_cast<int>(std::min<std::size_t>(r.size(), static_cast<std::size_t>(f.width)));
    const auto skip = r.size() - static_cast<std::size_t>(len);
    for (int j = 0; j < len; ++j) {
      f.ids[static_cast<std::size_t>(i * f.width + j)] = r[skip + static_cast<std::size_t>(j)];
      f.mask[static_cast<std::size_t>(i * f.width + j)] = 1;
    }
    f.lengths.push_back(len);
  }
  return f;
}

inline PaddedField pad_rows(const std::vector<std::vector<int>>& rows, int pad_id, int max_len) {
  std::vector<const std::vector<int>*> ptrs;
  for (const auto& r : rows) ptrs.push_back(&r);
  return pad_rows(ptrs, pad_id, max_len);
}

struct TaskBatch {
  Task task = Task::Rec;
  std::map<std::string, PaddedField> fields;
  std::vector<int> targets;  // rec: item id, policy: label id, conv: unused (-1)
  std::vector<std::string> conv_ids;

  int size() const { return static_cast<int>(conv_ids.size()); }
  const PaddedField& field(const std::string& name) const {
    auto it = fields.find(name);
    if (it == fields.end()) throw BatchError(std::string(to_string(task)) + " batch has no field '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return fields.count(name) > 0; }
};

template <typename Instance>
TaskBatch pad_batch(const std::vector<const Instance*>& instances, int pad_id, int max_len) {
  if (instances.empty()) throw BatchError("cannot pad an empty instance list");
  TaskBatch b;
  b.task = Instance::task;
  const auto names = instances.front()->fields();
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<const std::vector<int>*> rows;
    rows.reserve(instances.size());
    for (const auto* inst : instances) rows.push_back(inst->fields()[k].second);
    b.fields.emplace(names[k].first, pad_rows(rows, pad_id, max_len));
  }
  for (const auto* inst : instances) {
    b.targets.push_back(inst->target());
    b.conv_ids.push_back(inst->conv_id);
  }
  return b;
}

template <typename Instance>
TaskBatch pad_batch(const std::vector<Instance>& instances, int pad_id, int max_len) {
  std::vector<const Instance*> ptrs;
  for (const auto& i : instances) ptrs.push_back(&i);
  return pad_batch(ptrs, pad_id, max_len);
}

// Seeded permutation of 0..n-1 (identity when shuffle is off).
inline std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

template <typename Instance>
std::vector<TaskBatch> iterate_batches(const std::vector<Instance>& instances, int batch_size, bool shuffle,
                                       std::uint64_t seed, int pad_id = corpus::kPadId, int max_len = 128) {
  if (batch_size < 1) throw BatchError("batch_size must be >= 1");
  const auto order = epoch_order(instances.size(), shuffle, seed);
  std::vector<TaskBatch> out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const Instance*> chunk;
    for (std::size_t k = start; k < std::min(order.size(), start + static_cast<std::size_t>(batch_size)); ++k)
      chunk.push_back(&instances[order[k]]);
    out.push_back(pad_batch(chunk, pad_id, max_len));
  }
  return out;
}

}  // namespace crskit::batching
