#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crskit/models/kbrd.hpp"
#include "crskit/models/policy.hpp"
#include "crskit/models/recommenders.hpp"

namespace crskit::models {

struct ModelEntry {
  std::vector<Task> tasks;
  std::function<std::unique_ptr<Model>(const ModelConfig&, const ModelContext&, const std::string&)> make;
};

inline const std::map<std::string, ModelEntry>& model_registry() {
  static const std::map<std::string, ModelEntry> reg = [] {
    std::map<std::string, ModelEntry> r;
    const auto add = [&r]<typename M>(const std::string& name, std::vector<Task> tasks, M*) {
      r[name] = {std::move(tasks), [](const ModelConfig& c, const ModelContext& ctx, const std::string& prefix) {
                   return std::unique_ptr<Model>(std::make_unique<M>(c, ctx, prefix));
                 }};
    };
    add("popularity", {Task::Rec}, static_cast<Popularity*>(nullptr));
    add("rgcn", {Task::Rec}, static_cast<RgcnRecommender*>(nullptr));
    add("gru4rec", {Task::Rec}, static_cast<Gru4Rec*>(nullptr));
    add("sasrec", {Task::Rec}, static_cast<SasRec*>(nullptr));
    add("textcnn", {Task::Rec}, static_cast<TextCnn*>(nullptr));
    add("hred", {Task::Conv}, static_cast<Hred*>(nullptr));
    add("transformer", {Task::Conv}, static_cast<Transformer*>(nullptr));
    add("kbrd", {Task::Rec, Task::Conv}, static_cast<Kbrd*>(nullptr));
    add("pmi", {Task::Policy}, static_cast<Pmi*>(nullptr));
    add("mgcg", {Task::Policy}, static_cast<Mgcg*>(nullptr));
    return r;
  }();
  return reg;
}

// Registered names that can serve `task`, "none" first.
inline std::vector<std::string> model_names(Task task) {
  std::vector<std::string> out{"none"};
  for (const auto& [name, e] : model_registry())
    if (std::find(e.tasks.begin(), e.tasks.end(), task) != e.tasks.end()) out.push_back(name);
  return out;
}

inline std::string join_names(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
  return s;
}

inline bool model_serves(const std::string& name, Task task) {
  auto it = model_registry().find(name);
  return it != model_registry().end() && std::find(it->second.tasks.begin(), it->second.tasks.end(), task) != it->second.tasks.end();
}

inline std::unique_ptr<Model> make_model(const ModelConfig& c, const ModelContext& ctx, const std::string& prefix) {
  auto it = model_registry().find(c.name);
  if (it == model_registry().end()) {
    std::vector<std::string> names;
    for (const auto& [n, e] : model_registry()) names.push_back(n);
    throw ModelError("unknown model '" + c.name + "'; valid models: " + join_names(names));
  }
  return it->second.make(c, ctx, prefix);
}

}  // namespace crskit::models
