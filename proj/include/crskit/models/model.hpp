#pragma once

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crskit/batching/batching.hpp"
#include "crskit/models/decode.hpp"
#include "crskit/models/layers.hpp"
#include "crskit/models/model_config.hpp"
#include "crskit/nn/rgcn.hpp"

namespace crskit::models {

using batching::Task;
using batching::TaskBatch;

// Corpus side data available when a model is built.
struct ModelContext {
  nn::RelationalGraph entity_graph;
  std::vector<int> item_entity;  // item id -> entity id, -1 when unmapped
  bool use_profile_history = true;
};

// Inputs for the counting baselines.
struct FitData {
  std::vector<batching::RecInstance> rec;
  std::vector<std::vector<int>> label_sequences;  // policy labels per training dialog, in turn order
};

// One response to generate.
struct ConvQuery {
  std::vector<int> context_token_ids;
  std::vector<int> context_entity_ids;
  std::vector<int> response_item_ids;  // recommendations the response should carry
};

class Model {
 public:
  Model(ModelConfig config, std::string prefix) : config_(std::move(config)), prefix_(std::move(prefix)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  virtual std::vector<Task> tasks() const = 0;
  bool supports(Task t) const {
    const auto ts = tasks();
    return std::find(ts.begin(), ts.end(), t) != ts.end();
  }
  virtual bool trainable() const { return true; }
  virtual void fit_statistics(const FitData&) {}

  // Training loss on a batch of one of this model's tasks.
  virtual Var loss(Tape& t, const TaskBatch& b) const {
    (void)t;
    throw ModelError(config_.name + " has no " + batching::to_string(b.task) + " loss");
  }

  // rec: batch x catalog scores.
  virtual Matrix rec_scores(const TaskBatch& b) const { unsupported(b.task); }
  // conv: negative log-likelihood of every real target token, row by row.
  virtual std::vector<double> token_nlls(const TaskBatch& b) const { unsupported(b.task); }
  virtual std::unique_ptr<DecodeSource> decoder(const ConvQuery&) const { unsupported(Task::Conv); }
  // policy: batch x label probabilities.
  virtual Matrix policy_probs(const TaskBatch& b) const { unsupported(b.task); }

 protected:
  std::string pname(const std::string& local) const { return prefix_ + "/" + local; }
  std::mt19937_64& init_rng() { return init_rng_; }

  [[noreturn]] void unsupported(Task t) const {
    throw ModelError(config_.name + " does not support the " + std::string(batching::to_string(t)) + " task");
  }

  void check_task(const TaskBatch& b, Task t) const {
    if (b.task != t) unsupported(b.task);
  }

  ModelConfig config_;
  std::string prefix_;
  ParameterSet params_;

 private:
  std::mt19937_64 init_rng_{config_.seed};
};

// Rows of a batch field as plain id lists.
inline std::vector<int> row_of(const TaskBatch& b, const std::string& field, int i) { return b.field(field).row(i); }

// Shared teacher-forcing path for response generators.
class ConvModel : public Model {
 public:
  using Model::Model;

  // For each listed row: log-probabilities (steps x vocab) of response[1..]
  // given response[..-1].
  virtual std::vector<Var> response_log_probs(Tape& t, const TaskBatch& b, const std::vector<int>& rows) const = 0;

  Var conv_loss(Tape& t, const TaskBatch& b) const {
    std::vector<int> targets;
    auto parts = collect(t, b, targets);
    if (parts.empty()) throw ModelError("conv batch has no response tokens");
    Var lp = parts.size() == 1 ? parts.front() : nn::concat_rows(parts);
    return nn::nll_mean(lp, targets, std::vector<double>(targets.size(), 1.0));
  }

  std::vector<double> token_nlls(const TaskBatch& b) const override {
    check_task(b, Task::Conv);
    Tape t(false);
    std::vector<int> targets;
    const auto parts = collect(t, b, targets);
    std::vector<double> out;
    std::size_t k = 0;
    for (const auto& p : parts)
      for (Eigen::Index r = 0; r < p.rows(); ++r, ++k) out.push_back(-p.value()(r, targets[k]));
    return out;
  }

 private:
  std::vector<Var> collect(Tape& t, const TaskBatch& b, std::vector<int>& targets) const {
    const auto& resp = b.field("response");
    std::vector<int> rows;
    for (int i = 0; i < b.size(); ++i) {
      if (resp.length(i) < 2) continue;  // nothing to predict
      rows.push_back(i);
      const auto r = resp.row(i);
      targets.insert(targets.end(), r.begin() + 1, r.end());
    }
    if (rows.empty()) return {};
    return response_log_probs(t, b, rows);
  }
};

// Teacher-forcing split of a response row: inputs drop the last id.
inline std::vector<int> decoder_inputs(const std::vector<int>& response) {
  return {response.begin(), response.end() - 1};
}

// Softmax cross-entropy of score rows against target ids.
inline Var scores_loss(Var scores, const std::vector<int>& targets) {
  return nn::nll_mean(nn::log_softmax_rows(scores), targets, std::vector<double>(targets.size(), 1.0));
}

// R-GCN stack over the entity KG, shared by the graph recommender and KBRD.
class EntityEncoder {
 public:
  EntityEncoder() = default;
  EntityEncoder(ParameterSet& ps, const std::string& name, const ModelConfig& c, const ModelContext& ctx,
                std::mt19937_64& rng)
      : graph_(ctx.entity_graph), item_entity_(ctx.item_entity), dim_(c.hidden_dim) {
    if (ctx.entity_graph.nodes() < 1) throw ModelError(c.name + " needs a nonempty entity graph");
    if (static_cast<int>(ctx.item_entity.size()) != c.catalog_size)
      throw ModelError(c.name + ": item2entity covers " + std::to_string(ctx.item_entity.size()) + " items, catalog has " +
                       std::to_string(c.catalog_size));
    entities_ = Embedding(ps, name + ".entity", ctx.entity_graph.nodes(), dim_, rng);
    fallback_ = Embedding(ps, name + ".item_fallback", std::max(1, c.catalog_size), dim_, rng);
    for (int l = 0; l < c.layers; ++l) {
      const std::string ln = name + ".layer" + std::to_string(l);
      std::vector<const Parameter*> ws;
      for (int r = 0; r < ctx.entity_graph.relations(); ++r)
        ws.push_back(&ps.add(ln + ".rel" + std::to_string(r), nn::init_linear(dim_, dim_, dim_, rng)));
      rel_.push_back(ws);
      self_.push_back(&ps.add(ln + ".self", nn::init_linear(dim_, dim_, dim_, rng)));
    }
  }

  int dim() const { return dim_; }
  const std::vector<int>& item_entity() const { return item_entity_; }

  // Entity node states after the R-GCN stack (relu between layers).
  Var node_states(Tape& t) const {
    Var h = entities_.all(t);
    for (std::size_t l = 0; l < self_.size(); ++l) {
      std::vector<Var> ws;
      for (const auto* w : rel_[l]) ws.push_back(t.param(*w));
      const auto act = l + 1 < self_.size() ? nn::Activation::Relu : nn::Activation::Identity;
      h = nn::rgcn_layer(h, ws, t.param(*self_[l]), graph_, act);
    }
    return h;
  }

  // Masked mean of the given entities' states; zero vector when empty.
  Var user_rep(Tape& t, Var states, const std::vector<int>& entities) const {
    if (entities.empty()) return t.constant(Matrix::Zero(1, dim_));
    return nn::mean_rows(nn::gather_rows(states, entities));
  }

  // catalog x d: entity state for mapped items, learned fallback otherwise.
  Var item_states(Tape& t, Var states) const {
    std::vector<int> idx(item_entity_.size());
    const int n = static_cast<int>(states.rows());
    for (std::size_t i = 0; i < item_entity_.size(); ++i)
      idx[i] = item_entity_[i] >= 0 ? item_entity_[i] : n + static_cast<int>(i);
    return nn::gather_rows(nn::concat_rows({states, fallback_.all(t)}), idx);
  }

 private:
  nn::RelationalGraph graph_;
  std::vector<int> item_entity_;
  int dim_ = 0;
  Embedding entities_, fallback_;
  std::vector<std::vector<const Parameter*>> rel_;
  std::vector<const Parameter*> self_;
};

}  // namespace crskit::models
