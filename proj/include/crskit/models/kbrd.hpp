#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include "crskit/models/generators.hpp"

namespace crskit::models {

// R-GCN recommender plus a transformer decoder whose logits get a
// vocabulary bias projected from the user's entity representation.
class Kbrd : public ConvModel {
 public:
  Kbrd(const ModelConfig& c, const ModelContext& ctx, const std::string& prefix) : ConvModel(c, prefix) {
    c.validate(true);
    if (c.vocab_size < 1) throw ModelError("kbrd: empty vocabulary");
    encoder_ = EntityEncoder(params_, pname("kbrd.rgcn"), c, ctx, init_rng());
    core_ = TransformerCore(params_, pname("kbrd.transformer"), c, init_rng());
    projection_ = &params_.add(pname("kbrd.bias_projection"), nn::init_linear(c.hidden_dim, c.vocab_size, c.hidden_dim, init_rng()));
  }

  std::vector<Task> tasks() const override { return {Task::Rec, Task::Conv}; }

  // Context entities plus the entities of the items the response carries.
  std::vector<int> conv_entities(std::vector<int> context_entities, const std::vector<int>& items) const {
    for (int item : items) {
      if (item < 0 || item >= static_cast<int>(encoder_.item_entity().size())) throw ModelError("kbrd: item outside catalog");
      const int e = encoder_.item_entity()[static_cast<std::size_t>(item)];
      if (e >= 0 && std::find(context_entities.begin(), context_entities.end(), e) == context_entities.end())
        context_entities.push_back(e);
    }
    return context_entities;
  }

  Var rec_scores_var(Tape& t, const TaskBatch& b) const {
    Var states = encoder_.node_states(t);
    Var items = encoder_.item_states(t, states);
    std::vector<Var> users;
    for (int i = 0; i < b.size(); ++i) users.push_back(encoder_.user_rep(t, states, row_of(b, "context_entities", i)));
    return nn::matmul_nt(nn::concat_rows(users), items);
  }

  std::vector<Var> response_log_probs(Tape& t, const TaskBatch& b, const std::vector<int>& rows) const override {
    Var states = encoder_.node_states(t);
    Var proj = t.param(*projection_);
    std::vector<Var> out;
    for (int i : rows) {
      Var user = encoder_.user_rep(t, states, conv_entities(row_of(b, "context_entities", i), row_of(b, "response_items", i)));
      Var memory = core_.encode(t, row_of(b, "context_tokens", i));
      Var lg = core_.logits(t, memory, decoder_inputs(row_of(b, "response", i)));
      out.push_back(nn::log_softmax_rows(nn::add_rowvec(lg, vocab_bias(user, proj))));
    }
    return out;
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    if (b.task == Task::Rec) return scores_loss(rec_scores_var(t, b), b.targets);
    check_task(b, Task::Conv);
    return conv_loss(t, b);
  }

  Matrix rec_scores(const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    Tape t(false);
    return rec_scores_var(t, b).value();
  }

  // Bias (V) for a response carrying `items` after the given context.
  Eigen::VectorXd bias_for(const std::vector<int>& context_entities, const std::vector<int>& items) const {
    Tape t(false);
    Var user = encoder_.user_rep(t, encoder_.node_states(t), conv_entities(context_entities, items));
    return vocab_bias(user, t.param(*projection_)).value().row(0).transpose();
  }

  std::unique_ptr<DecodeSource> decoder(const ConvQuery& q) const override {
    Tape t(false);
    auto base = std::make_unique<TransformerSource>(core_, core_.encode(t, q.context_token_ids).value());
    return std::make_unique<BiasedSource>(std::move(base), bias_for(q.context_entity_ids, q.response_item_ids));
  }

  const EntityEncoder& encoder() const { return encoder_; }

 private:
  EntityEncoder encoder_;
  TransformerCore core_;
  const Parameter* projection_ = nullptr;
};

}  // namespace crskit::models
