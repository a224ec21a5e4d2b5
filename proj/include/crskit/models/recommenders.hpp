#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "crskit/models/model.hpp"

namespace crskit::models {

// Item ids ordered by score (descending), equal scores by ascending id.
inline std::vector<int> rank_by_score(const Eigen::Ref<const Eigen::RowVectorXd>& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scores(a) != scores(b) ? scores(a) > scores(b) : a < b;
  });
  return order;
}

// Training-set target frequency; the context is ignored.
class Popularity : public Model {
 public:
  Popularity(const ModelConfig& c, const ModelContext&, const std::string& prefix) : Model(c, prefix) {
    if (c.catalog_size < 1) throw ModelError("popularity: empty catalog");
    counts_ = &params_.add(pname("popularity.counts"), nn::zeros(1, c.catalog_size));
  }

  std::vector<Task> tasks() const override { return {Task::Rec}; }
  bool trainable() const override { return false; }

  void fit_statistics(const FitData& data) override {
    Matrix& m = params_.at(pname("popularity.counts")).value;
    m.setZero();
    for (const auto& r : data.rec) {
      if (r.target_item < 0 || r.target_item >= m.cols()) throw ModelError("popularity: target outside catalog");
      m(0, r.target_item) += 1.0;
    }
  }

  Matrix rec_scores(const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    return counts_->value.replicate(b.size(), 1);
  }

 private:
  const Parameter* counts_ = nullptr;
};

// Inner product of the pooled context-entity state with item entity states.
class RgcnRecommender : public Model {
 public:
  RgcnRecommender(const ModelConfig& c, const ModelContext& ctx, const std::string& prefix) : Model(c, prefix) {
    c.validate(false);
    encoder_ = EntityEncoder(params_, pname("rgcn"), c, ctx, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Rec}; }

  Var scores(Tape& t, const TaskBatch& b) const {
    Var states = encoder_.node_states(t);
    Var items = encoder_.item_states(t, states);
    std::vector<Var> users;
    for (int i = 0; i < b.size(); ++i) users.push_back(encoder_.user_rep(t, states, row_of(b, "context_entities", i)));
    return nn::matmul_nt(nn::concat_rows(users), items);
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    return scores_loss(scores(t, b), b.targets);
  }

  Matrix rec_scores(const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    Tape t(false);
    return scores(t, b).value();
  }

  const EntityEncoder& encoder() const { return encoder_; }

 private:
  EntityEncoder encoder_;
};

// Sequence of items a sequential recommender reads for one batch row.
inline std::vector<int> item_sequence(const TaskBatch& b, int i, bool use_profile) {
  std::vector<int> seq;
  if (use_profile) seq = row_of(b, "profile_items", i);
  const auto ctx = row_of(b, "context_items", i);
  seq.insert(seq.end(), ctx.begin(), ctx.end());
  return seq;
}

class Gru4Rec : public Model {
 public:
  Gru4Rec(const ModelConfig& c, const ModelContext& ctx, const std::string& prefix)
      : Model(c, prefix), use_profile_(ctx.use_profile_history) {
    c.validate(false);
    if (c.catalog_size < 1) throw ModelError("gru4rec: empty catalog");
    items_ = Embedding(params_, pname("gru4rec.items"), c.catalog_size, c.embedding_dim, init_rng());
    gru_ = Gru(params_, pname("gru4rec.gru"), c.embedding_dim, c.hidden_dim, init_rng());
    h0_ = &params_.add(pname("gru4rec.h0"), nn::init_embedding(1, c.hidden_dim, init_rng()));
    out_ = Linear(params_, pname("gru4rec.out"), c.hidden_dim, c.embedding_dim, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Rec}; }

  // Scores after reading `seq` (the learned initial state when empty).
  Var sequence_scores(Tape& t, const std::vector<int>& seq) const {
    Var h = seq.empty() ? t.param(*h0_) : gru_.last(t, items_(t, seq), t.param(*h0_));
    return nn::matmul_nt(out_(t, nn::dropout(h, config_.dropout)), items_.all(t));
  }

  Var scores(Tape& t, const TaskBatch& b) const {
    std::vector<Var> rows;
    for (int i = 0; i < b.size(); ++i) rows.push_back(sequence_scores(t, item_sequence(b, i, use_profile_)));
    return nn::concat_rows(rows);
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    return scores_loss(scores(t, b), b.targets);
  }

  Matrix rec_scores(const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    Tape t(false);
    return scores(t, b).value();
  }

 private:
  bool use_profile_;
  Embedding items_;
  Gru gru_;
  const Parameter* h0_ = nullptr;
  Linear out_;
};

// Causal self-attention over the item sequence.
class SasRec : public Model {
 public:
  SasRec(const ModelConfig& c, const ModelContext& ctx, const std::string& prefix)
      : Model(c, prefix), use_profile_(ctx.use_profile_history) {
    c.validate(true);
    if (c.catalog_size < 1) throw ModelError("sasrec: empty catalog");
    const int d = c.hidden_dim;
    items_ = Embedding(params_, pname("sasrec.items"), c.catalog_size, d, init_rng());
    positions_ = Embedding(params_, pname("sasrec.positions"), c.max_positions, d, init_rng());
    initial_ = &params_.add(pname("sasrec.initial"), nn::init_embedding(1, d, init_rng()));
    for (int l = 0; l < c.layers; ++l)
      layers_.emplace_back(params_, pname("sasrec.layer" + std::to_string(l)), d, c.heads, 2 * d, c.dropout, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Rec}; }

  // Scores at every position of `seq` (rows = positions).
  Var position_scores(Tape& t, std::vector<int> seq) const {
    if (static_cast<int>(seq.size()) > config_.max_positions)
      seq.erase(seq.begin(), seq.end() - config_.max_positions);
    if (seq.empty()) return nn::matmul_nt(t.param(*initial_), items_.all(t));
    Var x = nn::dropout(embed_with_positions(t, items_, positions_, seq), config_.dropout);
    const Matrix mask = causal_mask(static_cast<Eigen::Index>(seq.size()));
    for (const auto& layer : layers_) x = layer(t, x, &mask);
    return nn::matmul_nt(x, items_.all(t));
  }

  Var scores(Tape& t, const TaskBatch& b) const {
    std::vector<Var> rows;
    for (int i = 0; i < b.size(); ++i) {
      Var all = position_scores(t, item_sequence(b, i, use_profile_));
      rows.push_back(nn::slice_rows(all, all.rows() - 1, 1));
    }
    return nn::concat_rows(rows);
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    return scores_loss(scores(t, b), b.targets);
  }

  Matrix rec_scores(const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    Tape t(false);
    return scores(t, b).value();
  }

 private:
  bool use_profile_;
  Embedding items_, positions_;
  const Parameter* initial_ = nullptr;
  std::vector<EncoderLayer> layers_;
};

// Convolutions of widths 3, 4 and 5 over the context tokens, max-over-time
// pooling, then a linear layer onto the catalog.
class TextCnn : public Model {
 public:
  static constexpr int kWidths[3] = {3, 4, 5};

  TextCnn(const ModelConfig& c, const ModelContext&, const std::string& prefix) : Model(c, prefix) {
    c.validate(false);
    if (c.vocab_size < 1 || c.catalog_size < 1) throw ModelError("textcnn: empty vocabulary or catalog");
    tokens_ = Embedding(params_, pname("textcnn.tokens"), c.vocab_size, c.embedding_dim, init_rng());
    for (int w : kWidths)
      convs_.emplace_back(params_, pname("textcnn.conv" + std::to_string(w)), w * c.embedding_dim, c.filters, init_rng());
    out_ = Linear(params_, pname("textcnn.out"), 3 * c.filters, c.catalog_size, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Rec}; }

  Var features(Tape& t, std::vector<int> ids) const {
    if (ids.size() < 5) ids.resize(5, corpus::kPadId);
    Var x = tokens_(t, ids);
    const auto n = x.rows();
    std::vector<Var> pooled;
    for (std::size_t k = 0; k < convs_.size(); ++k) {
      const int w = kWidths[k];
      std::vector<Var> shifted;
      for (int s = 0; s < w; ++s) shifted.push_back(nn::slice_rows(x, s, n - w + 1));
      pooled.push_back(nn::max_rows(nn::relu(convs_[k](t, nn::concat_cols(shifted)))));
    }
    return nn::dropout(nn::concat_cols(pooled), config_.dropout);
  }

  Var scores(Tape& t, const TaskBatch& b) const {
    std::vector<Var> rows;
    for (int i = 0; i < b.size(); ++i) rows.push_back(features(t, row_of(b, "context_tokens", i)));
    return out_(t, nn::concat_rows(rows));
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    return scores_loss(scores(t, b), b.targets);
  }

  Matrix rec_scores(const TaskBatch& b) const override {
    check_task(b, Task::Rec);
    Tape t(false);
    return scores(t, b).value();
  }

  const Linear& output_layer() const { return out_; }

 private:
  Embedding tokens_;
  std::vector<Linear> convs_;
  Linear out_;
};

}  // namespace crskit::models
