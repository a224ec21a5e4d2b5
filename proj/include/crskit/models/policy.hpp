#pragma once

#include <cmath>
#include <vector>

#include "crskit/models/model.hpp"

namespace crskit::models {

// Adjacent-label pointwise mutual information. C(a,b) counts a directly
// followed by b; C(a) counts every occurrence of a.
class Pmi : public Model {
 public:
  Pmi(const ModelConfig& c, const ModelContext&, const std::string& prefix) : Model(c, prefix) {
    if (c.label_count < 1) throw ModelError("pmi: empty label set");
    params_.add(pname("pmi.table"), nn::zeros(c.label_count, c.label_count));
  }

  std::vector<Task> tasks() const override { return {Task::Policy}; }
  bool trainable() const override { return false; }

  void fit_statistics(const FitData& data) override {
    if (data.label_sequences.empty()) throw ModelError("pmi: no labeled sequences");
    const int l = config_.label_count;
    Matrix pair = Matrix::Zero(l, l);
    Eigen::VectorXd single = Eigen::VectorXd::Zero(l);
    double pairs = 0.0;
    for (const auto& seq : data.label_sequences) {
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] < 0 || seq[i] >= l) throw ModelError("pmi: label outside the label set");
        single(seq[i]) += 1.0;
        if (i + 1 < seq.size()) {
          pair(seq[i], seq[i + 1]) += 1.0;
          pairs += 1.0;
        }
      }
    }
    const double n = pairs + 1.0;
    Matrix& table = params_.at(pname("pmi.table")).value;
    for (int a = 0; a < l; ++a)
      for (int b = 0; b < l; ++b) table(a, b) = std::log((pair(a, b) + 1.0) * n / ((single(a) + 1.0) * (single(b) + 1.0)));
  }

  const Matrix& table() const { return params_.at(pname("pmi.table")).value; }

  // Softmax over candidate scores, in candidate order.
  Eigen::VectorXd predict(const std::vector<int>& context, const std::vector<int>& candidates) const {
    if (candidates.empty()) throw ModelError("pmi: empty candidate set");
    const Matrix& t = table();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t k = 0; k < candidates.size(); ++k)
      for (int a : context) s(static_cast<Eigen::Index>(k)) += t(a, candidates[k]);
    const double m = s.maxCoeff();
    Eigen::VectorXd e = (s.array() - m).exp();
    return e / e.sum();
  }

  Matrix policy_probs(const TaskBatch& b) const override {
    check_task(b, Task::Policy);
    std::vector<int> all(static_cast<std::size_t>(config_.label_count));
    for (int i = 0; i < config_.label_count; ++i) all[static_cast<std::size_t>(i)] = i;
    Matrix out(b.size(), config_.label_count);
    for (int i = 0; i < b.size(); ++i) out.row(i) = predict(row_of(b, "context_labels", i), all).transpose();
    return out;
  }
};

// Context GRU and profile GRU over tokens plus the previous label, then a
// two-layer classifier over the label set.
class Mgcg : public Model {
 public:
  Mgcg(const ModelConfig& c, const ModelContext&, const std::string& prefix) : Model(c, prefix) {
    c.validate(false);
    if (c.vocab_size < 1 || c.label_count < 1) throw ModelError("mgcg: empty vocabulary or label set");
    const int e = c.embedding_dim, h = c.hidden_dim;
    tokens_ = Embedding(params_, pname("mgcg.tokens"), c.vocab_size, e, init_rng());
    labels_ = Embedding(params_, pname("mgcg.labels"), c.label_count + 1, e, init_rng());
    context_ = Gru(params_, pname("mgcg.context"), e, h, init_rng());
    profile_ = Gru(params_, pname("mgcg.profile"), e, h, init_rng());
    hidden_ = Linear(params_, pname("mgcg.hidden"), 2 * h + e, h, init_rng());
    out_ = Linear(params_, pname("mgcg.out"), h, c.label_count, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Policy}; }

  Var logits(Tape& t, const TaskBatch& b) const {
    const Var h0 = t.constant(Matrix::Zero(1, config_.hidden_dim));
    std::vector<Var> rows;
    for (int i = 0; i < b.size(); ++i) {
      const auto labels = row_of(b, "context_labels", i);
      const int last = labels.empty() ? config_.label_count : labels.back();
      rows.push_back(nn::concat_cols({encode(t, context_, row_of(b, "context_tokens", i), h0),
                                      encode(t, profile_, row_of(b, "profile_tokens", i), h0), labels_(t, {last})}));
    }
    Var x = nn::dropout(nn::relu(hidden_(t, nn::concat_rows(rows))), config_.dropout);
    return out_(t, x);
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Policy);
    return scores_loss(logits(t, b), b.targets);
  }

  Matrix policy_probs(const TaskBatch& b) const override {
    check_task(b, Task::Policy);
    Tape t(false);
    return nn::detail::softmax_rows(logits(t, b).value());
  }

 private:
  Var encode(Tape& t, const Gru& g, const std::vector<int>& ids, Var h0) const {
    return ids.empty() ? h0 : g.last(t, tokens_(t, ids), h0);
  }

  Embedding tokens_, labels_;
  Gru context_, profile_;
  Linear hidden_, out_;
};

}  // namespace crskit::models
