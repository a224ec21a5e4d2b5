#pragma once

#include <memory>
#include <vector>

#include "crskit/models/model.hpp"

namespace crskit::models {

inline Eigen::VectorXd log_softmax_vector(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

// Adds a fixed logit offset to every step of another source.
class BiasedSource : public DecodeSource {
 public:
  BiasedSource(std::unique_ptr<DecodeSource> base, Eigen::VectorXd bias) : base_(std::move(base)), bias_(std::move(bias)) {}

  Eigen::VectorXd log_probs(const std::vector<int>& prefix) const override {
    Eigen::VectorXd lp = base_->log_probs(prefix);
    if (lp.size() != bias_.size()) throw ModelError("vocabulary bias size does not match the decoder vocabulary");
    return log_softmax_vector(lp + bias_);
  }

  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  std::unique_ptr<DecodeSource> base_;
  Eigen::VectorXd bias_;
};

// user_rep (1 x d) times projection (d x V).
inline Var vocab_bias(Var user_rep, Var projection) {
  if (user_rep.rows() != 1 || user_rep.cols() != projection.rows())
    throw ModelError("vocabulary bias: user representation has " + std::to_string(user_rep.cols()) +
                     " dims, projection expects " + std::to_string(projection.rows()));
  return nn::matmul(user_rep, projection);
}

inline std::vector<int> with_start(const std::vector<int>& prefix) {
  std::vector<int> ids{corpus::kStartId};
  ids.insert(ids.end(), prefix.begin(), prefix.end());
  return ids;
}

// Encoder-decoder transformer shared by the plain generator and KBRD.
struct TransformerCore {
  Embedding tokens, positions;
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  Linear out;
  double dropout = 0.0;

  TransformerCore() = default;
  TransformerCore(ParameterSet& ps, const std::string& name, const ModelConfig& c, std::mt19937_64& rng)
      : dropout(c.dropout) {
    const int d = c.hidden_dim;
    tokens = Embedding(ps, name + ".tokens", c.vocab_size, d, rng);
    positions = Embedding(ps, name + ".positions", c.max_positions, d, rng);
    for (int l = 0; l < c.layers; ++l) {
      encoder.emplace_back(ps, name + ".enc" + std::to_string(l), d, c.heads, 2 * d, c.dropout, rng);
      decoder.emplace_back(ps, name + ".dec" + std::to_string(l), d, c.heads, 2 * d, c.dropout, rng);
    }
    out = Linear(ps, name + ".out", d, c.vocab_size, rng);
  }

  // Memory for the decoder; keeps the most recent max_positions ids and
  // reads an empty context as a lone separator.
  Var encode(Tape& t, std::vector<int> ids) const {
    if (ids.empty()) ids.push_back(batching::kSeparatorId);
    if (static_cast<int>(ids.size()) > positions.rows()) ids.erase(ids.begin(), ids.end() - positions.rows());
    Var x = nn::dropout(embed_with_positions(t, tokens, positions, ids), dropout);
    for (const auto& layer : encoder) x = layer(t, x, nullptr);
    return x;
  }

  // Logits (T x V) for each decoder input position.
  Var logits(Tape& t, Var memory, const std::vector<int>& inputs) const {
    Var x = nn::dropout(embed_with_positions(t, tokens, positions, inputs), dropout);
    const Matrix mask = causal_mask(static_cast<Eigen::Index>(inputs.size()));
    for (const auto& layer : decoder) x = layer(t, x, memory, mask);
    return out(t, x);
  }
};

class TransformerSource : public DecodeSource {
 public:
  TransformerSource(const TransformerCore& core, Matrix memory) : core_(core), memory_(std::move(memory)) {}

  Eigen::VectorXd log_probs(const std::vector<int>& prefix) const override {
    Tape t(false);
    const Matrix lg = core_.logits(t, t.constant(memory_), with_start(prefix)).value();
    return log_softmax_vector(lg.row(lg.rows() - 1).transpose());
  }

 private:
  const TransformerCore& core_;
  Matrix memory_;
};

class Transformer : public ConvModel {
 public:
  Transformer(const ModelConfig& c, const ModelContext&, const std::string& prefix) : ConvModel(c, prefix) {
    c.validate(true);
    if (c.vocab_size < 1) throw ModelError("transformer: empty vocabulary");
    core_ = TransformerCore(params_, pname("transformer"), c, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Conv}; }

  std::vector<Var> response_log_probs(Tape& t, const TaskBatch& b, const std::vector<int>& rows) const override {
    std::vector<Var> out;
    for (int i : rows) {
      Var memory = core_.encode(t, row_of(b, "context_tokens", i));
      out.push_back(nn::log_softmax_rows(core_.logits(t, memory, decoder_inputs(row_of(b, "response", i)))));
    }
    return out;
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Conv);
    return conv_loss(t, b);
  }

  std::unique_ptr<DecodeSource> decoder(const ConvQuery& q) const override {
    Tape t(false);
    return std::make_unique<TransformerSource>(core_, core_.encode(t, q.context_token_ids).value());
  }

 private:
  TransformerCore core_;
};

// Hierarchical encoder-decoder: utterance GRU, dialog GRU over utterance
// states, GRU decoder started from the dialog state.
class Hred : public ConvModel {
 public:
  Hred(const ModelConfig& c, const ModelContext&, const std::string& prefix) : ConvModel(c, prefix) {
    c.validate(false);
    if (c.vocab_size < 1) throw ModelError("hred: empty vocabulary");
    const int e = c.embedding_dim, h = c.hidden_dim;
    tokens_ = Embedding(params_, pname("hred.tokens"), c.vocab_size, e, init_rng());
    utterance_ = Gru(params_, pname("hred.utterance"), e, h, init_rng());
    dialog_ = Gru(params_, pname("hred.dialog"), h, h, init_rng());
    bridge_ = Linear(params_, pname("hred.bridge"), h, h, init_rng());
    decoder_ = Gru(params_, pname("hred.decoder"), e, h, init_rng());
    out_ = Linear(params_, pname("hred.out"), h, c.vocab_size, init_rng());
  }

  std::vector<Task> tasks() const override { return {Task::Conv}; }

  // Separator-delimited utterances; an empty context reads as one separator.
  static std::vector<std::vector<int>> split_utterances(const std::vector<int>& ids) {
    std::vector<std::vector<int>> out(1);
    for (int id : ids) {
      if (id == batching::kSeparatorId) {
        if (!out.back().empty()) out.emplace_back();
      } else {
        out.back().push_back(id);
      }
    }
    if (out.back().empty()) out.pop_back();
    if (out.empty()) out.push_back({batching::kSeparatorId});
    return out;
  }

  // Dialog state (1 x h) after reading every utterance.
  Var encode(Tape& t, const std::vector<int>& context) const {
    const Var h0 = t.constant(Matrix::Zero(1, config_.hidden_dim));
    std::vector<Var> states;
    for (const auto& u : split_utterances(context)) states.push_back(utterance_.last(t, tokens_(t, u), h0));
    return dialog_.last(t, nn::concat_rows(states), h0);
  }

  Var initial_state(Tape& t, const std::vector<int>& context) const {
    return nn::tanh(bridge_(t, nn::dropout(encode(t, context), config_.dropout)));
  }

  Var logits(Tape& t, Var h0, const std::vector<int>& inputs) const {
    return out_(t, nn::concat_rows(decoder_.run(t, tokens_(t, inputs), h0)));
  }

  std::vector<Var> response_log_probs(Tape& t, const TaskBatch& b, const std::vector<int>& rows) const override {
    std::vector<Var> out;
    for (int i : rows) {
      Var h0 = initial_state(t, row_of(b, "context_tokens", i));
      out.push_back(nn::log_softmax_rows(logits(t, h0, decoder_inputs(row_of(b, "response", i)))));
    }
    return out;
  }

  Var loss(Tape& t, const TaskBatch& b) const override {
    check_task(b, Task::Conv);
    return conv_loss(t, b);
  }

  std::unique_ptr<DecodeSource> decoder(const ConvQuery& q) const override;

 private:
  Embedding tokens_;
  Gru utterance_, dialog_;
  Linear bridge_;
  Gru decoder_;
  Linear out_;
};

class HredSource : public DecodeSource {
 public:
  HredSource(const Hred& model, Matrix h0) : model_(model), h0_(std::move(h0)) {}

  Eigen::VectorXd log_probs(const std::vector<int>& prefix) const override {
    Tape t(false);
    const Matrix lg = model_.logits(t, t.constant(h0_), with_start(prefix)).value();
    return log_softmax_vector(lg.row(lg.rows() - 1).transpose());
  }

 private:
  const Hred& model_;
  Matrix h0_;
};

inline std::unique_ptr<DecodeSource> Hred::decoder(const ConvQuery& q) const {
  Tape t(false);
  return std::make_unique<HredSource>(*this, initial_state(t, q.context_token_ids).value());
}

}  // namespace crskit::models
