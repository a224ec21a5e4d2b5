#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "crskit/nn/init.hpp"
#include "crskit/nn/ops.hpp"

namespace crskit::models {

using nn::Matrix;
using nn::Parameter;
using nn::ParameterSet;
using nn::Tape;
using nn::Var;

// x W + b with W stored in x out.
struct Linear {
  const Parameter* w = nullptr;
  const Parameter* b = nullptr;

  Linear() = default;
  Linear(ParameterSet& ps, const std::string& name, int in, int out, std::mt19937_64& rng, bool bias = true) {
    w = &ps.add(name + ".w", nn::init_linear(in, out, in, rng));
    if (bias) b = &ps.add(name + ".b", nn::zeros(1, out));
  }

  Var operator()(Tape& t, Var x) const {
    Var y = nn::matmul(x, t.param(*w));
    return b ? nn::add_rowvec(y, t.param(*b)) : y;
  }
};

struct Embedding {
  const Parameter* table = nullptr;

  Embedding() = default;
  Embedding(ParameterSet& ps, const std::string& name, int rows, int dim, std::mt19937_64& rng) {
    table = &ps.add(name, nn::init_embedding(rows, dim, rng));
  }

  Var operator()(Tape& t, const std::vector<int>& ids) const { return nn::gather_rows(t.param(*table), ids); }
  Var all(Tape& t) const { return t.param(*table); }
  int rows() const { return static_cast<int>(table->value.rows()); }
};

struct LayerNorm {
  const Parameter* gain = nullptr;
  const Parameter* bias = nullptr;

  LayerNorm() = default;
  LayerNorm(ParameterSet& ps, const std::string& name, int dim) {
    gain = &ps.add(name + ".gain", nn::ones(1, dim));
    bias = &ps.add(name + ".bias", nn::zeros(1, dim));
  }

  Var operator()(Tape& t, Var x) const { return nn::layer_norm(x, t.param(*gain), t.param(*bias)); }
};

// Gated recurrent unit over one sequence at a time (rows = time steps).
struct Gru {
  Linear input;   // in -> 3h (update, reset, candidate)
  Linear hidden;  // h -> 3h
  int dim = 0;

  Gru() = default;
  Gru(ParameterSet& ps, const std::string& name, int in, int h, std::mt19937_64& rng)
      : input(ps, name + ".input", in, 3 * h, rng), hidden(ps, name + ".hidden", h, 3 * h, rng), dim(h) {}

  Var step(Tape& t, Var x, Var h) const {
    Var gx = input(t, x);
    Var gh = hidden(t, h);
    Var z = nn::sigmoid(nn::add(nn::slice_cols(gx, 0, dim), nn::slice_cols(gh, 0, dim)));
    Var r = nn::sigmoid(nn::add(nn::slice_cols(gx, dim, dim), nn::slice_cols(gh, dim, dim)));
    Var n = nn::tanh(nn::add(nn::slice_cols(gx, 2 * dim, dim), nn::mul(r, nn::slice_cols(gh, 2 * dim, dim))));
    // (1 - z) * n + z * h
    return nn::add(nn::sub(n, nn::mul(z, n)), nn::mul(z, h));
  }

  // All hidden states for inputs xs (T x in), starting from h0 (1 x h).
  std::vector<Var> run(Tape& t, Var xs, Var h0) const {
    std::vector<Var> states;
    Var h = h0;
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      h = step(t, nn::slice_rows(xs, i, 1), h);
      states.push_back(h);
    }
    return states;
  }

  Var last(Tape& t, Var xs, Var h0) const {
    auto s = run(t, xs, h0);
    return s.empty() ? h0 : s.back();
  }
};

// Additive mask (Lq x Lk): 0 where attention is allowed, -1e9 elsewhere.
inline Matrix causal_mask(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = -1e9;
  return m;
}

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  int dim = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterSet& ps, const std::string& name, int d, int h, std::mt19937_64& rng)
      : q(ps, name + ".q", d, d, rng), k(ps, name + ".k", d, d, rng), v(ps, name + ".v", d, d, rng),
        o(ps, name + ".o", d, d, rng), heads(h), dim(d) {
    if (h < 1 || d % h != 0) throw ModelError("head count must divide the hidden dimension");
  }

  // query (Lq x d) attends over memory (Lk x d); mask is additive or empty.
  Var operator()(Tape& t, Var query, Var memory, const Matrix* mask) const {
    Var qs = q(t, query), ks = k(t, memory), vs = v(t, memory);
    const int hd = dim / heads;
    const double s = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> outs;
    for (int h = 0; h < heads; ++h) {
      Var scores = nn::scale(nn::matmul_nt(nn::slice_cols(qs, h * hd, hd), nn::slice_cols(ks, h * hd, hd)), s);
      if (mask) scores = nn::add_const(scores, *mask);
      outs.push_back(nn::matmul(nn::softmax_rows(scores), nn::slice_cols(vs, h * hd, hd)));
    }
    return o(t, heads == 1 ? outs.front() : nn::concat_cols(outs));
  }
};

struct FeedForward {
  Linear in, out;

  FeedForward() = default;
  FeedForward(ParameterSet& ps, const std::string& name, int d, int hidden, std::mt19937_64& rng)
      : in(ps, name + ".in", d, hidden, rng), out(ps, name + ".out", hidden, d, rng) {}

  Var operator()(Tape& t, Var x) const { return out(t, nn::relu(in(t, x))); }
};

// Post-norm encoder block.
struct EncoderLayer {
  MultiHeadAttention attn;
  FeedForward ff;
  LayerNorm norm1, norm2;
  double dropout = 0.0;

  EncoderLayer() = default;
  EncoderLayer(ParameterSet& ps, const std::string& name, int d, int heads, int ff_dim, double p, std::mt19937_64& rng)
      : attn(ps, name + ".attn", d, heads, rng), ff(ps, name + ".ff", d, ff_dim, rng), norm1(ps, name + ".norm1", d),
        norm2(ps, name + ".norm2", d), dropout(p) {}

  Var operator()(Tape& t, Var x, const Matrix* mask) const {
    x = norm1(t, nn::add(x, nn::dropout(attn(t, x, x, mask), dropout)));
    return norm2(t, nn::add(x, nn::dropout(ff(t, x), dropout)));
  }
};

struct DecoderLayer {
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ff;
  LayerNorm norm1, norm2, norm3;
  double dropout = 0.0;

  DecoderLayer() = default;
  DecoderLayer(ParameterSet& ps, const std::string& name, int d, int heads, int ff_dim, double p, std::mt19937_64& rng)
      : self_attn(ps, name + ".self", d, heads, rng), cross_attn(ps, name + ".cross", d, heads, rng),
        ff(ps, name + ".ff", d, ff_dim, rng), norm1(ps, name + ".norm1", d), norm2(ps, name + ".norm2", d),
        norm3(ps, name + ".norm3", d), dropout(p) {}

  Var operator()(Tape& t, Var x, Var memory, const Matrix& causal) const {
    x = norm1(t, nn::add(x, nn::dropout(self_attn(t, x, x, &causal), dropout)));
    x = norm2(t, nn::add(x, nn::dropout(cross_attn(t, x, memory, nullptr), dropout)));
    return norm3(t, nn::add(x, nn::dropout(ff(t, x), dropout)));
  }
};

// Token embeddings plus learned positions 0..n-1.
inline Var embed_with_positions(Tape& t, const Embedding& tokens, const Embedding& positions, const std::vector<int>& ids) {
  if (static_cast<int>(ids.size()) > positions.rows())
    throw ModelError("sequence of " + std::to_string(ids.size()) + " exceeds max_positions " + std::to_string(positions.rows()));
  std::vector<int> pos(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
  return nn::add(tokens(t, ids), positions(t, pos));
}

}  // namespace crskit::models
