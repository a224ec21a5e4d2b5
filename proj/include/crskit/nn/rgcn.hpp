#pragma once

#include <algorithm>
#include <set>
#include <tuple>
#include <vector>

#include "crskit/nn/ops.hpp"

namespace crskit::nn {

struct Edge {
  int head = 0;  // message source j
  int relation = 0;
  int tail = 0;  // receiving node i
};

// In-neighbour lists per (node, relation); duplicate triples collapse.
class RelationalGraph {
 public:
  RelationalGraph() = default;
  RelationalGraph(int nodes, int relations, const std::vector<Edge>& edges) : nodes_(nodes), relations_(relations) {
    if (nodes < 0 || relations < 0) throw ModelError("graph sizes must be nonnegative");
    in_.assign(static_cast<std::size_t>(nodes), std::vector<std::vector<int>>(static_cast<std::size_t>(relations)));
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& e : edges) {
      if (e.head < 0 || e.head >= nodes || e.tail < 0 || e.tail >= nodes || e.relation < 0 || e.relation >= relations)
        throw ModelError("graph edge references an unknown node or relation");
      if (!seen.emplace(e.head, e.relation, e.tail).second) continue;
      in_[static_cast<std::size_t>(e.tail)][static_cast<std::size_t>(e.relation)].push_back(e.head);
    }
  }

  int nodes() const { return nodes_; }
  int relations() const { return relations_; }
  const std::vector<int>& in(int node, int relation) const {
    return in_[static_cast<std::size_t>(node)][static_cast<std::size_t>(relation)];
  }

 private:
  int nodes_ = 0;
  int relations_ = 0;
  std::vector<std::vector<std::vector<int>>> in_;
};

enum class Activation { Identity, Relu };

namespace detail {

// y = W x with a fixed summation order.
inline void apply_rows(const Matrix& w, const double* x, double* y) {
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    double s = 0.0;
    for (Eigen::Index l = 0; l < w.cols(); ++l) s += w(k, l) * x[l];
    y[k] += s;
  }
}

// Mean of the given rows of h, summed in lexicographic order of the rows so
// the result does not depend on node numbering.
inline std::vector<double> ordered_mean(const Matrix& h, const std::vector<int>& rows) {
  std::vector<const double*> ptrs;
  for (int j : rows) ptrs.push_back(h.data() + static_cast<Eigen::Index>(j) * h.cols());
  const auto d = static_cast<std::size_t>(h.cols());
  std::sort(ptrs.begin(), ptrs.end(), [d](const double* a, const double* b) {
    return std::lexicographical_compare(a, a + d, b, b + d);
  });
  std::vector<double> s(d, 0.0);
  for (const double* p : ptrs)
    for (std::size_t k = 0; k < d; ++k) s[k] += p[k];
  for (auto& v : s) v /= static_cast<double>(rows.size());
  return s;
}

}  // namespace detail

// h_i' = act(sum_r sum_{j in N_i^r} W_r h_j / |N_i^r| + W_0 h_i), with
// H as N x d rows and every W as d_out x d_in.
inline Var rgcn_layer(Var h, const std::vector<Var>& w_rel, Var w_self, const RelationalGraph& g,
                      Activation act = Activation::Relu) {
  const Eigen::Index n = h.rows(), d_in = h.cols(), d_out = w_self.rows();
  if (n != g.nodes()) throw ModelError("rgcn_layer: node states do not match the graph");
  if (static_cast<int>(w_rel.size()) != g.relations()) throw ModelError("rgcn_layer: one weight per relation required");
  if (w_self.cols() != d_in) throw ModelError("rgcn_layer: self weight has wrong shape");
  for (const auto& w : w_rel)
    if (w.rows() != d_out || w.cols() != d_in) throw ModelError("rgcn_layer: relation weight has wrong shape");

  const Matrix& hv = h.value();
  Matrix out = Matrix::Zero(n, d_out);
  // means[r] holds the per-node neighbour means (zero rows where none).
  std::vector<Matrix> means(w_rel.size(), Matrix::Zero(n, d_in));
  for (Eigen::Index i = 0; i < n; ++i) {
    double* yi = out.data() + i * d_out;
    detail::apply_rows(w_self.value(), hv.data() + i * d_in, yi);
    for (int r = 0; r < g.relations(); ++r) {
      const auto& nb = g.in(static_cast<int>(i), r);
      if (nb.empty()) continue;
      const auto m = detail::ordered_mean(hv, nb);
      std::copy(m.begin(), m.end(), means[static_cast<std::size_t>(r)].data() + i * d_in);
      detail::apply_rows(w_rel[static_cast<std::size_t>(r)].value(), m.data(), yi);
    }
  }
  if (act == Activation::Relu) out = out.cwiseMax(0.0);

  std::vector<int> inputs{h.id, w_self.id};
  for (const auto& w : w_rel) inputs.push_back(w.id);
  return h.tape->push(std::move(out), inputs, [h, w_rel, w_self, &g, act, means](Tape& t, const Matrix& grad, const Matrix& y) {
    Matrix gz = grad;
    if (act == Activation::Relu) gz = (y.array() > 0.0).select(grad.array(), 0.0);
    const Matrix& hv = t.value(h.id);
    if (t.needs_grad(w_self)) t.grad(w_self).noalias() += gz.transpose() * hv;
    if (t.needs_grad(h)) t.grad(h).noalias() += gz * t.value(w_self.id);
    for (int r = 0; r < g.relations(); ++r) {
      const Var& w = w_rel[static_cast<std::size_t>(r)];
      const Matrix& m = means[static_cast<std::size_t>(r)];
      if (t.needs_grad(w)) t.grad(w).noalias() += gz.transpose() * m;
      if (!t.needs_grad(h)) continue;
      const Matrix back = gz * t.value(w.id);  // row i: W_r^T g_i
      Matrix& gh = t.grad(h);
      for (Eigen::Index i = 0; i < hv.rows(); ++i) {
        const auto& nb = g.in(static_cast<int>(i), r);
        if (nb.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nb.size());
        for (int j : nb) gh.row(j) += back.row(i) * inv;
      }
    }
  });
}

}  // namespace crskit::nn
