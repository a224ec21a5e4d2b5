#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "crskit/nn/tape.hpp"

namespace crskit::nn {

namespace detail {

inline void check(bool ok, const std::string& what) {
  if (!ok) throw ModelError("shape mismatch in " + what);
}

inline std::string shape(const Var& v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::check(a.cols() == b.rows(), "matmul " + detail::shape(a) + " * " + detail::shape(b));
  Matrix out = a.value() * b.value();
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b.id).transpose();
    if (t.needs_grad(b)) t.grad(b).noalias() += t.value(a.id).transpose() * g;
  });
}

// a * b^T
inline Var matmul_nt(Var a, Var b) {
  detail::check(a.cols() == b.cols(), "matmul_nt " + detail::shape(a) + " * " + detail::shape(b) + "^T");
  Matrix out = a.value() * b.value().transpose();
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b.id);
    if (t.needs_grad(b)) t.grad(b).noalias() += g.transpose() * t.value(a.id);
  });
}

inline Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix&) { t.grad(a) += g.transpose(); });
}

inline Var add(Var a, Var b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "add " + detail::shape(a) + " + " + detail::shape(b));
  Matrix out = a.value() + b.value();
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) += g;
  });
}

inline Var sub(Var a, Var b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "sub " + detail::shape(a) + " - " + detail::shape(b));
  Matrix out = a.value() - b.value();
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) -= g;
  });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "mul " + detail::shape(a) + " . " + detail::shape(b));
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b.id));
    if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a.id));
  });
}

// a (n x d) + row vector b (1 x d) on every row.
inline Var add_rowvec(Var a, Var b) {
  detail::check(b.rows() == 1 && a.cols() == b.cols(), "add_rowvec " + detail::shape(a) + " + " + detail::shape(b));
  Matrix out = a.value().rowwise() + b.value().row(0);
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) += g.colwise().sum();
  });
}

// a (n x d) with every row scaled elementwise by row vector b (1 x d).
inline Var mul_rowvec(Var a, Var b) {
  detail::check(b.rows() == 1 && a.cols() == b.cols(), "mul_rowvec " + detail::shape(a) + " . " + detail::shape(b));
  Matrix out = a.value().array().rowwise() * b.value().row(0).array();
  return a.tape->push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a).array() += g.array().rowwise() * t.value(b.id).row(0).array();
    if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a.id)).colwise().sum();
  });
}

inline Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.tape->push(std::move(out), {a.id}, [a, s](Tape& t, const Matrix& g, const Matrix&) { t.grad(a) += g * s; });
}

inline Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix&) { t.grad(a) += g; });
}

// a + c for a constant matrix c (masks, fixed biases).
inline Var add_const(Var a, const Matrix& c) {
  detail::check(a.rows() == c.rows() && a.cols() == c.cols(), "add_const");
  Matrix out = a.value() + c;
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix&) { t.grad(a) += g; });
}

// Elementwise product with a constant matrix.
inline Var mul_const(Var a, const Matrix& c) {
  detail::check(a.rows() == c.rows() && a.cols() == c.cols(), "mul_const");
  Matrix out = a.value().cwiseProduct(c);
  return a.tape->push(std::move(out), {a.id}, [a, c](Tape& t, const Matrix& g, const Matrix&) { t.grad(a) += g.cwiseProduct(c); });
}

inline Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.grad(a).array() += (t.value(a.id).array() > 0.0).select(g.array(), 0.0);
  });
}

inline Var tanh(Var a) {
  Matrix out = a.value().array().tanh();
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad(a).array() += g.array() * (1.0 - y.array().square());
  });
}

inline Var sigmoid(Var a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad(a).array() += g.array() * y.array() * (1.0 - y.array());
  });
}

namespace detail {

inline Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

inline Matrix log_softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    y.row(i) = x.row(i).array() - lse;
  }
  return y;
}

}  // namespace detail

inline Var softmax_rows(Var a) {
  Matrix out = detail::softmax_rows(a.value());
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    t.grad(a).array() += y.array() * (g.colwise() - dot).array();
  });
}

inline Var log_softmax_rows(Var a) {
  Matrix out = detail::log_softmax_rows(a.value());
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    const Eigen::VectorXd total = g.rowwise().sum();
    t.grad(a).array() += g.array() - y.array().exp().colwise() * total.array();
  });
}

// Rows of `table` picked by ids (embedding lookup).
inline Var gather_rows(Var table, const std::vector<int>& ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw ModelError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(table.rows()));
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  return table.tape->push(std::move(out), {table.id}, [table, ids](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& gt = t.grad(table);
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

inline Var slice_rows(Var a, Eigen::Index begin, Eigen::Index n) {
  detail::check(begin >= 0 && n >= 0 && begin + n <= a.rows(), "slice_rows");
  Matrix out = a.value().middleRows(begin, n);
  return a.tape->push(std::move(out), {a.id}, [a, begin, n](Tape& t, const Matrix& g, const Matrix&) {
    t.grad(a).middleRows(begin, n) += g;
  });
}

inline Var slice_cols(Var a, Eigen::Index begin, Eigen::Index n) {
  detail::check(begin >= 0 && n >= 0 && begin + n <= a.cols(), "slice_cols");
  Matrix out = a.value().middleCols(begin, n);
  return a.tape->push(std::move(out), {a.id}, [a, begin, n](Tape& t, const Matrix& g, const Matrix&) {
    t.grad(a).middleCols(begin, n) += g;
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ModelError("concat_cols of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    detail::check(p.rows() == rows, "concat_cols");
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts.front().tape->push(std::move(out), ids, [parts](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      if (t.needs_grad(p)) t.grad(p) += g.middleCols(c, p.cols());
      c += p.cols();
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ModelError("concat_rows of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    detail::check(p.cols() == cols, "concat_rows");
    rows += p.rows();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape->push(std::move(out), ids, [parts](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      if (t.needs_grad(p)) t.grad(p) += g.middleRows(r, p.rows());
      r += p.rows();
    }
  });
}

// Column sums as a 1 x d row.
inline Var sum_rows(Var a) {
  Matrix out = a.value().colwise().sum();
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix&) { t.grad(a).rowwise() += g.row(0); });
}

inline Var mean_rows(Var a) {
  if (a.rows() == 0) throw ModelError("mean_rows of an empty matrix");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

// Per-column maximum as a 1 x d row; the first maximal row gets the gradient.
inline Var max_rows(Var a) {
  if (a.rows() == 0) throw ModelError("max_rows of an empty matrix");
  Matrix out(1, a.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < a.rows(); ++i)
      if (a.value()(i, j) > a.value()(best, j)) best = i;
    arg[static_cast<std::size_t>(j)] = best;
    out(0, j) = a.value()(best, j);
  }
  return a.tape->push(std::move(out), {a.id}, [a, arg](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& ga = t.grad(a);
    for (std::size_t j = 0; j < arg.size(); ++j) ga(arg[j], static_cast<Eigen::Index>(j)) += g(0, static_cast<Eigen::Index>(j));
  });
}

inline Var sum_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push(std::move(out), {a.id}, [a](Tape& t, const Matrix& g, const Matrix&) { t.grad(a).array() += g(0, 0); });
}

// Row-wise layer normalization with learned gain and bias (1 x d each).
inline Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5) {
  const Eigen::Index n = a.rows(), d = a.cols();
  detail::check(gain.rows() == 1 && gain.cols() == d && bias.rows() == 1 && bias.cols() == d, "layer_norm");
  Matrix xhat(n, d);
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = a.value().row(i).mean();
    const double var = (a.value().row(i).array() - mu).square().mean();
    inv(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (a.value().row(i).array() - mu) * inv(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return a.tape->push(std::move(out), {a.id, gain.id, bias.id}, [a, gain, bias, xhat, inv](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(gain)) t.grad(gain) += g.cwiseProduct(xhat).colwise().sum();
    if (t.needs_grad(bias)) t.grad(bias) += g.colwise().sum();
    if (t.needs_grad(a)) {
      const Matrix gx = g.array().rowwise() * t.value(gain.id).row(0).array();
      Matrix& ga = t.grad(a);
      for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
        const double m1 = gx.row(i).mean();
        const double m2 = gx.row(i).cwiseProduct(xhat.row(i)).mean();
        ga.row(i).array() += inv(i) * (gx.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
    }
  });
}

// Weighted mean of -logp[i, target_i]; rows with weight 0 are ignored.
inline Var nll_mean(Var logp, const std::vector<int>& targets, const std::vector<double>& weights) {
  detail::check(static_cast<Eigen::Index>(targets.size()) == logp.rows() && targets.size() == weights.size(), "nll_mean");
  double total_w = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (weights[i] == 0.0) continue;
    if (targets[i] < 0 || targets[i] >= logp.cols()) throw ModelError("nll_mean: target out of range");
    total_w += weights[i];
    loss -= weights[i] * logp.value()(static_cast<Eigen::Index>(i), targets[i]);
  }
  if (total_w <= 0.0) throw ModelError("loss over zero target tokens");
  Matrix out(1, 1);
  out(0, 0) = loss / total_w;
  return logp.tape->push(std::move(out), {logp.id}, [logp, targets, weights, total_w](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& gl = t.grad(logp);
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (weights[i] != 0.0) gl(static_cast<Eigen::Index>(i), targets[i]) -= g(0, 0) * weights[i] / total_w;
  });
}

// Inverted dropout; identity unless the tape is in training mode.
inline Var dropout(Var a, double rate) {
  Tape& t = *a.tape;
  if (!t.training || rate <= 0.0) return a;
  if (!t.rng) throw ModelError("dropout needs a tape rng in training mode");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix m(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*t.rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul_const(a, m);
}

}  // namespace crskit::nn
