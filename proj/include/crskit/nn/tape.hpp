#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "crskit/error.hpp"

namespace crskit::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  Matrix value;
  mutable Matrix grad;
  mutable bool touched = false;

  void zero_grad() const {
    grad.setZero(value.rows(), value.cols());
    touched = false;
  }
};

// Named parameters; std::map keeps addresses stable and iteration sorted.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix value) {
    if (name.empty()) throw ModelError("parameter name must be nonempty");
    auto [it, inserted] = params_.emplace(name, Parameter{});
    if (!inserted) throw ModelError("duplicate parameter name: " + name);
    it->second.value = std::move(value);
    it->second.zero_grad();
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ModelError("unknown parameter: " + name);
    return it->second;
  }
  const Parameter& at(const std::string& name) const { return const_cast<ParameterSet*>(this)->at(name); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, p] : params_) out.push_back(n);
    return out;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() const {
    for (const auto& [n, p] : params_) p.zero_grad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool all_finite() const {
    for (const auto& [n, p] : params_)
      if (!p.value.allFinite()) return false;
    return true;
  }

 private:
  std::map<std::string, Parameter> params_;
};

class Tape;

// Handle to one tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Reverse-mode tape. With recording off it only evaluates values.
class Tape {
 public:
  // Receives this node's gradient and its own forward value.
  using Backward = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  // Training-mode flag, read by dropout.
  bool training = false;
  std::mt19937_64* rng = nullptr;

  Var constant(Matrix value) { return push(std::move(value), {}, nullptr); }

  Var param(const Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    Var v = push(p.value, {}, nullptr);
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    n.param = &p;
    n.needs_grad = recording_;
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  Var push(Matrix value, std::vector<int> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    if (recording_ && backward) {
      for (int i : inputs)
        if (nodes_[static_cast<std::size_t>(i)].needs_grad) n.needs_grad = true;
      if (n.needs_grad) n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool needs_grad(Var v) const { return needs_grad(v.id); }

  // Gradient buffer of a node, zero-initialized on first use.
  Matrix& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    if (n.grad.rows() != n.value.rows()) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  Matrix& grad(Var v) { return grad(v.id); }

  // Back-propagates d(loss)/d(node) and accumulates into parameter grads.
  void backward(Var loss) {
    if (!recording_) throw ModelError("backward on a non-recording tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw ModelError("backward needs a scalar loss");
    if (!needs_grad(loss)) return;
    grad(loss.id)(0, 0) += 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.backward) {
        const Matrix g = n.grad;
        n.backward(*this, g, n.value);
      }
      if (n.param) {
        if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
          n.param->grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.param->grad += n.grad;
        n.param->touched = true;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    const Parameter* param = nullptr;
    Backward backward;
  };

  bool recording_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

}  // namespace crskit::nn
