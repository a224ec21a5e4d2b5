#pragma once

#include <cmath>
#include <random>

#include "crskit/nn/tape.hpp"

namespace crskit::nn {

// Embedding tables: uniform(-0.1, 0.1).
inline Matrix init_embedding(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Linear maps: normal(0, 1/sqrt(fan_in)).
inline Matrix init_linear(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, fan_in))));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

inline Matrix zeros(Eigen::Index rows, Eigen::Index cols) { return Matrix::Zero(rows, cols); }
inline Matrix ones(Eigen::Index rows, Eigen::Index cols) { return Matrix::Ones(rows, cols); }

}  // namespace crskit::nn
