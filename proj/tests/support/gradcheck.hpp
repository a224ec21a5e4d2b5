#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "crskit/nn/tape.hpp"

namespace crskit::test {

struct GradReport {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double max_rel = 0.0;
  std::vector<std::string> failures;  // "name[i,j] analytic numeric"

  double pass_fraction() const { return checked ? static_cast<double>(passed) / static_cast<double>(checked) : 1.0; }
  std::string summary() const {
    std::ostringstream os;
    os << passed << "/" << checked << " within tolerance, max rel err " << max_rel;
    for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 5); ++i) os << "\n  " << failures[i];
    return os.str();
  }
};

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Central differences over every entry of every parameter (or the first
// `limit` entries of each when limit > 0).
inline GradReport gradcheck(const nn::ParameterSet& params, const std::function<nn::Var(nn::Tape&)>& loss_fn,
                            double eps = 1e-5, double tol = 1e-4, std::size_t limit = 0) {
  params.zero_grad();
  {
    nn::Tape tape(true);
    tape.backward(loss_fn(tape));
  }
  GradReport rep;
  for (const auto& [name, p] : params) {
    const nn::Matrix analytic = p.grad;
    auto& value = const_cast<nn::Matrix&>(p.value);
    const auto n = static_cast<std::size_t>(value.size());
    for (std::size_t k = 0; k < (limit ? std::min(limit, n) : n); ++k) {
      const double orig = value.data()[k];
      value.data()[k] = orig + eps;
      double up, down;
      {
        nn::Tape t(false);
        up = loss_fn(t).scalar();
      }
      value.data()[k] = orig - eps;
      {
        nn::Tape t(false);
        down = loss_fn(t).scalar();
      }
      value.data()[k] = orig;
      const double num = (up - down) / (2.0 * eps);
      const double a = analytic.size() ? analytic.data()[k] : 0.0;
      const double rel = relative_error(a, num);
      ++rep.checked;
      rep.max_rel = std::max(rep.max_rel, rel);
      if (rel <= tol) {
        ++rep.passed;
      } else {
        std::ostringstream os;
        os << name << "[" << k << "] analytic " << a << " numeric " << num;
        rep.failures.push_back(os.str());
      }
    }
  }
  return rep;
}

}  // namespace crskit::test
