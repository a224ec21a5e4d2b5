#pragma once

#include <cmath>
#include <map>
#include <string>

#include "crskit/error.hpp"
#include "crskit/nn/tape.hpp"

namespace crskit::train {

// Linear warmup to base, then per-step multiplicative decay.
inline double lr_schedule(long step, double base, long warmup_steps, double decay) {
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must be in (0, 1]");
  if (step < warmup_steps) return base * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  return base * std::pow(decay, static_cast<double>(step - warmup_steps + 1));
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: value -= lr * wd * value
  double clip_norm = 1.0;     // 0 disables
};

// Adaptive-moment optimizer. Parameters the last backward pass did not reach
// keep their moments and values.
class Adam {
 public:
  explicit Adam(AdamOptions o = {}) : o_(o) {}

  // Global gradient norm over touched parameters, before clipping.
  static double grad_norm(const nn::ParameterSet& ps) {
    double sq = 0.0;
    for (const auto& [name, p] : ps)
      if (p.touched) sq += p.grad.squaredNorm();
    return std::sqrt(sq);
  }

  // Returns the pre-clip gradient norm.
  double step(nn::ParameterSet& ps, double lr) {
    const double norm = grad_norm(ps);
    if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
    const double scale = o_.clip_norm > 0.0 && norm > o_.clip_norm ? o_.clip_norm / norm : 1.0;
    for (auto& [name, p] : ps) {
      if (!p.touched) continue;
      auto& s = state_[name];
      if (s.m.size() == 0) {
        s.m = nn::Matrix::Zero(p.value.rows(), p.value.cols());
        s.v = s.m;
      }
      ++s.t;
      const nn::Matrix g = p.grad * scale;
      s.m = o_.beta1 * s.m + (1.0 - o_.beta1) * g;
      s.v = o_.beta2 * s.v + (1.0 - o_.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(o_.beta1, static_cast<double>(s.t));
      const double c2 = 1.0 - std::pow(o_.beta2, static_cast<double>(s.t));
      if (o_.weight_decay > 0.0) p.value -= lr * o_.weight_decay * p.value;
      p.value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + o_.eps);
    }
    return norm;
  }

  const AdamOptions& options() const { return o_; }

 private:
  struct Moments {
    nn::Matrix m, v;
    long t = 0;
  };
  AdamOptions o_;
  std::map<std::string, Moments> state_;
};

}  // namespace crskit::train
