#pragma once

#include "bracketdyn/nn.hpp"

namespace bracketdyn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool decoupled_weight_decay = true; // false couples the decay into the gradient
};

// Standard Adam over a ParamSet. Steps with any non-finite gradient are
// skipped and counted rather than applied.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // Returns false when the step was skipped because of a non-finite gradient.
  bool step(ParamSet& ps) {
    for (const auto& e : ps.items)
      if (!is_finite(e.grad)) {
        ++skipped_;
        return false;
      }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (auto& e : ps.items) {
      for (size_t i = 0; i < e.value.size(); ++i) {
        double g = e.grad.data()[i];
        if (!cfg_.decoupled_weight_decay && cfg_.weight_decay != 0.0)
          g += cfg_.weight_decay * e.value.data()[i];
        double& m = e.m.data()[i];
        double& v = e.v.data()[i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double upd = mhat / (std::sqrt(vhat) + cfg_.eps);
        if (cfg_.decoupled_weight_decay && cfg_.weight_decay != 0.0)
          upd += cfg_.weight_decay * e.value.data()[i];
        e.value.data()[i] -= cfg_.lr * upd;
      }
    }
    return true;
  }

  int steps_taken() const { return t_; }
  int steps_skipped() const { return skipped_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  int skipped_ = 0;
};

} // namespace bracketdyn
