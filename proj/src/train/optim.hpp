#pragma once

#include <vector>

#include "nn/layers.hpp"

namespace srdet {

// AdamW with decoupled weight decay.
class AdamW {
 public:
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  AdamW() = default;
  explicit AdamW(const ParamRegistry& reg);

  void step(const ParamRegistry& reg, const GradStore& grads, double lr, double weight_decay);

  long long steps_taken() const { return t_; }

  // exposed for checkpointing
  std::vector<Tensor> m, v;
  long long t_ = 0;
};

}  // namespace srdet
