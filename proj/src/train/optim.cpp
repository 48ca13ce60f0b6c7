#include "train/optim.hpp"

#include <cmath>

#include "common/error.hpp"

namespace srdet {

AdamW::AdamW(const ParamRegistry& reg) {
  m.reserve(reg.size());
  v.reserve(reg.size());
  for (const Tensor* t : reg.tensors) {
    m.emplace_back(t->c, t->h, t->w);
    v.emplace_back(t->c, t->h, t->w);
  }
}

void AdamW::step(const ParamRegistry& reg, const GradStore& grads, double lr,
                 double weight_decay) {
  require(m.size() == reg.size() && grads.g.size() == reg.size(),
          "AdamW: registry/state size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (size_t pi = 0; pi < reg.size(); ++pi) {
    Tensor& p = *reg.tensors[pi];
    const Tensor& g = grads.g[pi];
    Tensor& mi = m[pi];
    Tensor& vi = v[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      mi.v[i] = beta1 * mi.v[i] + (1.0 - beta1) * g.v[i];
      vi.v[i] = beta2 * vi.v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
      const double mhat = mi.v[i] / bc1;
      const double vhat = vi.v[i] / bc2;
      p.v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.v[i]);
    }
  }
}

}  // namespace srdet
