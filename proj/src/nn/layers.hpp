#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "common/rng.hpp"
#include "common/tensor.hpp"

namespace srdet {

// Parameters live inside their layers; the registry holds stable-ordered
// references used by the optimizer, the checkpoint writer and param counting.
struct ParamRegistry {
  std::vector<std::string> names;
  std::vector<Tensor*> tensors;

  int add(const std::string& name, Tensor* t) {
    names.push_back(name);
    tensors.push_back(t);
    return static_cast<int>(tensors.size()) - 1;
  }
  size_t size() const { return tensors.size(); }
  long long count_scalars() const {
    long long n = 0;
    for (const Tensor* t : tensors) n += static_cast<long long>(t->size());
    return n;
  }
};

// Per-call gradient accumulator aligned with a ParamRegistry. Backward passes
// write here instead of into the layers so concurrent per-image backprop can
// use one store per worker and reduce afterwards.
struct GradStore {
  std::vector<Tensor> g;

  void init(const ParamRegistry& reg) {
    g.clear();
    g.reserve(reg.size());
    for (const Tensor* t : reg.tensors) g.emplace_back(t->c, t->h, t->w);
  }
  void zero() {
    for (Tensor& t : g) t.fill(0.0);
  }
  void add(const GradStore& o) {
    for (size_t i = 0; i < g.size(); ++i) g[i] += o.g[i];
  }
  void scale(double s) {
    for (Tensor& t : g) t *= s;
  }
  Tensor& operator[](int pid) { return g[pid]; }
};

// One entry of a static cost description; consumed by the MAC/param walker.
struct LayerDesc {
  std::string kind;  // conv | dwconv | linear | gap | shuffle | relu | sigmoid | add | scale | clamp
  long long cin = 0, cout = 0, k = 0, hout = 0, wout = 0;
  bool bias = false;
};

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void kaiming_normal_init(Tensor& w, int fan_in, Rng& rng);

class Conv2d {
 public:
  int cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
  bool has_bias = true;
  Tensor w;  // (cout, cin, k*k), row-major GEMM layout
  Tensor b;  // (cout, 1, 1)
  int pid_w = -1, pid_b = -1;

  Conv2d() = default;
  Conv2d(int cin_, int cout_, int k_, int stride_ = 1, int pad_ = -1, bool bias = true);

  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  struct Cache {
    Eigen::MatrixXd cols;  // (cin*k*k) x (hout*wout)
    int hin = 0, win = 0, hout = 0, wout = 0;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  // Returns dx when need_dx; accumulates weight grads into gs.
  Tensor backward(const Tensor& dy, const Cache& cache, GradStore& gs, bool need_dx = true) const;

  std::pair<int, int> out_dims(int hin, int win) const;
  long long param_count() const;
  LayerDesc describe(int hin, int win) const;
};

class DepthwiseConv2d {
 public:
  int channels = 0, k = 3, stride = 1, pad = 1;
  Tensor w;  // (channels, k, k)
  Tensor b;  // (channels, 1, 1)
  int pid_w = -1, pid_b = -1;

  DepthwiseConv2d() = default;
  DepthwiseConv2d(int channels_, int k_, int stride_);

  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  struct Cache {
    Tensor x;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Tensor& dy, const Cache& cache, GradStore& gs, bool need_dx = true) const;

  std::pair<int, int> out_dims(int hin, int win) const;
  long long param_count() const;
  LayerDesc describe(int hin, int win) const;
};

// Squeeze-and-gate over channels: global average pool, bottleneck C -> C/r -> C,
// sigmoid, then channel-wise rescale of the input.
class ChannelAttention {
 public:
  int channels = 0, reduction = 1;
  Conv2d fc1, fc2;  // 1x1 convs applied to the pooled (C,1,1) descriptor

  ChannelAttention() = default;
  ChannelAttention(int channels_, int reduction_);

  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  struct Cache {
    Tensor x, pooled, hidden, gate;  // hidden is post-relu
    Conv2d::Cache c1, c2;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Tensor& dy, const Cache& cache, GradStore& gs) const;

  long long param_count() const;
  void describe(int h, int w, std::vector<LayerDesc>& out) const;
};

Tensor relu(const Tensor& x);
// dy *= (y > 0), in place
void relu_backward_inplace(Tensor& dy, const Tensor& y);
Tensor sigmoid(const Tensor& x);

Tensor global_avg_pool(const Tensor& x);

// (C*r^2, H, W) -> (C, rH, rW)
Tensor pixel_shuffle(const Tensor& x, int r);
Tensor pixel_shuffle_backward(const Tensor& dy, int r);

}  // namespace srdet
