#pragma once

#include <string>
#include <vector>

#include "nn/layers.hpp"

namespace srdet {

struct SRBranchConfig {
  int num_rg = 2;
  int rcab_per_rg = 2;
  int channels = 16;   // must equal the feature width at the attachment level
  int reduction = 4;
  int upscale = 4;     // power of two; realized as stacked x2 sub-pixel stages
  int img_channels = 1;

  void validate() const;
};

// conv-relu-conv followed by channel attention, wrapped in a residual skip.
class Rcab {
 public:
  Conv2d conv1, conv2;
  ChannelAttention ca;

  Rcab() = default;
  explicit Rcab(const SRBranchConfig& cfg);

  struct Cache {
    Tensor x, act;  // act is post-relu
    Conv2d::Cache c1, c2;
    ChannelAttention::Cache cca;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Tensor& dy, const Cache& c, GradStore& gs) const;
  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

// Consecutive RCABs plus a trailing conv, under an outer residual skip; with
// all weights zeroed the group is the identity.
class ResidualGroup {
 public:
  std::vector<Rcab> blocks;
  Conv2d tail;

  ResidualGroup() = default;
  explicit ResidualGroup(const SRBranchConfig& cfg);

  struct Cache {
    std::vector<Rcab::Cache> blocks;
    Conv2d::Cache tail_c;
    int rcab_traversed = 0;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Tensor& dy, const Cache& c, GradStore& gs) const;
  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

// Training-only reconstruction head: residual groups over the attachment
// features, pixelwise-addition fusion of input and group output, then x4
// sub-pixel upsampling and projection to an image clamped to [0,1].
class SRBranch {
 public:
  SRBranchConfig cfg;
  std::vector<ResidualGroup> rgs;
  std::vector<Conv2d> up_convs;  // C -> 4C per x2 stage
  Conv2d proj;

  SRBranch() = default;
  explicit SRBranch(const SRBranchConfig& cfg);

  struct Cache {
    std::vector<ResidualGroup::Cache> rgs;
    Tensor fused;
    std::vector<Conv2d::Cache> up_cs;
    Conv2d::Cache proj_c;
    Tensor pre_clamp;
    int rg_traversed = 0;
    int rcab_traversed = 0;
  };

  // feature_stride must be the attachment level's stride (4).
  Tensor forward(const Tensor& op2, int feature_stride, Cache* cache = nullptr) const;
  // Returns the gradient w.r.t. the attachment features.
  Tensor backward(const Tensor& d_img, const Cache& c, GradStore& gs) const;

  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  long long param_count() const;  // enumeration over instantiated weights
  static long long param_count_analytic(const SRBranchConfig& cfg);

  void describe(int h, int w, std::vector<LayerDesc>& out) const;
};

}  // namespace srdet
