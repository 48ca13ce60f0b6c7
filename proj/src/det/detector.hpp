#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "anchors/anchors.hpp"
#include "nn/layers.hpp"
#include "sr/sr_branch.hpp"

namespace srdet {

struct PyramidConfig {
  int levels = 6;
  int base_channels = 16;
  int input_size = 256;
  int img_channels = 1;
  int head_channels = 64;
  int head_depth = 2;
  int expansion = 4;
  std::vector<int> widths;         // per level; derived from base_channels when empty
  std::vector<int> stage_repeats;  // per level; derived when empty
  std::vector<int> anchor_sizes;   // one size per level; {16,32,...} when empty

  // Fills derived defaults and validates; must be called before building a model.
  void finalize();
  std::vector<int> strides() const;  // {4, 8, 16, ...}
  int max_stride() const { return 4 << (levels - 1); }
};

enum class Mode { train, infer };

struct DetectionOutputs {
  std::vector<Tensor> cls;  // per level, (1, h, w) probabilities
  std::vector<Tensor> reg;  // per level, (4, h, w) encoded offsets
  bool has_sr = false;
  Tensor sr_image;
};

// 1x1 expand, depthwise 3x3, 1x1 project; residual when shape-preserving.
class InvertedBottleneck {
 public:
  Conv2d expand, project;
  DepthwiseConv2d dw;
  bool skip = false;

  InvertedBottleneck() = default;
  InvertedBottleneck(int cin, int cout, int stride, int expansion);

  struct Cache {
    Tensor exp_act, dw_act;  // post-relu
    Conv2d::Cache ec, pc;
    DepthwiseConv2d::Cache dc;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Tensor& dy, const Cache& c, GradStore& gs, bool need_dx = true) const;
  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);
  void describe(int hin, int win, std::vector<LayerDesc>& out) const;
};

// Strided stem plus one downsampling stage per pyramid level; level i is the
// output of stage i at stride 4*2^i (level 0 is the stride-4 OP2 tap).
class Backbone {
 public:
  Conv2d stem;
  std::vector<std::vector<InvertedBottleneck>> stages;

  Backbone() = default;
  explicit Backbone(const PyramidConfig& cfg);

  struct Cache {
    Conv2d::Cache stem_c;
    Tensor stem_act;
    std::vector<std::vector<InvertedBottleneck::Cache>> blocks;
  };

  std::vector<Tensor> forward(const Tensor& img, Cache* cache = nullptr) const;
  void backward(const std::vector<Tensor>& d_taps, const Cache& c, GradStore& gs) const;
  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);
  void describe(int input_h, int input_w, std::vector<LayerDesc>& out) const;
};

// Per-level 1x1 laterals into shared classification/regression towers with a
// single square anchor per location.
class Heads {
 public:
  std::vector<Conv2d> laterals;
  std::vector<Conv2d> cls_tower, reg_tower;
  Conv2d cls_out, reg_out;

  Heads() = default;
  explicit Heads(const PyramidConfig& cfg);

  struct LevelCache {
    Conv2d::Cache lat_c;
    Tensor lat_act;
    std::vector<Conv2d::Cache> cls_cs, reg_cs;
    std::vector<Tensor> cls_acts, reg_acts;
    Conv2d::Cache cls_out_c, reg_out_c;
    Tensor cls_prob;
  };
  struct Cache {
    std::vector<LevelCache> levels;
  };

  void forward(const std::vector<Tensor>& taps, DetectionOutputs& out, Cache* cache = nullptr) const;
  // d_cls is w.r.t. the post-sigmoid probabilities.
  std::vector<Tensor> backward(const std::vector<Tensor>& d_cls, const std::vector<Tensor>& d_reg,
                               const Cache& c, GradStore& gs) const;
  void init(Rng& rng);
  void register_params(ParamRegistry& reg, const std::string& prefix);
  void describe(const PyramidConfig& cfg, int input_h, int input_w,
                std::vector<LayerDesc>& out) const;
};

class Detector {
 public:
  Detector(const PyramidConfig& pcfg, const SRBranchConfig& scfg, bool sr_enabled, uint64_t seed);

  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;

  struct Cache {
    Backbone::Cache backbone;
    Heads::Cache heads;
    SRBranch::Cache sr;
    std::vector<Tensor> taps;
  };

  // strict_size enforces img dims == cfg.input_size; with it off any size
  // divisible by the largest stride is accepted (cost/FPS sweeps, detect).
  DetectionOutputs forward(const Tensor& img, Mode mode, Cache* cache = nullptr,
                           bool strict_size = true) const;

  // d_sr may be null (inference-style or phi == 0 without a reconstruction
  // gradient). Gradients accumulate into gs, which must be sized by params(train).
  void backward(const Cache& c, const std::vector<Tensor>& d_cls,
                const std::vector<Tensor>& d_reg, const Tensor* d_sr, GradStore& gs) const;

  std::vector<Box> detect(const Tensor& img, double score_thresh, double nms_thresh) const;

  const ParamRegistry& params(Mode mode) const {
    return mode == Mode::infer ? reg_det_ : reg_all_;
  }
  const PyramidConfig& pyramid_config() const { return pcfg_; }
  const SRBranchConfig& sr_config() const { return scfg_; }
  bool sr_enabled() const { return sr_.has_value(); }
  const SRBranch* sr_branch() const { return sr_ ? &*sr_ : nullptr; }

  // Anchors for the configured input size, built once.
  const AnchorSet& anchors() const;
  AnchorSet anchors_for(int image_h, int image_w) const;

  std::vector<LayerDesc> describe(int input_size, Mode mode) const;

 private:
  PyramidConfig pcfg_;
  SRBranchConfig scfg_;
  Backbone backbone_;
  Heads heads_;
  std::optional<SRBranch> sr_;
  ParamRegistry reg_det_, reg_all_;
  mutable std::optional<AnchorSet> anchors_;
};

}  // namespace srdet
