#include "det/detector.hpp"

#include <cmath>

#include "common/error.hpp"

namespace srdet {

void PyramidConfig::finalize() {
  require(levels >= 1 && levels <= 8, "pyramid config: levels must lie in [1,8]");
  require(base_channels >= 1, "pyramid config: base_channels must be >= 1");
  require(head_channels >= 1, "pyramid config: head_channels must be >= 1");
  require(head_depth >= 1, "pyramid config: head_depth must be >= 1");
  require(expansion >= 1, "pyramid config: expansion must be >= 1");
  require(img_channels == 1 || img_channels == 3, "pyramid config: img_channels must be 1 or 3");

  if (widths.empty()) {
    // narrow early, wide late; mirrors how compound-scaled backbones spend
    // their parameter budget away from the large stride-4 maps
    for (int i = 0; i < levels; ++i) widths.push_back(base_channels * (i == 0 ? 1 : 2 * i));
  }
  if (stage_repeats.empty()) {
    for (int i = 0; i < levels; ++i) stage_repeats.push_back(i == 0 ? 1 : std::min(3, (i + 3) / 2));
  }
  if (anchor_sizes.empty()) {
    for (int i = 0; i < levels; ++i) anchor_sizes.push_back(16 << i);
  }

  if (static_cast<int>(widths.size()) != levels)
    fail_invalid("pyramid config: widths length must equal levels");
  if (static_cast<int>(stage_repeats.size()) != levels)
    fail_invalid("pyramid config: stage_repeats length must equal levels");
  if (static_cast<int>(anchor_sizes.size()) != levels)
    fail_invalid("pyramid config: anchor_sizes length must equal levels (one size per level)");
  for (int w : widths) require(w >= 1, "pyramid config: widths must be positive");
  for (int r : stage_repeats) require(r >= 1, "pyramid config: stage_repeats must be >= 1");
  for (int s : anchor_sizes) require(s >= 1, "pyramid config: anchor sizes must be positive");

  const int div = 2 << levels;  // 2^(levels+1)
  if (input_size <= 0 || input_size % div != 0)
    fail_invalid("pyramid config: input_size must be divisible by " + std::to_string(div));
}

std::vector<int> PyramidConfig::strides() const {
  std::vector<int> s;
  for (int i = 0; i < levels; ++i) s.push_back(4 << i);
  return s;
}

InvertedBottleneck::InvertedBottleneck(int cin, int cout, int stride, int expansion)
    : expand(cin, cin * expansion, 1, 1, 0),
      project(cin * expansion, cout, 1, 1, 0),
      dw(cin * expansion, 3, stride),
      skip(stride == 1 && cin == cout) {}

Tensor InvertedBottleneck::forward(const Tensor& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.exp_act = relu(expand.forward(x, &c.ec));
  c.dw_act = relu(dw.forward(c.exp_act, &c.dc));
  Tensor y = project.forward(c.dw_act, &c.pc);
  if (skip) y += x;
  return y;
}

Tensor InvertedBottleneck::backward(const Tensor& dy, const Cache& c, GradStore& gs,
                                    bool need_dx) const {
  Tensor d = project.backward(dy, c.pc, gs);
  relu_backward_inplace(d, c.dw_act);
  d = dw.backward(d, c.dc, gs);
  relu_backward_inplace(d, c.exp_act);
  Tensor dx = expand.backward(d, c.ec, gs, need_dx);
  if (skip && need_dx) dx += dy;
  return dx;
}

void InvertedBottleneck::init(Rng& rng) {
  expand.init(rng);
  dw.init(rng);
  project.init(rng);
}

void InvertedBottleneck::register_params(ParamRegistry& reg, const std::string& prefix) {
  expand.register_params(reg, prefix + ".expand");
  dw.register_params(reg, prefix + ".dw");
  project.register_params(reg, prefix + ".project");
}

void InvertedBottleneck::describe(int hin, int win, std::vector<LayerDesc>& out) const {
  out.push_back(expand.describe(hin, win));
  out.push_back({"relu", 0, 0, 0, hin, win, false});
  out.push_back(dw.describe(hin, win));
  auto [ho, wo] = dw.out_dims(hin, win);
  out.push_back({"relu", 0, 0, 0, ho, wo, false});
  out.push_back(project.describe(ho, wo));
  if (skip) out.push_back({"add", 0, 0, 0, ho, wo, false});
}

Backbone::Backbone(const PyramidConfig& cfg) {
  stem = Conv2d(cfg.img_channels, cfg.widths[0], 3, 2);
  int prev = cfg.widths[0];
  for (int i = 0; i < cfg.levels; ++i) {
    std::vector<InvertedBottleneck> stage;
    stage.emplace_back(prev, cfg.widths[i], 2, cfg.expansion);
    for (int r = 1; r < cfg.stage_repeats[i]; ++r)
      stage.emplace_back(cfg.widths[i], cfg.widths[i], 1, cfg.expansion);
    prev = cfg.widths[i];
    stages.push_back(std::move(stage));
  }
}

std::vector<Tensor> Backbone::forward(const Tensor& img, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.blocks.assign(stages.size(), {});

  c.stem_act = relu(stem.forward(img, &c.stem_c));
  Tensor t = c.stem_act;
  std::vector<Tensor> taps;
  for (size_t si = 0; si < stages.size(); ++si) {
    c.blocks[si].resize(stages[si].size());
    for (size_t bi = 0; bi < stages[si].size(); ++bi)
      t = stages[si][bi].forward(t, &c.blocks[si][bi]);
    taps.push_back(t);
  }
  return taps;
}

void Backbone::backward(const std::vector<Tensor>& d_taps, const Cache& c, GradStore& gs) const {
  Tensor d;  // gradient flowing down from the stage above
  for (size_t si = stages.size(); si-- > 0;) {
    if (d.empty())
      d = d_taps[si];
    else
      d += d_taps[si];
    for (size_t bi = stages[si].size(); bi-- > 0;)
      d = stages[si][bi].backward(d, c.blocks[si][bi], gs);
  }
  relu_backward_inplace(d, c.stem_act);
  stem.backward(d, c.stem_c, gs, /*need_dx=*/false);
}

void Backbone::init(Rng& rng) {
  stem.init(rng);
  for (auto& stage : stages)
    for (auto& block : stage) block.init(rng);
}

void Backbone::register_params(ParamRegistry& reg, const std::string& prefix) {
  stem.register_params(reg, prefix + ".stem");
  for (size_t si = 0; si < stages.size(); ++si)
    for (size_t bi = 0; bi < stages[si].size(); ++bi)
      stages[si][bi].register_params(reg, prefix + ".s" + std::to_string(si) + ".b" +
                                              std::to_string(bi));
}

void Backbone::describe(int input_h, int input_w, std::vector<LayerDesc>& out) const {
  out.push_back(stem.describe(input_h, input_w));
  auto [h, w] = stem.out_dims(input_h, input_w);
  out.push_back({"relu", 0, 0, 0, h, w, false});
  for (const auto& stage : stages) {
    for (const auto& block : stage) {
      block.describe(h, w, out);
      auto [ho, wo] = block.dw.out_dims(h, w);
      h = ho;
      w = wo;
    }
  }
}

Heads::Heads(const PyramidConfig& cfg) {
  for (int i = 0; i < cfg.levels; ++i)
    laterals.emplace_back(cfg.widths[i], cfg.head_channels, 1, 1, 0);
  for (int d = 0; d < cfg.head_depth; ++d) {
    cls_tower.emplace_back(cfg.head_channels, cfg.head_channels, 3);
    reg_tower.emplace_back(cfg.head_channels, cfg.head_channels, 3);
  }
  cls_out = Conv2d(cfg.head_channels, 1, 3);
  reg_out = Conv2d(cfg.head_channels, 4, 3);
}

void Heads::forward(const std::vector<Tensor>& taps, DetectionOutputs& out, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.levels.assign(taps.size(), {});
  out.cls.clear();
  out.reg.clear();

  for (size_t li = 0; li < taps.size(); ++li) {
    LevelCache& lc = c.levels[li];
    lc.lat_act = relu(laterals[li].forward(taps[li], &lc.lat_c));

    Tensor t = lc.lat_act;
    lc.cls_cs.resize(cls_tower.size());
    lc.cls_acts.resize(cls_tower.size());
    for (size_t d = 0; d < cls_tower.size(); ++d) {
      t = relu(cls_tower[d].forward(t, &lc.cls_cs[d]));
      lc.cls_acts[d] = t;
    }
    lc.cls_prob = sigmoid(cls_out.forward(t, &lc.cls_out_c));
    out.cls.push_back(lc.cls_prob);

    t = lc.lat_act;
    lc.reg_cs.resize(reg_tower.size());
    lc.reg_acts.resize(reg_tower.size());
    for (size_t d = 0; d < reg_tower.size(); ++d) {
      t = relu(reg_tower[d].forward(t, &lc.reg_cs[d]));
      lc.reg_acts[d] = t;
    }
    out.reg.push_back(reg_out.forward(t, &lc.reg_out_c));
  }
}

std::vector<Tensor> Heads::backward(const std::vector<Tensor>& d_cls,
                                    const std::vector<Tensor>& d_reg, const Cache& c,
                                    GradStore& gs) const {
  std::vector<Tensor> d_taps(c.levels.size());
  for (size_t li = 0; li < c.levels.size(); ++li) {
    const LevelCache& lc = c.levels[li];

    // probability -> logit
    Tensor dl = d_cls[li];
    for (size_t i = 0; i < dl.size(); ++i) {
      const double p = lc.cls_prob.v[i];
      dl.v[i] *= p * (1.0 - p);
    }
    Tensor dc = cls_out.backward(dl, lc.cls_out_c, gs);
    for (size_t d = cls_tower.size(); d-- > 0;) {
      relu_backward_inplace(dc, lc.cls_acts[d]);
      dc = cls_tower[d].backward(dc, lc.cls_cs[d], gs);
    }

    Tensor dr = reg_out.backward(d_reg[li], lc.reg_out_c, gs);
    for (size_t d = reg_tower.size(); d-- > 0;) {
      relu_backward_inplace(dr, lc.reg_acts[d]);
      dr = reg_tower[d].backward(dr, lc.reg_cs[d], gs);
    }

    dc += dr;
    relu_backward_inplace(dc, lc.lat_act);
    d_taps[li] = laterals[li].backward(dc, lc.lat_c, gs);
  }
  return d_taps;
}

void Heads::init(Rng& rng) {
  for (auto& l : laterals) l.init(rng);
  for (auto& t : cls_tower) t.init(rng);
  for (auto& t : reg_tower) t.init(rng);
  cls_out.init(rng);
  reg_out.init(rng);
  // bias the classifier toward background so early focal loss stays tame
  const double prior = 0.01;
  cls_out.b.fill(-std::log((1.0 - prior) / prior));
}

void Heads::register_params(ParamRegistry& reg, const std::string& prefix) {
  for (size_t i = 0; i < laterals.size(); ++i)
    laterals[i].register_params(reg, prefix + ".lateral" + std::to_string(i));
  for (size_t d = 0; d < cls_tower.size(); ++d)
    cls_tower[d].register_params(reg, prefix + ".cls_tower" + std::to_string(d));
  for (size_t d = 0; d < reg_tower.size(); ++d)
    reg_tower[d].register_params(reg, prefix + ".reg_tower" + std::to_string(d));
  cls_out.register_params(reg, prefix + ".cls_out");
  reg_out.register_params(reg, prefix + ".reg_out");
}

void Heads::describe(const PyramidConfig& cfg, int input_h, int input_w,
                     std::vector<LayerDesc>& out) const {
  // shared towers run once per level, so their MACs appear per level
  const auto strides = cfg.strides();
  for (int li = 0; li < cfg.levels; ++li) {
    const int h = input_h / strides[li], w = input_w / strides[li];
    out.push_back(laterals[li].describe(h, w));
    out.push_back({"relu", 0, 0, 0, h, w, false});
    for (const auto& t : cls_tower) {
      out.push_back(t.describe(h, w));
      out.push_back({"relu", 0, 0, 0, h, w, false});
    }
    out.push_back(cls_out.describe(h, w));
    out.push_back({"sigmoid", 0, 0, 0, h, w, false});
    for (const auto& t : reg_tower) {
      out.push_back(t.describe(h, w));
      out.push_back({"relu", 0, 0, 0, h, w, false});
    }
    out.push_back(reg_out.describe(h, w));
  }
}

Detector::Detector(const PyramidConfig& pcfg, const SRBranchConfig& scfg, bool sr_enabled,
                   uint64_t seed)
    : pcfg_(pcfg), scfg_(scfg) {
  pcfg_.finalize();
  scfg_.img_channels = pcfg_.img_channels;
  if (scfg_.channels <= 0) scfg_.channels = pcfg_.widths[0];
  if (sr_enabled && scfg_.channels != pcfg_.widths[0])
    fail_invalid("sr config: channels must equal the stride-4 level width (" +
                 std::to_string(pcfg_.widths[0]) + ")");
  scfg_.validate();

  backbone_ = Backbone(pcfg_);
  heads_ = Heads(pcfg_);
  backbone_.register_params(reg_det_, "backbone");
  heads_.register_params(reg_det_, "heads");

  // Detection weights draw from their own stream so attaching the branch
  // never perturbs them.
  Rng det_rng(mix_seed(seed, 0x6465746563746fULL));
  backbone_.init(det_rng);
  heads_.init(det_rng);

  reg_all_ = reg_det_;
  if (sr_enabled) {
    sr_.emplace(scfg_);
    sr_->register_params(reg_all_, "sr");
    Rng sr_rng(mix_seed(seed, 0x73725f6272ULL));
    sr_->init(sr_rng);
  }
}

DetectionOutputs Detector::forward(const Tensor& img, Mode mode, Cache* cache,
                                   bool strict_size) const {
  require(img.c == pcfg_.img_channels, "detector: image channel mismatch");
  if (strict_size && (img.h != pcfg_.input_size || img.w != pcfg_.input_size))
    fail_invalid("detector: image size " + std::to_string(img.w) + "x" + std::to_string(img.h) +
                 " does not match configured input size " + std::to_string(pcfg_.input_size));
  const int ms = pcfg_.max_stride();
  if (img.h % ms != 0 || img.w % ms != 0 || img.h < ms || img.w < ms)
    fail_invalid("detector: image dims must be divisible by the largest stride " +
                 std::to_string(ms));

  Cache local;
  Cache& c = cache ? *cache : local;
  c.taps = backbone_.forward(img, &c.backbone);

  DetectionOutputs out;
  heads_.forward(c.taps, out, &c.heads);

  if (mode == Mode::train && sr_) {
    out.sr_image = sr_->forward(c.taps[0], /*feature_stride=*/4, &c.sr);
    out.has_sr = true;
  }
  return out;
}

void Detector::backward(const Cache& c, const std::vector<Tensor>& d_cls,
                        const std::vector<Tensor>& d_reg, const Tensor* d_sr,
                        GradStore& gs) const {
  std::vector<Tensor> d_taps = heads_.backward(d_cls, d_reg, c.heads, gs);
  if (d_sr) {
    require(sr_.has_value(), "detector: sr gradient supplied but branch absent");
    d_taps[0] += sr_->backward(*d_sr, c.sr, gs);
  }
  backbone_.backward(d_taps, c.backbone, gs);
}

std::vector<Box> Detector::detect(const Tensor& img, double score_thresh,
                                  double nms_thresh) const {
  DetectionOutputs out = forward(img, Mode::infer, nullptr, /*strict_size=*/false);
  const AnchorSet as = anchors_for(img.h, img.w);

  std::vector<Box> cands;
  size_t ai = 0;
  for (size_t li = 0; li < out.cls.size(); ++li) {
    const Tensor& cls = out.cls[li];
    const Tensor& reg = out.reg[li];
    for (int y = 0; y < cls.h; ++y) {
      for (int x = 0; x < cls.w; ++x, ++ai) {
        const double score = cls.at(0, y, x);
        if (score < score_thresh) continue;
        Box b = decode_box(as.boxes[ai],
                           {reg.at(0, y, x), reg.at(1, y, x), reg.at(2, y, x), reg.at(3, y, x)});
        b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(img.w));
        b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(img.h));
        b.x2 = std::clamp(b.x2, 0.0, static_cast<double>(img.w));
        b.y2 = std::clamp(b.y2, 0.0, static_cast<double>(img.h));
        b.score = score;
        b.label = 0;
        cands.push_back(b);
      }
    }
  }
  return nms(cands, nms_thresh);
}

const AnchorSet& Detector::anchors() const {
  if (!anchors_) anchors_ = anchors_for(pcfg_.input_size, pcfg_.input_size);
  return *anchors_;
}

AnchorSet Detector::anchors_for(int image_h, int image_w) const {
  return generate_anchors(image_h, image_w, pcfg_.anchor_sizes, pcfg_.strides());
}

std::vector<LayerDesc> Detector::describe(int input_size, Mode mode) const {
  const int ms = pcfg_.max_stride();
  if (input_size % ms != 0 || input_size < ms)
    fail_invalid("describe: input size must be divisible by " + std::to_string(ms));
  std::vector<LayerDesc> out;
  backbone_.describe(input_size, input_size, out);
  heads_.describe(pcfg_, input_size, input_size, out);
  if (mode == Mode::train && sr_) sr_->describe(input_size / 4, input_size / 4, out);
  return out;
}

}  // namespace srdet
