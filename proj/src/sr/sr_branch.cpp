#include "sr/sr_branch.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace srdet {

void SRBranchConfig::validate() const {
  require(num_rg >= 1, "sr config: num_rg must be >= 1");
  require(rcab_per_rg >= 1, "sr config: rcab_per_rg must be >= 1");
  require(channels >= 1, "sr config: channels must be >= 1");
  require(img_channels >= 1, "sr config: img_channels must be >= 1");
  if (reduction < 1 || channels % reduction != 0)
    fail_invalid("sr config: reduction must divide channels");
  if (upscale < 2 || (upscale & (upscale - 1)) != 0)
    fail_invalid("sr config: upscale must be a power of two >= 2");
}

Rcab::Rcab(const SRBranchConfig& cfg)
    : conv1(cfg.channels, cfg.channels, 3),
      conv2(cfg.channels, cfg.channels, 3),
      ca(cfg.channels, cfg.reduction) {}

Tensor Rcab::forward(const Tensor& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = x;
  c.act = relu(conv1.forward(x, &c.c1));
  Tensor out = ca.forward(conv2.forward(c.act, &c.c2), &c.cca);
  out += x;
  return out;
}

Tensor Rcab::backward(const Tensor& dy, const Cache& c, GradStore& gs) const {
  Tensor d = ca.backward(dy, c.cca, gs);
  d = conv2.backward(d, c.c2, gs);
  relu_backward_inplace(d, c.act);
  Tensor dx = conv1.backward(d, c.c1, gs);
  dx += dy;  // residual skip
  return dx;
}

void Rcab::init(Rng& rng) {
  conv1.init(rng);
  conv2.init(rng);
  ca.init(rng);
}

void Rcab::register_params(ParamRegistry& reg, const std::string& prefix) {
  conv1.register_params(reg, prefix + ".conv1");
  conv2.register_params(reg, prefix + ".conv2");
  ca.register_params(reg, prefix + ".ca");
}

ResidualGroup::ResidualGroup(const SRBranchConfig& cfg)
    : blocks(cfg.rcab_per_rg, Rcab(cfg)), tail(cfg.channels, cfg.channels, 3) {}

Tensor ResidualGroup::forward(const Tensor& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.blocks.resize(blocks.size());
  Tensor t = x;
  for (size_t i = 0; i < blocks.size(); ++i) {
    t = blocks[i].forward(t, &c.blocks[i]);
    ++c.rcab_traversed;
  }
  Tensor out = tail.forward(t, &c.tail_c);
  out += x;
  return out;
}

Tensor ResidualGroup::backward(const Tensor& dy, const Cache& c, GradStore& gs) const {
  Tensor d = tail.backward(dy, c.tail_c, gs);
  for (size_t i = blocks.size(); i-- > 0;) d = blocks[i].backward(d, c.blocks[i], gs);
  d += dy;
  return d;
}

void ResidualGroup::init(Rng& rng) {
  for (Rcab& b : blocks) b.init(rng);
  tail.init(rng);
}

void ResidualGroup::register_params(ParamRegistry& reg, const std::string& prefix) {
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".rcab" + std::to_string(i));
  tail.register_params(reg, prefix + ".tail");
}

SRBranch::SRBranch(const SRBranchConfig& cfg_) : cfg(cfg_) {
  cfg.validate();
  rgs.assign(cfg.num_rg, ResidualGroup(cfg));
  for (int s = cfg.upscale; s > 1; s /= 2)
    up_convs.emplace_back(cfg.channels, cfg.channels * 4, 3);
  proj = Conv2d(cfg.channels, cfg.img_channels, 3);
}

Tensor SRBranch::forward(const Tensor& op2, int feature_stride, Cache* cache) const {
  if (feature_stride != 4)
    fail_invalid("sr branch: must attach at the stride-4 level, got stride " +
                 std::to_string(feature_stride));
  require(op2.c == cfg.channels, "sr branch: feature channel mismatch");

  Cache local;
  Cache& c = cache ? *cache : local;
  c.rgs.resize(rgs.size());
  c.up_cs.resize(up_convs.size());

  Tensor t = op2;
  for (size_t i = 0; i < rgs.size(); ++i) {
    t = rgs[i].forward(t, &c.rgs[i]);
    ++c.rg_traversed;
    c.rcab_traversed += c.rgs[i].rcab_traversed;
  }
  t += op2;  // fuse low-level input with the group output
  c.fused = t;

  for (size_t i = 0; i < up_convs.size(); ++i)
    t = pixel_shuffle(up_convs[i].forward(t, &c.up_cs[i]), 2);

  c.pre_clamp = proj.forward(t, &c.proj_c);
  Tensor img = c.pre_clamp;
  for (double& v : img.v) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Tensor SRBranch::backward(const Tensor& d_img, const Cache& c, GradStore& gs) const {
  Tensor d = d_img;
  for (size_t i = 0; i < d.size(); ++i) {
    const double p = c.pre_clamp.v[i];
    if (p <= 0.0 || p >= 1.0) d.v[i] = 0.0;
  }
  d = proj.backward(d, c.proj_c, gs);
  for (size_t i = up_convs.size(); i-- > 0;)
    d = up_convs[i].backward(pixel_shuffle_backward(d, 2), c.up_cs[i], gs);

  Tensor d_op2 = d;  // fusion add: gradient reaches the input directly
  for (size_t i = rgs.size(); i-- > 0;) d = rgs[i].backward(d, c.rgs[i], gs);
  d_op2 += d;
  return d_op2;
}

void SRBranch::init(Rng& rng) {
  for (ResidualGroup& rg : rgs) rg.init(rng);
  for (Conv2d& up : up_convs) up.init(rng);
  proj.init(rng);
  // start reconstructions near mid-gray so the clamp does not kill gradients
  proj.b.fill(0.5);
}

void SRBranch::register_params(ParamRegistry& reg, const std::string& prefix) {
  for (size_t i = 0; i < rgs.size(); ++i)
    rgs[i].register_params(reg, prefix + ".rg" + std::to_string(i));
  for (size_t i = 0; i < up_convs.size(); ++i)
    up_convs[i].register_params(reg, prefix + ".up" + std::to_string(i));
  proj.register_params(reg, prefix + ".proj");
}

long long SRBranch::param_count() const {
  ParamRegistry reg;
  const_cast<SRBranch*>(this)->register_params(reg, "sr");
  return reg.count_scalars();
}

long long SRBranch::param_count_analytic(const SRBranchConfig& cfg) {
  cfg.validate();
  const long long c = cfg.channels;
  const auto conv3 = [](long long cin, long long cout) { return 9 * cin * cout + cout; };
  const long long ca = c * (c / cfg.reduction) + c / cfg.reduction  // fc1
                       + (c / cfg.reduction) * c + c;               // fc2
  const long long rcab = 2 * conv3(c, c) + ca;
  const long long rg = cfg.rcab_per_rg * rcab + conv3(c, c);
  long long stages = 0;
  for (int s = cfg.upscale; s > 1; s /= 2) ++stages;
  return cfg.num_rg * rg + stages * conv3(c, 4 * c) + conv3(c, cfg.img_channels);
}

void SRBranch::describe(int h, int w, std::vector<LayerDesc>& out) const {
  for (const ResidualGroup& rg : rgs) {
    for (const Rcab& b : rg.blocks) {
      out.push_back(b.conv1.describe(h, w));
      out.push_back({"relu", 0, 0, 0, h, w, false});
      out.push_back(b.conv2.describe(h, w));
      b.ca.describe(h, w, out);
      out.push_back({"add", 0, 0, 0, h, w, false});
    }
    out.push_back(rg.tail.describe(h, w));
    out.push_back({"add", 0, 0, 0, h, w, false});
  }
  out.push_back({"add", 0, 0, 0, h, w, false});  // fusion
  int ch = h, cw = w;
  for (const Conv2d& up : up_convs) {
    out.push_back(up.describe(ch, cw));
    out.push_back({"shuffle", 0, 0, 0, ch * 2, cw * 2, false});
    ch *= 2;
    cw *= 2;
  }
  out.push_back(proj.describe(ch, cw));
  out.push_back({"clamp", 0, 0, 0, ch, cw, false});
}

}  // namespace srdet
