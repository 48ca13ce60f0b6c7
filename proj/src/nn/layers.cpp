#include "nn/layers.hpp"

#include <cmath>

#include "common/error.hpp"

namespace srdet {

void kaiming_normal_init(Tensor& w, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  for (double& v : w.v) v = rng.normal(0.0, stddev);
}

Conv2d::Conv2d(int cin_, int cout_, int k_, int stride_, int pad_, bool bias)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_ < 0 ? k_ / 2 : pad_),
      has_bias(bias), w(cout_, cin_, k_ * k_) {
  if (has_bias) b = Tensor(cout_, 1, 1);
}

void Conv2d::init(Rng& rng) {
  kaiming_normal_init(w, cin * k * k, rng);
  if (has_bias) b.fill(0.0);
}

void Conv2d::register_params(ParamRegistry& reg, const std::string& prefix) {
  pid_w = reg.add(prefix + ".w", &w);
  if (has_bias) pid_b = reg.add(prefix + ".b", &b);
}

std::pair<int, int> Conv2d::out_dims(int hin, int win) const {
  return {(hin + 2 * pad - k) / stride + 1, (win + 2 * pad - k) / stride + 1};
}

namespace {

void im2col(const Tensor& x, int k, int stride, int pad, int hout, int wout,
            Eigen::MatrixXd& cols) {
  const int kk = k * k;
  cols.resize(static_cast<Eigen::Index>(x.c) * kk, static_cast<Eigen::Index>(hout) * wout);
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int row = ci * kk + ky * k + kx;
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy * stride - pad + ky;
          const bool y_ok = iy >= 0 && iy < x.h;
          for (int ox = 0; ox < wout; ++ox) {
            const int ix = ox * stride - pad + kx;
            cols(row, static_cast<Eigen::Index>(oy) * wout + ox) =
                (y_ok && ix >= 0 && ix < x.w) ? x.at(ci, iy, ix) : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const Eigen::MatrixXd& cols, int k, int stride, int pad, int hout, int wout,
            Tensor& dx) {
  const int kk = k * k;
  for (int ci = 0; ci < dx.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int row = ci * kk + ky * k + kx;
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= dx.h) continue;
          for (int ox = 0; ox < wout; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= dx.w) continue;
            dx.at(ci, iy, ix) += cols(row, static_cast<Eigen::Index>(oy) * wout + ox);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
  require(x.c == cin, "Conv2d: input channel mismatch");
  auto [hout, wout] = out_dims(x.h, x.w);
  require(hout > 0 && wout > 0, "Conv2d: input smaller than kernel");

  Cache local;
  Cache& c = cache ? *cache : local;
  c.hin = x.h;
  c.win = x.w;
  c.hout = hout;
  c.wout = wout;
  im2col(x, k, stride, pad, hout, wout, c.cols);

  Tensor y(cout, hout, wout);
  Eigen::Map<const RowMat> wm(w.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
  Eigen::Map<RowMat> ym(y.data(), cout, static_cast<Eigen::Index>(hout) * wout);
  ym.noalias() = wm * c.cols;
  if (has_bias) {
    for (int co = 0; co < cout; ++co) ym.row(co).array() += b.v[co];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, const Cache& c, GradStore& gs, bool need_dx) const {
  const Eigen::Index p = static_cast<Eigen::Index>(c.hout) * c.wout;
  Eigen::Map<const RowMat> dym(dy.data(), cout, p);

  Eigen::Map<RowMat> gw(gs[pid_w].data(), cout, static_cast<Eigen::Index>(cin) * k * k);
  gw.noalias() += dym * c.cols.transpose();
  if (has_bias) {
    Tensor& gb = gs[pid_b];
    for (int co = 0; co < cout; ++co) gb.v[co] += dym.row(co).sum();
  }

  Tensor dx;
  if (need_dx) {
    Eigen::Map<const RowMat> wm(w.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    Eigen::MatrixXd dcols = wm.transpose() * dym;
    dx = Tensor(cin, c.hin, c.win);
    col2im(dcols, k, stride, pad, c.hout, c.wout, dx);
  }
  return dx;
}

long long Conv2d::param_count() const {
  return static_cast<long long>(w.size()) + (has_bias ? static_cast<long long>(b.size()) : 0);
}

LayerDesc Conv2d::describe(int hin, int win) const {
  auto [hout, wout] = out_dims(hin, win);
  return {"conv", cin, cout, k, hout, wout, has_bias};
}

DepthwiseConv2d::DepthwiseConv2d(int channels_, int k_, int stride_)
    : channels(channels_), k(k_), stride(stride_), pad(k_ / 2),
      w(channels_, k_, k_), b(channels_, 1, 1) {}

void DepthwiseConv2d::init(Rng& rng) {
  kaiming_normal_init(w, k * k, rng);
  b.fill(0.0);
}

void DepthwiseConv2d::register_params(ParamRegistry& reg, const std::string& prefix) {
  pid_w = reg.add(prefix + ".w", &w);
  pid_b = reg.add(prefix + ".b", &b);
}

std::pair<int, int> DepthwiseConv2d::out_dims(int hin, int win) const {
  return {(hin + 2 * pad - k) / stride + 1, (win + 2 * pad - k) / stride + 1};
}

Tensor DepthwiseConv2d::forward(const Tensor& x, Cache* cache) const {
  require(x.c == channels, "DepthwiseConv2d: input channel mismatch");
  auto [hout, wout] = out_dims(x.h, x.w);
  if (cache) cache->x = x;

  Tensor y(channels, hout, wout);
  for (int ci = 0; ci < channels; ++ci) {
    for (int oy = 0; oy < hout; ++oy) {
      for (int ox = 0; ox < wout; ++ox) {
        double acc = b.v[ci];
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= x.w) continue;
            acc += w.at(ci, ky, kx) * x.at(ci, iy, ix);
          }
        }
        y.at(ci, oy, ox) = acc;
      }
    }
  }
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& dy, const Cache& c, GradStore& gs,
                                 bool need_dx) const {
  const Tensor& x = c.x;
  Tensor dx;
  if (need_dx) dx = Tensor(channels, x.h, x.w);
  Tensor& gw = gs[pid_w];
  Tensor& gb = gs[pid_b];

  for (int ci = 0; ci < channels; ++ci) {
    for (int oy = 0; oy < dy.h; ++oy) {
      for (int ox = 0; ox < dy.w; ++ox) {
        const double g = dy.at(ci, oy, ox);
        gb.v[ci] += g;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= x.w) continue;
            gw.at(ci, ky, kx) += g * x.at(ci, iy, ix);
            if (need_dx) dx.at(ci, iy, ix) += g * w.at(ci, ky, kx);
          }
        }
      }
    }
  }
  return dx;
}

long long DepthwiseConv2d::param_count() const {
  return static_cast<long long>(w.size() + b.size());
}

LayerDesc DepthwiseConv2d::describe(int hin, int win) const {
  auto [hout, wout] = out_dims(hin, win);
  return {"dwconv", channels, channels, k, hout, wout, true};
}

ChannelAttention::ChannelAttention(int channels_, int reduction_)
    : channels(channels_), reduction(reduction_) {
  require(reduction_ >= 1, "ChannelAttention: reduction must be >= 1");
  if (channels_ % reduction_ != 0)
    fail_invalid("ChannelAttention: reduction " + std::to_string(reduction_) +
                 " does not divide channel count " + std::to_string(channels_));
  fc1 = Conv2d(channels_, channels_ / reduction_, 1, 1, 0, true);
  fc2 = Conv2d(channels_ / reduction_, channels_, 1, 1, 0, true);
}

void ChannelAttention::init(Rng& rng) {
  fc1.init(rng);
  fc2.init(rng);
}

void ChannelAttention::register_params(ParamRegistry& reg, const std::string& prefix) {
  fc1.register_params(reg, prefix + ".fc1");
  fc2.register_params(reg, prefix + ".fc2");
}

Tensor ChannelAttention::forward(const Tensor& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = x;
  c.pooled = global_avg_pool(x);
  c.hidden = relu(fc1.forward(c.pooled, &c.c1));
  c.gate = sigmoid(fc2.forward(c.hidden, &c.c2));

  Tensor y = Tensor::zeros_like(x);
  const size_t hw = static_cast<size_t>(x.h) * x.w;
  for (int ci = 0; ci < x.c; ++ci) {
    const double g = c.gate.v[ci];
    for (size_t i = 0; i < hw; ++i) y.v[ci * hw + i] = x.v[ci * hw + i] * g;
  }
  return y;
}

Tensor ChannelAttention::backward(const Tensor& dy, const Cache& c, GradStore& gs) const {
  const size_t hw = static_cast<size_t>(dy.h) * dy.w;
  Tensor dx = Tensor::zeros_like(dy);
  Tensor dgate(channels, 1, 1);
  for (int ci = 0; ci < channels; ++ci) {
    const double g = c.gate.v[ci];
    double acc = 0.0;
    for (size_t i = 0; i < hw; ++i) {
      const size_t idx = ci * hw + i;
      acc += dy.v[idx] * c.x.v[idx];
      dx.v[idx] = dy.v[idx] * g;
    }
    // through the sigmoid
    dgate.v[ci] = acc * g * (1.0 - g);
  }

  Tensor dhidden = fc2.backward(dgate, c.c2, gs);
  relu_backward_inplace(dhidden, c.hidden);
  Tensor dpooled = fc1.backward(dhidden, c.c1, gs);

  const double inv_hw = 1.0 / static_cast<double>(hw);
  for (int ci = 0; ci < channels; ++ci) {
    const double d = dpooled.v[ci] * inv_hw;
    for (size_t i = 0; i < hw; ++i) dx.v[ci * hw + i] += d;
  }
  return dx;
}

long long ChannelAttention::param_count() const {
  return fc1.param_count() + fc2.param_count();
}

void ChannelAttention::describe(int h, int w, std::vector<LayerDesc>& out) const {
  out.push_back({"gap", channels, channels, 0, h, w, false});
  out.push_back({"linear", channels, channels / reduction, 0, 1, 1, true});
  out.push_back({"relu", 0, 0, 0, 1, 1, false});
  out.push_back({"linear", channels / reduction, channels, 0, 1, 1, true});
  out.push_back({"sigmoid", 0, 0, 0, 1, 1, false});
  out.push_back({"scale", channels, channels, 0, h, w, false});
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v) v = v > 0 ? v : 0.0;
  return y;
}

void relu_backward_inplace(Tensor& dy, const Tensor& y) {
  for (size_t i = 0; i < dy.size(); ++i)
    if (y.v[i] <= 0.0) dy.v[i] = 0.0;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  Tensor z(x.c, 1, 1);
  const size_t hw = static_cast<size_t>(x.h) * x.w;
  for (int ci = 0; ci < x.c; ++ci) {
    double acc = 0.0;
    for (size_t i = 0; i < hw; ++i) acc += x.v[ci * hw + i];
    z.v[ci] = acc / static_cast<double>(hw);
  }
  return z;
}

Tensor pixel_shuffle(const Tensor& x, int r) {
  require(x.c % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
  const int co = x.c / (r * r);
  Tensor y(co, x.h * r, x.w * r);
  for (int ci = 0; ci < co; ++ci)
    for (int oy = 0; oy < y.h; ++oy)
      for (int ox = 0; ox < y.w; ++ox)
        y.at(ci, oy, ox) = x.at(ci * r * r + (oy % r) * r + (ox % r), oy / r, ox / r);
  return y;
}

Tensor pixel_shuffle_backward(const Tensor& dy, int r) {
  Tensor dx(dy.c * r * r, dy.h / r, dy.w / r);
  for (int ci = 0; ci < dy.c; ++ci)
    for (int oy = 0; oy < dy.h; ++oy)
      for (int ox = 0; ox < dy.w; ++ox)
        dx.at(ci * r * r + (oy % r) * r + (ox % r), oy / r, ox / r) = dy.at(ci, oy, ox);
  return dx;
}

}  // namespace srdet
