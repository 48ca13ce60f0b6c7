#include "data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "common/error.hpp"

namespace srdet {

void AugmentConfig::validate() const {
  require(blur_prob >= 0.0 && blur_prob <= 1.0, "augment config: blur_prob must lie in [0,1]");
  require(hflip_prob >= 0.0 && hflip_prob <= 1.0, "augment config: hflip_prob must lie in [0,1]");
  require(sigma_lo >= 0.0, "augment config: sigma_lo must be >= 0");
  require(sigma_hi >= sigma_lo, "augment config: sigma range is inverted");
  require(brightness >= 0.0, "augment config: brightness must be >= 0");
  require(contrast >= 0.0 && contrast < 1.0, "augment config: contrast must lie in [0,1)");
  require(crop_lo > 0.0 && crop_lo <= crop_hi && crop_hi <= 1.0,
          "augment config: crop range must satisfy 0 < lo <= hi <= 1");
}

namespace {

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

Tensor gaussian_blur(const Tensor& image, double sigma) {
  if (sigma < 0.0) fail_invalid("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return image;

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  Tensor tmp = Tensor::zeros_like(image);
  for (int c = 0; c < image.c; ++c)
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * image.at(c, y, reflect_index(x + i, image.w));
        tmp.at(c, y, x) = acc;
      }
  Tensor out = Tensor::zeros_like(image);
  for (int c = 0; c < image.c; ++c)
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp.at(c, reflect_index(y + i, image.h), x);
        out.at(c, y, x) = acc;
      }
  return out;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, "resize_bilinear: output dims must be positive");
  if (out_h == image.h && out_w == image.w) return image;
  Tensor out(image.c, out_h, out_w);
  const double sy = static_cast<double>(image.h) / out_h;
  const double sx = static_cast<double>(image.w) / out_w;
  for (int c = 0; c < image.c; ++c)
    for (int y = 0; y < out_h; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.h - 1.0);
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, image.h - 1);
      const double wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.w - 1.0);
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, image.w - 1);
        const double wx = fx - x0;
        out.at(c, y, x) = image.at(c, y0, x0) * (1 - wy) * (1 - wx) +
                          image.at(c, y0, x1) * (1 - wy) * wx +
                          image.at(c, y1, x0) * wy * (1 - wx) + image.at(c, y1, x1) * wy * wx;
      }
    }
  return out;
}

namespace {

struct CropChoice {
  int side = 0, x0 = 0, y0 = 0;
  std::vector<Box> boxes;
  bool keep = false;
};

// Boxes survive a crop if at least half their area remains; they are clipped
// to the crop window.
CropChoice try_crop(const TrainSample& s, int side, int x0, int y0) {
  CropChoice c;
  c.side = side;
  c.x0 = x0;
  c.y0 = y0;
  for (const Box& b : s.gt_boxes) {
    Box nb;
    nb.x1 = std::clamp(b.x1 - x0, 0.0, static_cast<double>(side));
    nb.y1 = std::clamp(b.y1 - y0, 0.0, static_cast<double>(side));
    nb.x2 = std::clamp(b.x2 - x0, 0.0, static_cast<double>(side));
    nb.y2 = std::clamp(b.y2 - y0, 0.0, static_cast<double>(side));
    if (nb.area() >= 0.5 * b.area()) c.boxes.push_back(nb);
  }
  c.keep = s.gt_boxes.empty() || !c.boxes.empty();
  return c;
}

Tensor crop_image(const Tensor& img, int side, int x0, int y0) {
  Tensor out(img.c, side, side);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace

TrainSample augment(const TrainSample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  require(sample.input_image.same_shape(sample.sr_target),
          "augment: input and sr_target shapes differ");
  TrainSample out = sample;
  const int H = sample.input_image.h, W = sample.input_image.w;
  require(H == W, "augment: only square images are supported");

  // crop + resize back, retried so we do not discard every box
  const int max_retries = 8;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const double scale = rng.uniform(cfg.crop_lo, cfg.crop_hi);
    const int side = std::max(8, static_cast<int>(std::lround(scale * H)));
    if (side >= H) break;  // identity crop
    const int x0 = rng.uniform_int(W - side + 1);
    const int y0 = rng.uniform_int(H - side + 1);
    CropChoice choice = try_crop(out, side, x0, y0);
    if (!choice.keep) continue;
    Tensor in_c = crop_image(out.input_image, side, x0, y0);
    Tensor tg_c = crop_image(out.sr_target, side, x0, y0);
    out.input_image = resize_bilinear(in_c, H, W);
    out.sr_target = resize_bilinear(tg_c, H, W);
    const double f = static_cast<double>(H) / side;
    out.gt_boxes = std::move(choice.boxes);
    for (Box& b : out.gt_boxes) {
      b.x1 *= f;
      b.y1 *= f;
      b.x2 *= f;
      b.y2 *= f;
    }
    break;
  }

  if (cfg.hflip_prob > 0.0 && rng.bernoulli(cfg.hflip_prob)) {
    for (Tensor* t : {&out.input_image, &out.sr_target}) {
      for (int c = 0; c < t->c; ++c)
        for (int y = 0; y < t->h; ++y)
          for (int x = 0; x < t->w / 2; ++x) std::swap(t->at(c, y, x), t->at(c, y, t->w - 1 - x));
    }
    for (Box& b : out.gt_boxes) {
      const double x1 = b.x1;
      b.x1 = W - b.x2;
      b.x2 = W - x1;
    }
  }

  // photometric jitter degrades the input only
  if (cfg.brightness > 0.0 || cfg.contrast > 0.0) {
    const double delta = rng.uniform(-cfg.brightness, cfg.brightness);
    const double factor = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
    for (double& p : out.input_image.v)
      p = std::clamp((p - 0.5) * factor + 0.5 + delta, 0.0, 1.0);
  }

  if (cfg.blur_prob > 0.0 && rng.bernoulli(cfg.blur_prob)) {
    const double sigma = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
    out.input_image = gaussian_blur(out.input_image, sigma);
    for (double& p : out.input_image.v) p = std::clamp(p, 0.0, 1.0);
  }

  return out;
}

}  // namespace srdet
