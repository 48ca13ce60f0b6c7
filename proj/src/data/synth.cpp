#include "data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace srdet {

void SynthConfig::validate() const {
  require(n >= 1, "synth config: n must be >= 1");
  require(image_size >= 16, "synth config: image_size must be >= 16");
  require(faces_min >= 0, "synth config: faces_min must be >= 0");
  require(faces_max >= faces_min, "synth config: faces_max must be >= faces_min");
  require(scale_min >= 4.0, "synth config: scale_min must be >= 4");
  require(scale_max >= scale_min, "synth config: scale_max must be >= scale_min");
  require(scale_max <= image_size - 2, "synth config: scale_max must fit inside the image");
  require(small_fraction >= 0.0 && small_fraction <= 1.0,
          "synth config: small_fraction must lie in [0,1]");
  require(small_max >= scale_min, "synth config: small_max must be >= scale_min");
  require(overlap_budget >= 0.0 && overlap_budget < 1.0,
          "synth config: overlap_budget must lie in [0,1)");
}

namespace {

// soft-edged ellipse, alpha-blended; ~1px falloff at the rim
void fill_ellipse(Tensor& img, double cx, double cy, double ax, double ay, double value) {
  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - ax - 1)));
  const int x_hi = std::min(img.w - 1, static_cast<int>(std::ceil(cx + ax + 1)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(cy - ay - 1)));
  const int y_hi = std::min(img.h - 1, static_cast<int>(std::ceil(cy + ay + 1)));
  const double edge = std::min(ax, ay);
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double dx = (x + 0.5 - cx) / ax;
      const double dy = (y + 0.5 - cy) / ay;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double alpha = std::clamp((1.0 - r) * edge + 0.5, 0.0, 1.0);
      if (alpha > 0.0) {
        double& p = img.at(0, y, x);
        p = p * (1.0 - alpha) + value * alpha;
      }
    }
  }
}

void render_face(Tensor& img, const Box& b, Rng& rng) {
  const double skin = rng.uniform(0.68, 0.88);
  const double w = b.width(), h = b.height();
  const double cx = b.cx(), cy = b.cy();

  fill_ellipse(img, cx, cy, w / 2.0, h / 2.0, skin);

  const double eye_val = skin - rng.uniform(0.35, 0.5);
  const double eye_r = std::max(0.5, 0.075 * h);
  const double eye_dx = 0.20 * w;
  const double eye_y = cy - 0.15 * h;
  fill_ellipse(img, cx - eye_dx, eye_y, eye_r, eye_r, eye_val);
  fill_ellipse(img, cx + eye_dx, eye_y, eye_r, eye_r, eye_val);

  const double mouth_val = skin - rng.uniform(0.25, 0.4);
  fill_ellipse(img, cx, cy + 0.22 * h, 0.42 * (w / 2.0), std::max(0.5, 0.06 * h), mouth_val);
}

}  // namespace

TrainSample synth_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0x73796e7468ULL, static_cast<uint64_t>(index)));
  const int S = cfg.image_size;
  Tensor img(1, S, S);

  // textured background: base tone, a low-frequency field, light clutter, speckle
  const double base = rng.uniform(0.18, 0.42);
  constexpr int kGrid = 5;
  double grid[kGrid][kGrid];
  for (auto& row : grid)
    for (double& g : row) g = rng.uniform(-0.08, 0.08);
  for (int y = 0; y < S; ++y) {
    const double gy = static_cast<double>(y) / (S - 1) * (kGrid - 1);
    const int iy = std::min(kGrid - 2, static_cast<int>(gy));
    const double fy = gy - iy;
    for (int x = 0; x < S; ++x) {
      const double gx = static_cast<double>(x) / (S - 1) * (kGrid - 1);
      const int ix = std::min(kGrid - 2, static_cast<int>(gx));
      const double fx = gx - ix;
      const double field = grid[iy][ix] * (1 - fy) * (1 - fx) + grid[iy][ix + 1] * (1 - fy) * fx +
                           grid[iy + 1][ix] * fy * (1 - fx) + grid[iy + 1][ix + 1] * fy * fx;
      img.at(0, y, x) = base + field;
    }
  }
  const int n_rects = rng.uniform_int(4);
  for (int r = 0; r < n_rects; ++r) {
    const int rw = S / 8 + rng.uniform_int(std::max(1, S / 4));
    const int rh = S / 8 + rng.uniform_int(std::max(1, S / 4));
    const int rx = rng.uniform_int(std::max(1, S - rw));
    const int ry = rng.uniform_int(std::max(1, S - rh));
    const double delta = rng.uniform(-0.12, 0.12);
    for (int y = ry; y < std::min(S, ry + rh); ++y)
      for (int x = rx; x < std::min(S, rx + rw); ++x) img.at(0, y, x) += delta;
  }
  for (double& p : img.v) p += rng.uniform(-0.02, 0.02);

  const int n_faces = cfg.faces_min + rng.uniform_int(cfg.faces_max - cfg.faces_min + 1);
  std::vector<Box> boxes;
  for (int fi = 0; fi < n_faces; ++fi) {
    const double small_hi = std::min(cfg.small_max, cfg.scale_max);
    const bool small = rng.bernoulli(cfg.small_fraction);
    const double s = small ? rng.uniform(cfg.scale_min, small_hi)
                           : rng.uniform(small_hi, cfg.scale_max);
    const int bh = static_cast<int>(std::lround(s));
    const int bw = std::max(3, static_cast<int>(std::lround(0.78 * s)));

    bool placed = false;
    for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
      const int x1 = 1 + rng.uniform_int(S - bw - 2);
      const int y1 = 1 + rng.uniform_int(S - bh - 2);
      Box b{static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x1 + bw),
            static_cast<double>(y1 + bh)};
      bool ok = true;
      for (const Box& prev : boxes)
        if (iou(b, prev) > cfg.overlap_budget) {
          ok = false;
          break;
        }
      if (ok) {
        render_face(img, b, rng);
        boxes.push_back(b);
        placed = true;
      }
    }
    if (!placed)
      fail_runtime("synth_sample: infeasible placement, could not fit face " +
                   std::to_string(fi) + " of " + std::to_string(n_faces) +
                   " within the overlap budget");
  }

  for (double& p : img.v) p = std::clamp(p, 0.0, 1.0);

  TrainSample sample;
  sample.input_image = img;
  sample.sr_target = img;
  sample.gt_boxes = std::move(boxes);
  return sample;
}

std::vector<TrainSample> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<TrainSample> out;
  out.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) out.push_back(synth_sample(cfg, i));
  return out;
}

}  // namespace srdet
