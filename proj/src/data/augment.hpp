#pragma once

#include <cstdint>

#include "common/rng.hpp"
#include "data/synth.hpp"

namespace srdet {

struct AugmentConfig {
  double blur_prob = 0.5;
  double sigma_lo = 0.5, sigma_hi = 2.5;
  double brightness = 0.2;  // additive jitter, sampled from [-brightness, brightness]
  double contrast = 0.2;    // multiplicative jitter, sampled from [1-contrast, 1+contrast]
  double crop_lo = 0.6, crop_hi = 1.0;  // crop side as a fraction of the image side
  double hflip_prob = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

// Separable Gaussian convolution, kernel radius ceil(3*sigma), reflect
// padding, kernel normalized to sum 1. sigma == 0 is the identity.
Tensor gaussian_blur(const Tensor& image, double sigma);

// Geometric ops (crop+resize, hflip) hit input, target and boxes alike;
// photometric jitter and blur degrade the input only, leaving sr_target clean.
TrainSample augment(const TrainSample& sample, const AugmentConfig& cfg, Rng& rng);

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

}  // namespace srdet
