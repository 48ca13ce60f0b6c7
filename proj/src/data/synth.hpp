#pragma once

#include <cstdint>
#include <vector>

#include "anchors/anchors.hpp"
#include "common/tensor.hpp"

namespace srdet {

// One training example: a (possibly degraded) network input, its boxes, and
// the clean image the reconstruction head regresses toward. Fresh samples
// have input_image == sr_target; augmentation introduces the asymmetry.
struct TrainSample {
  Tensor input_image;
  std::vector<Box> gt_boxes;
  Tensor sr_target;
};

struct SynthConfig {
  int n = 500;
  int image_size = 96;
  int faces_min = 1;
  int faces_max = 3;
  double scale_min = 8;    // face box height in pixels
  double scale_max = 48;
  double small_fraction = 0.5;  // fraction of faces drawn at small scale
  double small_max = 16;        // upper bound of the small-scale band
  double overlap_budget = 0.2;  // max IoU tolerated between placed faces
  uint64_t seed = 0;

  void validate() const;
};

// Procedural face-like scenes: elliptical head with eye/mouth blobs over a
// textured background, annotated with tight integer boxes. Deterministic per
// (seed, index).
TrainSample synth_sample(const SynthConfig& cfg, int index);
std::vector<TrainSample> synth_dataset(const SynthConfig& cfg);

}  // namespace srdet
