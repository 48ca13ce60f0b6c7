#pragma once

#include <string>
#include <vector>

#include "anchors/anchors.hpp"

namespace srdet {

struct PRCurve {
  std::vector<double> thresholds;  // descending detection scores
  std::vector<double> precision;
  std::vector<double> recall;
  double ap = 0;
};

// Greedy score-descending matching, each gt used at most once, IoU >= thresh;
// AP is the all-point interpolated area under the precision envelope.
// Edge rule: no gts and no dets -> 1.0; no gts but dets -> 0.0.
PRCurve compute_ap(const std::vector<Box>& dets, const std::vector<Box>& gts, double iou_thresh);

struct DifficultyBands {
  double easy_min_h = 40;    // easy: height >= easy_min_h
  double medium_min_h = 20;  // medium: medium_min_h <= height < easy_min_h; hard: below
};

struct DifficultyPartition {
  std::vector<size_t> easy, medium, hard;
};

// Disjoint and exhaustive split of gt indices by pixel height.
DifficultyPartition partition_difficulty(const std::vector<Box>& gts,
                                         const DifficultyBands& bands);

struct SubsetEval {
  std::string subset;
  PRCurve curve;
  size_t n_gt = 0;
  size_t n_det = 0;  // detections scored for this subset (ignored ones excluded)
};

// Dataset-level AP per difficulty subset, pooled over images. Detections whose
// best qualifying match is a gt outside the subset are ignored rather than
// counted as false positives. Emits "all" plus the three subsets.
std::vector<SubsetEval> evaluate_subsets(const std::vector<std::vector<Box>>& dets,
                                         const std::vector<std::vector<Box>>& gts,
                                         const DifficultyBands& bands, double iou_thresh);

}  // namespace srdet
