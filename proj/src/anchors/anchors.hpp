#pragma once

#include <array>
#include <vector>

namespace srdet {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double score = 0;
  int label = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
};

struct LevelSpec {
  int stride = 0;
  int base_size = 0;
  int grid_h = 0;
  int grid_w = 0;
};

// Dense square anchors, one per grid cell per level, flat in level order and
// row-major within a level. Anchors are not clipped to the image.
struct AnchorSet {
  std::vector<LevelSpec> levels;
  std::vector<Box> boxes;
};

AnchorSet generate_anchors(int image_h, int image_w, const std::vector<int>& sizes,
                           const std::vector<int>& strides);

double iou(const Box& a, const Box& b);

// Per-anchor assignment: >= 0 is a ground-truth index, kNegative / kIgnore otherwise.
inline constexpr int kNegative = -1;
inline constexpr int kIgnore = -2;

struct MatchResult {
  std::vector<int> assignment;
  // Encoded offsets, valid only where assignment[i] >= 0.
  std::vector<std::array<double, 4>> regression_targets;

  int num_positive() const {
    int n = 0;
    for (int a : assignment) n += (a >= 0);
    return n;
  }
};

// Positive: IoU >= hi against some gt, or the anchor is a gt's best match
// (ties to the lowest anchor index). Negative: max IoU < lo. Ignore otherwise.
MatchResult match_anchors(const AnchorSet& anchors, const std::vector<Box>& gts, double hi,
                          double lo);

// Center offsets normalized by anchor size, log size ratios.
std::array<double, 4> encode_box(const Box& anchor, const Box& gt);
Box decode_box(const Box& anchor, const std::array<double, 4>& deltas);

// Greedy descending-score suppression. Ties broken by input order.
std::vector<Box> nms(const std::vector<Box>& dets, double iou_thresh);

}  // namespace srdet
