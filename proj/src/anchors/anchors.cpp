#include "anchors/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "common/error.hpp"

namespace srdet {

AnchorSet generate_anchors(int image_h, int image_w, const std::vector<int>& sizes,
                           const std::vector<int>& strides) {
  if (sizes.size() != strides.size())
    fail_invalid("generate_anchors: sizes and strides length mismatch (" +
                 std::to_string(sizes.size()) + " vs " + std::to_string(strides.size()) + ")");
  require(!sizes.empty(), "generate_anchors: empty size list");
  for (int s : strides) {
    require(s > 0, "generate_anchors: strides must be positive");
    if (image_h % s != 0 || image_w % s != 0)
      fail_invalid("generate_anchors: image " + std::to_string(image_w) + "x" +
                   std::to_string(image_h) + " not divisible by stride " + std::to_string(s));
  }

  AnchorSet out;
  for (size_t li = 0; li < sizes.size(); ++li) {
    LevelSpec lvl;
    lvl.stride = strides[li];
    lvl.base_size = sizes[li];
    lvl.grid_h = image_h / lvl.stride;
    lvl.grid_w = image_w / lvl.stride;
    const double half = 0.5 * lvl.base_size;
    for (int i = 0; i < lvl.grid_h; ++i) {
      for (int j = 0; j < lvl.grid_w; ++j) {
        const double cx = lvl.stride * (j + 0.5);
        const double cy = lvl.stride * (i + 0.5);
        out.boxes.push_back({cx - half, cy - half, cx + half, cy + half});
      }
    }
    out.levels.push_back(lvl);
  }
  return out;
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

MatchResult match_anchors(const AnchorSet& anchors, const std::vector<Box>& gts, double hi,
                          double lo) {
  if (lo > hi) fail_invalid("match_anchors: lo threshold exceeds hi");
  require(lo >= 0.0 && hi <= 1.0, "match_anchors: thresholds must lie in [0,1]");

  const size_t n = anchors.boxes.size();
  MatchResult res;
  res.assignment.assign(n, kNegative);
  res.regression_targets.assign(n, {0, 0, 0, 0});
  if (gts.empty()) return res;

  std::vector<double> best_iou(n, 0.0);
  std::vector<int> best_gt(n, -1);
  std::vector<double> gt_best_iou(gts.size(), 0.0);
  std::vector<size_t> gt_best_anchor(gts.size(), 0);

  for (size_t ai = 0; ai < n; ++ai) {
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      const double v = iou(anchors.boxes[ai], gts[gi]);
      if (v > best_iou[ai]) {
        best_iou[ai] = v;
        best_gt[ai] = static_cast<int>(gi);
      }
      if (v > gt_best_iou[gi]) {  // strict: ties keep the lowest anchor index
        gt_best_iou[gi] = v;
        gt_best_anchor[gi] = ai;
      }
    }
  }

  for (size_t ai = 0; ai < n; ++ai) {
    if (best_iou[ai] >= hi)
      res.assignment[ai] = best_gt[ai];
    else if (best_iou[ai] >= lo)
      res.assignment[ai] = kIgnore;
  }

  // Force each gt's best anchor positive so no gt with any overlap goes
  // unmatched. If two gts claim one anchor, the higher IoU wins.
  std::vector<double> forced_iou(n, -1.0);
  for (size_t gi = 0; gi < gts.size(); ++gi) {
    if (gt_best_iou[gi] <= 0.0) continue;
    const size_t ai = gt_best_anchor[gi];
    if (gt_best_iou[gi] > forced_iou[ai]) {
      forced_iou[ai] = gt_best_iou[gi];
      res.assignment[ai] = static_cast<int>(gi);
    }
  }

  for (size_t ai = 0; ai < n; ++ai)
    if (res.assignment[ai] >= 0)
      res.regression_targets[ai] = encode_box(anchors.boxes[ai], gts[res.assignment[ai]]);

  return res;
}

std::array<double, 4> encode_box(const Box& anchor, const Box& gt) {
  require(anchor.width() > 0 && anchor.height() > 0, "encode_box: anchor has no area");
  if (gt.width() <= 0 || gt.height() <= 0) fail_invalid("encode_box: gt has non-positive area");
  return {(gt.cx() - anchor.cx()) / anchor.width(), (gt.cy() - anchor.cy()) / anchor.height(),
          std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

Box decode_box(const Box& anchor, const std::array<double, 4>& deltas) {
  const double cx = anchor.cx() + deltas[0] * anchor.width();
  const double cy = anchor.cy() + deltas[1] * anchor.height();
  const double w = anchor.width() * std::exp(deltas[2]);
  const double h = anchor.height() * std::exp(deltas[3]);
  Box out;
  out.x1 = cx - 0.5 * w;
  out.y1 = cy - 0.5 * h;
  out.x2 = cx + 0.5 * w;
  out.y2 = cy + 0.5 * h;
  return out;
}

std::vector<Box> nms(const std::vector<Box>& dets, double iou_thresh) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
  std::vector<Box> kept;
  for (size_t idx : order) {
    bool suppressed = false;
    for (const Box& k : kept) {
      if (iou(dets[idx], k) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

}  // namespace srdet
