#pragma once

#include <array>
#include <vector>

#include "anchors/anchors.hpp"
#include "common/tensor.hpp"

namespace srdet {

struct FocalParams {
  double alpha_t = 0.25;
  double gamma = 2.0;
};

struct LossReport {
  double l_focal = 0;
  double l_smooth = 0;
  double l_sr = 0;
  double phi = 0;
  double l_ef = 0;
};

// Classification focal loss over non-ignored anchors, normalized by the
// number of positives (min 1). p holds the per-anchor foreground probability,
// aligned with match.assignment; p_t is p for positives and 1-p for negatives.
// Probabilities are clamped to [1e-6, 1-1e-6] before the log.
// If d_p is non-null it receives d(loss)/d(p) per anchor (zero for ignored).
double focal_loss(const std::vector<double>& p, const MatchResult& match, const FocalParams& fp,
                  std::vector<double>* d_p = nullptr);

// Smooth L1 over the positive anchors' encoded offsets, summed over the four
// coordinates and normalized by the row count (min 1).
double smooth_l1_loss(const std::vector<std::array<double, 4>>& pred,
                      const std::vector<std::array<double, 4>>& target,
                      std::vector<std::array<double, 4>>* d_pred = nullptr);

// Elementwise pieces, exposed for the boundary tests.
double smooth_l1_term(double x);
double smooth_l1_term_grad(double x);

// Mean absolute difference over every spatial position and channel.
double sr_l1_loss(const Tensor& recon, const Tensor& target, Tensor* d_recon = nullptr);

LossReport total_loss(double l_focal, double l_smooth, double l_sr, double phi);

}  // namespace srdet
