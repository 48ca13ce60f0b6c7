#include "losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"

namespace srdet {

namespace {
constexpr double kProbClamp = 1e-6;
}

double focal_loss(const std::vector<double>& p, const MatchResult& match, const FocalParams& fp,
                  std::vector<double>* d_p) {
  if (p.size() != match.assignment.size())
    fail_invalid("focal_loss: probability count does not match assignment count");
  require(fp.alpha_t > 0.0 && fp.alpha_t <= 1.0, "focal_loss: alpha_t must lie in (0,1]");
  require(fp.gamma >= 0.0, "focal_loss: gamma must be >= 0");

  const double norm = std::max(1, match.num_positive());
  if (d_p) d_p->assign(p.size(), 0.0);

  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (std::isnan(p[i])) fail_invalid("focal_loss: NaN probability at anchor " + std::to_string(i));
    const int tag = match.assignment[i];
    if (tag == kIgnore) continue;
    const bool positive = tag >= 0;
    const double raw_pt = positive ? p[i] : 1.0 - p[i];
    const bool clamped = raw_pt < kProbClamp || raw_pt > 1.0 - kProbClamp;
    const double pt = std::clamp(raw_pt, kProbClamp, 1.0 - kProbClamp);
    const double one_m = 1.0 - pt;
    sum += -fp.alpha_t * std::pow(one_m, fp.gamma) * std::log(pt);
    if (d_p && !clamped) {
      // d/d_pt of -a(1-pt)^g log(pt); the gamma*... term vanishes for g == 0
      double g = std::pow(one_m, fp.gamma) / pt;
      if (fp.gamma > 0.0) g -= fp.gamma * std::pow(one_m, fp.gamma - 1.0) * std::log(pt);
      g *= -fp.alpha_t;
      (*d_p)[i] = (positive ? g : -g) / norm;
    }
  }
  return sum / norm;
}

double smooth_l1_term(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_term_grad(double x) {
  return std::abs(x) < 1.0 ? x : (x > 0 ? 1.0 : -1.0);
}

double smooth_l1_loss(const std::vector<std::array<double, 4>>& pred,
                      const std::vector<std::array<double, 4>>& target,
                      std::vector<std::array<double, 4>>* d_pred) {
  if (pred.size() != target.size())
    fail_invalid("smooth_l1_loss: pred/target row count mismatch");
  const double norm = std::max<size_t>(1, pred.size());
  if (d_pred) d_pred->assign(pred.size(), {0, 0, 0, 0});
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      const double x = pred[i][k] - target[i][k];
      sum += smooth_l1_term(x);
      if (d_pred) (*d_pred)[i][k] = smooth_l1_term_grad(x) / norm;
    }
  }
  return sum / norm;
}

double sr_l1_loss(const Tensor& recon, const Tensor& target, Tensor* d_recon) {
  if (!recon.same_shape(target)) fail_invalid("sr_l1_loss: shape mismatch");
  require(recon.size() > 0, "sr_l1_loss: empty tensors");
  const double norm = static_cast<double>(recon.size());
  if (d_recon) *d_recon = Tensor::zeros_like(recon);
  double sum = 0.0;
  for (size_t i = 0; i < recon.size(); ++i) {
    const double d = recon.v[i] - target.v[i];
    sum += std::abs(d);
    if (d_recon) d_recon->v[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / norm;
  }
  return sum / norm;
}

LossReport total_loss(double l_focal, double l_smooth, double l_sr, double phi) {
  if (phi < 0.0) fail_invalid("total_loss: phi must be >= 0");
  for (double v : {l_focal, l_smooth, l_sr}) {
    if (!std::isfinite(v)) fail_invalid("total_loss: non-finite loss component");
    if (v < 0.0) fail_invalid("total_loss: negative loss component");
  }
  LossReport r;
  r.l_focal = l_focal;
  r.l_smooth = l_smooth;
  r.l_sr = l_sr;
  r.phi = phi;
  r.l_ef = l_focal + l_smooth + phi * l_sr;
  return r;
}

}  // namespace srdet
