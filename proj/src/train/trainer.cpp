#include "train/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "common/error.hpp"

namespace srdet {

namespace {
constexpr uint64_t kShuffleTag = 0x7368756666ULL;
constexpr uint64_t kAugTag = 0x617567ULL;
}  // namespace

int worker_count(int jobs) {
  int w = 0;
  if (const char* env = std::getenv("SRFACE_NUM_WORKERS")) w = std::atoi(env);
  if (w <= 0) w = static_cast<int>(std::thread::hardware_concurrency());
  if (w <= 0) w = 1;
  return std::max(1, std::min(w, jobs));
}

Trainer::Trainer(Detector& model, const TrainConfig& tcfg, const AugmentConfig& acfg,
                 const MatchConfig& mcfg, const FocalParams& fp)
    : model_(model), tcfg_(tcfg), acfg_(acfg), mcfg_(mcfg), fp_(fp),
      opt_(model.params(Mode::train)), lr_(tcfg.lr0),
      best_loss_(std::numeric_limits<double>::infinity()) {
  tcfg_.validate();
  acfg_.validate();
  require(mcfg_.lo <= mcfg_.hi, "trainer: matching lo threshold exceeds hi");
}

LossReport Trainer::image_pass(const TrainSample& sample, GradStore& gs, double inv_batch) {
  Detector::Cache cache;
  DetectionOutputs out = model_.forward(sample.input_image, Mode::train, &cache);
  const AnchorSet& as = model_.anchors();

  std::vector<double> p;
  p.reserve(as.boxes.size());
  for (const Tensor& m : out.cls) p.insert(p.end(), m.v.begin(), m.v.end());

  const MatchResult match = match_anchors(as, sample.gt_boxes, mcfg_.hi, mcfg_.lo);

  std::vector<double> d_p;
  const double l_focal = focal_loss(p, match, fp_, &d_p);

  // gather predicted offsets at the positive anchors
  struct PosRef {
    size_t level, y, x;
  };
  std::vector<PosRef> refs;
  std::vector<std::array<double, 4>> pred, target;
  size_t base = 0;
  for (size_t li = 0; li < as.levels.size(); ++li) {
    const auto& lvl = as.levels[li];
    const size_t count = static_cast<size_t>(lvl.grid_h) * lvl.grid_w;
    for (size_t q = 0; q < count; ++q) {
      const size_t ai = base + q;
      if (match.assignment[ai] < 0) continue;
      const size_t y = q / lvl.grid_w, x = q % lvl.grid_w;
      refs.push_back({li, y, x});
      const Tensor& rm = out.reg[li];
      pred.push_back({rm.at(0, static_cast<int>(y), static_cast<int>(x)),
                      rm.at(1, static_cast<int>(y), static_cast<int>(x)),
                      rm.at(2, static_cast<int>(y), static_cast<int>(x)),
                      rm.at(3, static_cast<int>(y), static_cast<int>(x))});
      target.push_back(match.regression_targets[ai]);
    }
    base += count;
  }
  std::vector<std::array<double, 4>> d_pred;
  const double l_smooth = smooth_l1_loss(pred, target, &d_pred);

  double l_sr = 0.0;
  Tensor d_sr;
  bool use_sr_grad = false;
  if (out.has_sr) {
    l_sr = sr_l1_loss(out.sr_image, sample.sr_target, tcfg_.phi > 0.0 ? &d_sr : nullptr);
    use_sr_grad = tcfg_.phi > 0.0;
  }
  const LossReport report = total_loss(l_focal, l_smooth, l_sr, tcfg_.phi);

  // scatter output gradients, scaled so the batch mean is differentiated
  std::vector<Tensor> d_cls, d_reg;
  size_t flat = 0;
  for (const Tensor& m : out.cls) {
    Tensor d(m.c, m.h, m.w);
    for (size_t i = 0; i < d.size(); ++i) d.v[i] = d_p[flat++] * inv_batch;
    d_cls.push_back(std::move(d));
    d_reg.emplace_back(4, m.h, m.w);
  }
  for (size_t k = 0; k < refs.size(); ++k) {
    Tensor& d = d_reg[refs[k].level];
    for (int ch = 0; ch < 4; ++ch)
      d.at(ch, static_cast<int>(refs[k].y), static_cast<int>(refs[k].x)) =
          d_pred[k][ch] * inv_batch;
  }
  if (use_sr_grad) d_sr *= tcfg_.phi * inv_batch;

  model_.backward(cache, d_cls, d_reg, use_sr_grad ? &d_sr : nullptr, gs);
  return report;
}

LossReport Trainer::train_step(const std::vector<TrainSample>& batch) {
  require(!batch.empty(), "train_step: empty batch");
  const size_t n = batch.size();
  const double inv = 1.0 / static_cast<double>(n);
  const ParamRegistry& reg = model_.params(Mode::train);

  while (store_pool_.size() < n) {
    store_pool_.emplace_back();
    store_pool_.back().init(reg);
  }
  for (size_t i = 0; i < n; ++i) store_pool_[i].zero();

  std::vector<LossReport> reports(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> cursor{0};
  auto work = [&]() {
    for (size_t i; (i = cursor.fetch_add(1)) < n;) {
      try {
        reports[i] = image_pass(batch[i], store_pool_[i], inv);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = worker_count(static_cast<int>(n));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < workers; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (size_t i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  // reduce in image order so results do not depend on the worker count
  GradStore& grads = store_pool_[0];
  for (size_t i = 1; i < n; ++i) grads.add(store_pool_[i]);

  LossReport mean;
  mean.phi = tcfg_.phi;
  for (const LossReport& r : reports) {
    mean.l_focal += r.l_focal * inv;
    mean.l_smooth += r.l_smooth * inv;
    mean.l_sr += r.l_sr * inv;
  }
  mean.l_ef = mean.l_focal + mean.l_smooth + mean.phi * mean.l_sr;
  if (!std::isfinite(mean.l_ef))
    fail_runtime("train_step: non-finite loss, update aborted");

  double sq = 0.0;
  for (const Tensor& g : grads.g)
    for (double v : g.v) sq += v * v;
  if (!std::isfinite(sq)) fail_runtime("train_step: non-finite gradient, update aborted");
  const double norm = std::sqrt(sq);
  if (norm > tcfg_.clip_norm) grads.scale(tcfg_.clip_norm / norm);

  opt_.step(reg, grads, lr_, tcfg_.weight_decay);
  return mean;
}

void Trainer::save_state(const std::string& path, int completed_epochs, const FitOptions& opts,
                         double best_loss) const {
  TrainerState st;
  st.epoch = completed_epochs;
  st.lr = lr_;
  st.sched_best = sched_.best;
  st.sched_stall = sched_.stall;
  st.best_loss = best_loss;
  save_checkpoint(path, opts.config_json, st, model_.params(Mode::train), &opt_);
}

std::vector<EpochRecord> Trainer::fit(const std::vector<TrainSample>& dataset,
                                      const FitOptions& opts) {
  require(!dataset.empty(), "fit: empty dataset");
  for (const TrainSample& s : dataset)
    require(s.input_image.h == model_.pyramid_config().input_size &&
                s.input_image.w == model_.pyramid_config().input_size,
            "fit: sample size does not match the configured input size");

  int start_epoch = 0;
  if (!opts.resume_path.empty()) {
    Checkpoint ck = load_checkpoint(opts.resume_path);
    apply_checkpoint_params(ck, model_.params(Mode::train));
    if (ck.has_optimizer) apply_checkpoint_optimizer(ck, opt_);
    lr_ = ck.state.lr;
    sched_.best = ck.state.sched_best;
    sched_.stall = ck.state.sched_stall;
    best_loss_ = ck.state.best_loss;
    start_epoch = ck.state.epoch;
  } else {
    lr_ = tcfg_.lr0;
    sched_ = PlateauState{};
    best_loss_ = std::numeric_limits<double>::infinity();
    opt_ = AdamW(model_.params(Mode::train));
    history_.clear();
  }

  namespace fs = std::filesystem;
  std::ofstream log;
  std::string last_path, best_path;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    last_path = (fs::path(opts.out_dir) / "last.ckpt").string();
    best_path = (fs::path(opts.out_dir) / "best.ckpt").string();
    log.open((fs::path(opts.out_dir) / "train_log.jsonl").string(),
             start_epoch > 0 ? std::ios::app : std::ios::trunc);
    if (!log) fail_io("fit: cannot open training log in " + opts.out_dir);
    if (start_epoch == 0) save_state(last_path, 0, opts, best_loss_);
  }

  std::vector<EpochRecord> records;
  for (int e = start_epoch; e < tcfg_.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double epoch_lr = lr_;

    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(tcfg_.seed, kShuffleTag, static_cast<uint64_t>(e)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);

    double sum_focal = 0, sum_smooth = 0, sum_sr = 0;
    size_t seen = 0;
    for (size_t b = 0; b < order.size(); b += tcfg_.batch_size) {
      const size_t hi = std::min(order.size(), b + tcfg_.batch_size);
      std::vector<TrainSample> batch;
      batch.reserve(hi - b);
      for (size_t k = b; k < hi; ++k) {
        const size_t idx = order[k];
        Rng aug_rng(mix_seed(tcfg_.seed, kAugTag, static_cast<uint64_t>(e), idx));
        batch.push_back(augment(dataset[idx], acfg_, aug_rng));
      }
      const LossReport rep = train_step(batch);
      const double bs = static_cast<double>(batch.size());
      sum_focal += rep.l_focal * bs;
      sum_smooth += rep.l_smooth * bs;
      sum_sr += rep.l_sr * bs;
      seen += batch.size();
    }
    const double inv_n = 1.0 / static_cast<double>(seen);
    const LossReport mean =
        total_loss(sum_focal * inv_n, sum_smooth * inv_n, sum_sr * inv_n, tcfg_.phi);
    history_.push_back(mean.l_ef);

    EpochRecord rec;
    rec.epoch = e;
    rec.mean_loss = mean;
    rec.lr = epoch_lr;
    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(rec);

    lr_ = plateau_step(sched_, mean.l_ef, lr_, tcfg_.lr_factor, tcfg_.lr_floor,
                       tcfg_.plateau_patience);

    const bool is_best = mean.l_ef < best_loss_;
    if (is_best) best_loss_ = mean.l_ef;
    if (!opts.out_dir.empty()) {
      if (is_best) save_state(best_path, e + 1, opts, best_loss_);
      save_state(last_path, e + 1, opts, best_loss_);
      nlohmann::ordered_json j;
      j["epoch"] = e;
      j["l_focal"] = mean.l_focal;
      j["l_smooth"] = mean.l_smooth;
      j["l_sr"] = mean.l_sr;
      j["phi"] = mean.phi;
      j["l_ef"] = mean.l_ef;
      j["lr"] = epoch_lr;
      j["wall_time"] = rec.wall_time;
      log << j.dump() << "\n" << std::flush;
    }
    if (opts.verbose) {
      std::printf("epoch %3d  focal %.5f  smooth %.5f  sr %.5f  total %.5f  lr %.2e  %.1fs\n", e,
                  mean.l_focal, mean.l_smooth, mean.l_sr, mean.l_ef, epoch_lr, rec.wall_time);
      std::fflush(stdout);
    }
  }
  return records;
}

}  // namespace srdet
