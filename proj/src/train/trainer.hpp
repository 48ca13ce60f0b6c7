#pragma once

#include <string>
#include <vector>

#include "data/augment.hpp"
#include "data/synth.hpp"
#include "det/detector.hpp"
#include "losses/losses.hpp"
#include "train/checkpoint.hpp"
#include "train/optim.hpp"
#include "train/schedule.hpp"

namespace srdet {

// Matching thresholds for anchor assignment during training.
struct MatchConfig {
  double hi = 0.5;
  double lo = 0.4;
};

struct EpochRecord {
  int epoch = 0;  // zero-based
  LossReport mean_loss;
  double lr = 0;  // rate used during this epoch
  double wall_time = 0;
};

struct FitOptions {
  std::string out_dir;            // empty: keep everything in memory
  std::string config_json = "{}"; // embedded into checkpoints
  std::string resume_path;
  bool verbose = false;
};

// Honors SRFACE_NUM_WORKERS; falls back to min(jobs, hardware threads).
int worker_count(int jobs);

class Trainer {
 public:
  Trainer(Detector& model, const TrainConfig& tcfg, const AugmentConfig& acfg,
          const MatchConfig& mcfg, const FocalParams& fp);

  // One forward/loss/backward/update over the batch. Throws without applying
  // the update if the loss or any gradient is non-finite.
  LossReport train_step(const std::vector<TrainSample>& batch);

  std::vector<EpochRecord> fit(const std::vector<TrainSample>& dataset, const FitOptions& opts);

  double current_lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  const AdamW& optimizer() const { return opt_; }
  const std::vector<double>& loss_history() const { return history_; }

 private:
  LossReport image_pass(const TrainSample& sample, GradStore& gs, double inv_batch);
  void save_state(const std::string& path, int completed_epochs, const FitOptions& opts,
                  double best_loss) const;

  Detector& model_;
  TrainConfig tcfg_;
  AugmentConfig acfg_;
  MatchConfig mcfg_;
  FocalParams fp_;
  AdamW opt_;
  double lr_;
  PlateauState sched_;
  double best_loss_;
  std::vector<double> history_;
  std::vector<GradStore> store_pool_;
};

}  // namespace srdet
