#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace srdet {

struct TrainConfig {
  double lr0 = 1e-4;
  double lr_floor = 1e-8;
  int plateau_patience = 3;
  double lr_factor = 0.1;
  int batch_size = 4;
  int epochs = 20;
  double phi = 0.1;
  double weight_decay = 1e-4;
  double clip_norm = 10.0;
  uint64_t seed = 0;

  void validate() const;
};

// Reduce-on-plateau: a monitored loss "improves" when it drops below the best
// seen by a relative margin; after `patience` consecutive non-improving epochs
// the rate is divided and the stall counter resets. The rate never goes below
// the floor and never increases.
struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
};

inline constexpr double kPlateauRelImprove = 1e-4;

double plateau_step(PlateauState& st, double loss, double current_lr, double lr_factor,
                    double lr_floor, int patience);

// Stateless form: reconstructs the stall/best state from the full history
// (latest observation last) and returns the rate to use next.
double lr_schedule_step(const std::vector<double>& history, double current_lr,
                        const TrainConfig& cfg);

}  // namespace srdet
