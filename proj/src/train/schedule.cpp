#include "train/schedule.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace srdet {

void TrainConfig::validate() const {
  require(lr0 > 0.0, "train config: lr0 must be positive");
  require(lr_floor > 0.0 && lr_floor <= lr0, "train config: need 0 < lr_floor <= lr0");
  require(lr_factor > 0.0 && lr_factor < 1.0, "train config: lr_factor must lie in (0,1)");
  require(plateau_patience >= 1, "train config: plateau_patience must be >= 1");
  require(batch_size >= 1, "train config: batch_size must be >= 1");
  require(epochs >= 0, "train config: epochs must be >= 0");
  require(phi >= 0.0, "train config: phi must be >= 0");
  require(weight_decay >= 0.0, "train config: weight_decay must be >= 0");
  require(clip_norm > 0.0, "train config: clip_norm must be positive");
}

double plateau_step(PlateauState& st, double loss, double current_lr, double lr_factor,
                    double lr_floor, int patience) {
  if (loss < st.best * (1.0 - kPlateauRelImprove)) {
    st.best = loss;
    st.stall = 0;
    return current_lr;
  }
  if (++st.stall >= patience) {
    st.stall = 0;
    return std::max(current_lr * lr_factor, lr_floor);
  }
  return current_lr;
}

double lr_schedule_step(const std::vector<double>& history, double current_lr,
                        const TrainConfig& cfg) {
  require(!history.empty(), "lr_schedule_step: empty loss history");
  PlateauState st;
  // historical reductions only matter through their stall-counter resets,
  // so the replay can ignore what the rate was back then
  for (size_t i = 0; i + 1 < history.size(); ++i)
    plateau_step(st, history[i], current_lr, cfg.lr_factor, cfg.lr_floor, cfg.plateau_patience);
  return plateau_step(st, history.back(), current_lr, cfg.lr_factor, cfg.lr_floor,
                      cfg.plateau_patience);
}

}  // namespace srdet
