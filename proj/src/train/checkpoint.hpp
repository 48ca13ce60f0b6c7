#pragma once

#include <string>
#include <utility>
#include <vector>

#include "common/tensor.hpp"
#include "nn/layers.hpp"
#include "train/optim.hpp"

namespace srdet {

// Self-describing binary container: magic + version, embedded config JSON,
// trainer state, named weight tensors and optional optimizer state.
inline constexpr char kCheckpointMagic[8] = {'S', 'R', 'D', 'E', 'T', 'C', 'P', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct TrainerState {
  int epoch = 0;  // completed epochs
  double lr = 0;
  double sched_best = 0;
  int sched_stall = 0;
  double best_loss = 0;
};

struct Checkpoint {
  std::string config_json;
  TrainerState state;
  std::vector<std::pair<std::string, Tensor>> params;
  bool has_optimizer = false;
  long long opt_t = 0;
  std::vector<Tensor> opt_m, opt_v;
};

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const TrainerState& state, const ParamRegistry& params,
                     const AdamW* optimizer);

Checkpoint load_checkpoint(const std::string& path);

// Copies weights into the registry; names and shapes must match exactly.
void apply_checkpoint_params(const Checkpoint& ckpt, const ParamRegistry& reg);
void apply_checkpoint_optimizer(const Checkpoint& ckpt, AdamW& opt);

}  // namespace srdet
