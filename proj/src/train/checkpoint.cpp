#include "train/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "common/error.hpp"

namespace srdet {

namespace {

constexpr char kTrailer[4] = {'E', 'N', 'D', '!'};

template <typename T>
void put(std::ostream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& f, const std::string& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) fail_format("checkpoint " + path + ": truncated");
  return v;
}

void put_tensor_data(std::ostream& f, const Tensor& t) {
  put<int32_t>(f, t.c);
  put<int32_t>(f, t.h);
  put<int32_t>(f, t.w);
  f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
}

Tensor get_tensor_data(std::istream& f, const std::string& path) {
  const int32_t c = get<int32_t>(f, path);
  const int32_t h = get<int32_t>(f, path);
  const int32_t w = get<int32_t>(f, path);
  if (c < 0 || h < 0 || w < 0 || static_cast<long long>(c) * h * w > (1LL << 32))
    fail_format("checkpoint " + path + ": corrupt tensor header");
  Tensor t(c, h, w);
  f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
  if (!f) fail_format("checkpoint " + path + ": truncated tensor data");
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const TrainerState& state, const ParamRegistry& params,
                     const AdamW* optimizer) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_io("cannot open " + path + " for writing");
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<uint32_t>(f, kCheckpointVersion);

  put<uint64_t>(f, config_json.size());
  f.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));

  put<int32_t>(f, state.epoch);
  put<double>(f, state.lr);
  put<double>(f, state.sched_best);
  put<int32_t>(f, state.sched_stall);
  put<double>(f, state.best_loss);

  put<uint32_t>(f, static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.names[i];
    put<uint32_t>(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_tensor_data(f, *params.tensors[i]);
  }

  put<uint8_t>(f, optimizer ? 1 : 0);
  if (optimizer) {
    put<int64_t>(f, optimizer->t_);
    for (const Tensor& t : optimizer->m) put_tensor_data(f, t);
    for (const Tensor& t : optimizer->v) put_tensor_data(f, t);
  }
  f.write(kTrailer, sizeof(kTrailer));
  if (!f) fail_io("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_io("cannot open checkpoint " + path);

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    fail_format("checkpoint " + path + ": bad magic, not a checkpoint file");
  const uint32_t version = get<uint32_t>(f, path);
  if (version != kCheckpointVersion)
    fail_format("checkpoint " + path + ": unsupported version " + std::to_string(version) +
                " (expected " + std::to_string(kCheckpointVersion) + ")");

  Checkpoint ck;
  const uint64_t cfg_len = get<uint64_t>(f, path);
  if (cfg_len > (1ULL << 24)) fail_format("checkpoint " + path + ": corrupt config length");
  ck.config_json.resize(cfg_len);
  f.read(ck.config_json.data(), static_cast<std::streamsize>(cfg_len));
  if (!f) fail_format("checkpoint " + path + ": truncated config");

  ck.state.epoch = get<int32_t>(f, path);
  ck.state.lr = get<double>(f, path);
  ck.state.sched_best = get<double>(f, path);
  ck.state.sched_stall = get<int32_t>(f, path);
  ck.state.best_loss = get<double>(f, path);

  const uint32_t n = get<uint32_t>(f, path);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t name_len = get<uint32_t>(f, path);
    if (name_len > 4096) fail_format("checkpoint " + path + ": corrupt name length");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) fail_format("checkpoint " + path + ": truncated name");
    ck.params.emplace_back(std::move(name), get_tensor_data(f, path));
  }

  ck.has_optimizer = get<uint8_t>(f, path) != 0;
  if (ck.has_optimizer) {
    ck.opt_t = get<int64_t>(f, path);
    for (uint32_t i = 0; i < n; ++i) ck.opt_m.push_back(get_tensor_data(f, path));
    for (uint32_t i = 0; i < n; ++i) ck.opt_v.push_back(get_tensor_data(f, path));
  }

  char trailer[4];
  f.read(trailer, sizeof(trailer));
  if (!f || std::memcmp(trailer, kTrailer, sizeof(trailer)) != 0)
    fail_format("checkpoint " + path + ": missing trailer, file truncated or corrupt");
  return ck;
}

void apply_checkpoint_params(const Checkpoint& ckpt, const ParamRegistry& reg) {
  if (ckpt.params.size() != reg.size())
    fail_format("checkpoint: parameter count " + std::to_string(ckpt.params.size()) +
                " does not match model (" + std::to_string(reg.size()) + ")");
  for (size_t i = 0; i < reg.size(); ++i) {
    const auto& [name, t] = ckpt.params[i];
    if (name != reg.names[i])
      fail_format("checkpoint: parameter '" + name + "' does not match model parameter '" +
                  reg.names[i] + "'");
    if (!t.same_shape(*reg.tensors[i]))
      fail_format("checkpoint: shape mismatch for parameter '" + name + "'");
    *reg.tensors[i] = t;
  }
}

void apply_checkpoint_optimizer(const Checkpoint& ckpt, AdamW& opt) {
  require(ckpt.has_optimizer, "checkpoint has no optimizer state");
  if (ckpt.opt_m.size() != opt.m.size())
    fail_format("checkpoint: optimizer state size mismatch");
  opt.t_ = ckpt.opt_t;
  opt.m = ckpt.opt_m;
  opt.v = ckpt.opt_v;
}

}  // namespace srdet
