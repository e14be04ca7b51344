#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmnet/data.hpp"
#include "fmnet/network.hpp"

namespace fmnet {

struct TrainConfig {
  double initial_lr = 1e-4;
  int halve_every = 20;       // epochs between learning-rate halvings
  double weight_decay = 1e-6; // classical L2, kernels only
  int batch_size = 128;
  int epochs = 100;
  int patch_size = 64;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Random crops drawn per training image per epoch; together with
  // batch_size this sets the dataset-size-proportional step count.
  int crops_per_image = 1;
};

void validate(const TrainConfig& cfg);

// initial_lr * 0.5^floor(epoch / halve_every)
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Mean absolute error: mean over the batch of per-image sums of absolute
// differences divided by the element count.
double l1_loss(const SpectralImage& pred, const SpectralImage& target);
double l1_loss(const std::vector<SpectralImage>& pred, const std::vector<SpectralImage>& target);

struct AdamState {
  ParameterSet<float> m;
  ParameterSet<float> v;
  std::int64_t step = 0;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double wall_seconds = 0.0;
};

struct Checkpoint {
  std::uint32_t version = 1;
  NetworkConfig config;
  ParameterSet<float> params;
  AdamState opt;
  int epoch = 0;  // epochs completed
  std::vector<float> loss_history;
};

// One Adam step with classical L2 weight decay folded into the kernel
// gradients. Biases are not decayed.
void adam_step(ParameterSet<float>& params, const ParameterSet<float>& grads, AdamState& state,
               const TrainConfig& cfg, double lr);

// Mini-batch training on Eq-style L1 loss. Deterministic given (seed,
// config, data); resuming from a checkpoint continues the identical stream.
// Appends one EpochLog entry per epoch when `log` is non-null.
Checkpoint train(const NetworkConfig& net_config, const TrainConfig& cfg,
                 const std::vector<ImagePair>& pairs, const Checkpoint* resume = nullptr,
                 std::vector<EpochLog>* log = nullptr);

// Checkpoint container ("FMCKPT1\0"): versioned config snapshot plus every
// named float32 array (parameters, Adam moments, loss history).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// CSV header: epoch,lr,train_loss,wall_seconds
void write_train_log_csv(const std::vector<EpochLog>& log, const std::string& path, bool append = false);

// key=value serialization of a NetworkConfig, used in checkpoint snapshots.
std::string network_config_to_text(const NetworkConfig& cfg);
NetworkConfig network_config_from_text(const std::string& text);

}  // namespace fmnet
