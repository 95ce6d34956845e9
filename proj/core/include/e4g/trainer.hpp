#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "e4g/losses.hpp"
#include "e4g/model.hpp"
#include "e4g/signal.hpp"

namespace e4g {

struct TrainConfig {
  double learning_rate = 1e-3;
  size_t batch_size = 50;
  size_t max_epochs = 200;
  size_t patience = 10;  // epochs without val F1 improvement before stopping
  uint64_t seed = 0;
  LossWeights weights;
  Variant variant = Variant::early_exit;
  double target_f1 = 1.0;     // stop early once validation F1 reaches this
  size_t mcdrop_samples = 5;  // stochastic passes for mcdrop validation

  void validate() const;  // throws ConfigError
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t t = 0;
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;

  void init(const std::vector<std::pair<std::string, Tensor<float>>>& params);
};

struct EpochStats {
  double train_loss = 0.0;
  std::vector<double> per_exit_loss;  // unweighted, one per exit
  double val_f1 = 0.0;
};

struct Checkpoint {
  uint32_t version = 1;
  ModelConfig config;
  // Parameters followed by BN running stats, in named_parameters/named_buffers
  // order. Deep copies: editing the source model later leaves these untouched.
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  std::optional<AdamState> adam;
  std::vector<EpochStats> history;
};

// Reads each parameter's gradient buffer and applies the bias-corrected Adam
// update in place. Parameters must carry gradients (ensure_grad first).
void adam_step(const std::vector<std::pair<std::string, Tensor<float>>>& params,
               AdamState& state, double lr);

// Mini-batch loop with per-epoch shuffling, validation F1 after every epoch,
// and patience-based early stopping. Returns a checkpoint of the best epoch.
Checkpoint train(ModelGraph<float>& model, const std::vector<Segment>& train_data,
                 const std::vector<Segment>& val_data, const TrainConfig& config);

// Deep-copies the model's current parameters and buffers into a checkpoint.
Checkpoint snapshot_model(ModelGraph<float>& model);

// Binary checkpoint file; round trips are bit-exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model graph and installs the checkpoint's tensors.
ModelGraph<float> model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace e4g
