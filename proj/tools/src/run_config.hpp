#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "e4g/model.hpp"
#include "e4g/synth.hpp"
#include "e4g/trainer.hpp"

namespace e4g::cli {

// Everything a command needs, resolved from defaults <- config file <- flags.
struct RunConfig {
  uint64_t seed = 1;
  size_t threads = 1;  // reserved worker cap; current kernels are serial
  ModelConfig model = ModelConfig::for_variant(Variant::early_exit);
  TrainConfig train;
  GeneratorSpec synth;
  double augment_fraction = 0.5;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
};

// Explicitly passed command-line values; unset members leave the file/default
// value untouched.
struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<size_t> threads;
  // model
  std::optional<std::string> variant;
  std::optional<std::vector<size_t>> encoder_channels, decoder_channels;
  std::optional<size_t> kernel_size, input_channels, input_length;
  std::optional<size_t> num_classes, num_exits;
  std::optional<double> dropout_p, bn_momentum, bn_epsilon;
  // train
  std::optional<double> learning_rate, target_f1;
  std::optional<size_t> batch_size, max_epochs, patience, samples;
  std::optional<std::vector<double>> alpha;
  std::optional<double> ce_weight, dice_weight, dice_smooth;
  // synth
  std::optional<size_t> patients, channels;
  std::optional<double> minutes, artifact_rate, artifact_gain, augment_fraction;
  std::optional<std::vector<double>> rates, native_fs, split;
};

// Loads config_path (optional; empty skips the file), applies overrides, and
// keeps variant-dependent model defaults consistent. Unknown or ill-typed
// config keys raise ConfigError.
RunConfig make_config(const std::string& config_path, const Overrides& overrides);

// Canonical JSON rendering of the effective config (stable key order).
std::string effective_json(const RunConfig& config);

// FNV-1a hash of effective_json, as 16 hex digits.
std::string config_digest(const RunConfig& config);

// Writes effective_config.json into dir (created if missing).
void write_effective_config(const RunConfig& config, const std::string& dir);

}  // namespace e4g::cli
