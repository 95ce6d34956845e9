#include "run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "e4g/errors.hpp"

namespace e4g::cli {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::string& scope,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + scope + key + "'");
    }
  }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
  }
}

void apply_model_json(const json& m, ModelConfig& model) {
  reject_unknown(m, "model.",
                 {"variant", "encoder_channels", "decoder_channels", "kernel_size",
                  "input_channels", "input_length", "num_classes", "num_exits",
                  "dropout_p", "bn_momentum", "bn_epsilon"});
  if (m.contains("variant")) {
    std::string name;
    take(m, "variant", name);
    model = ModelConfig::for_variant(variant_from_string(name));
  }
  take(m, "encoder_channels", model.encoder_channels);
  take(m, "decoder_channels", model.decoder_channels);
  take(m, "kernel_size", model.kernel_size);
  take(m, "input_channels", model.input_channels);
  take(m, "input_length", model.input_length);
  take(m, "num_classes", model.num_classes);
  take(m, "num_exits", model.num_exits);
  take(m, "dropout_p", model.dropout_p);
  take(m, "bn_momentum", model.bn_momentum);
  take(m, "bn_epsilon", model.bn_epsilon);
}

void apply_train_json(const json& t, TrainConfig& train) {
  reject_unknown(t, "train.",
                 {"learning_rate", "batch_size", "max_epochs", "patience", "target_f1",
                  "mcdrop_samples", "alpha", "ce_weight", "dice_weight", "dice_smooth"});
  take(t, "learning_rate", train.learning_rate);
  take(t, "batch_size", train.batch_size);
  take(t, "max_epochs", train.max_epochs);
  take(t, "patience", train.patience);
  take(t, "target_f1", train.target_f1);
  take(t, "mcdrop_samples", train.mcdrop_samples);
  take(t, "alpha", train.weights.alpha);
  take(t, "ce_weight", train.weights.ce_weight);
  take(t, "dice_weight", train.weights.dice_weight);
  take(t, "dice_smooth", train.weights.dice_smooth);
}

void apply_synth_json(const json& s, RunConfig& config) {
  reject_unknown(s, "synth.",
                 {"patients", "minutes_per_patient", "channels_per_patient",
                  "rate_per_min", "native_fs", "artifact_gain", "augment_fraction",
                  "split"});
  take(s, "patients", config.synth.patients);
  take(s, "minutes_per_patient", config.synth.minutes_per_patient);
  take(s, "channels_per_patient", config.synth.channels_per_patient);
  if (s.contains("rate_per_min")) {
    std::vector<double> rates;
    take(s, "rate_per_min", rates);
    if (rates.size() != kArtifactKinds) {
      throw ConfigError("config: rate_per_min needs " + std::to_string(kArtifactKinds) +
                        " entries");
    }
    std::copy(rates.begin(), rates.end(), config.synth.rate_per_min.begin());
  }
  take(s, "native_fs", config.synth.native_fs);
  take(s, "artifact_gain", config.synth.artifact_gain);
  take(s, "augment_fraction", config.augment_fraction);
  if (s.contains("split")) {
    std::vector<double> split;
    take(s, "split", split);
    if (split.size() != 3) throw ConfigError("config: split needs 3 ratios");
    std::copy(split.begin(), split.end(), config.split.begin());
  }
}

}  // namespace

RunConfig make_config(const std::string& config_path, const Overrides& o) {
  RunConfig config;

  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw IoError("config: cannot open " + config_path);
    json root;
    try {
      root = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigError("config: parse error in " + config_path + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(root, "", {"seed", "threads", "model", "train", "synth"});
    take(root, "seed", config.seed);
    take(root, "threads", config.threads);
    if (root.contains("model")) apply_model_json(root.at("model"), config.model);
    if (root.contains("train")) apply_train_json(root.at("train"), config.train);
    if (root.contains("synth")) apply_synth_json(root.at("synth"), config);
  }

  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = std::max<size_t>(1, *o.threads);

  if (o.variant) {
    const Variant v = variant_from_string(*o.variant);
    ModelConfig fresh = ModelConfig::for_variant(v);
    // A variant switch re-derives its dependent defaults unless the flag also
    // pins them explicitly.
    config.model.variant = v;
    config.model.num_exits = fresh.num_exits;
    config.model.dropout_p = fresh.dropout_p;
  }
  if (o.encoder_channels) config.model.encoder_channels = *o.encoder_channels;
  if (o.decoder_channels) config.model.decoder_channels = *o.decoder_channels;
  if (o.kernel_size) config.model.kernel_size = *o.kernel_size;
  if (o.input_channels) config.model.input_channels = *o.input_channels;
  if (o.input_length) config.model.input_length = *o.input_length;
  if (o.num_classes) config.model.num_classes = *o.num_classes;
  if (o.num_exits) config.model.num_exits = *o.num_exits;
  if (o.dropout_p) config.model.dropout_p = *o.dropout_p;
  if (o.bn_momentum) config.model.bn_momentum = *o.bn_momentum;
  if (o.bn_epsilon) config.model.bn_epsilon = *o.bn_epsilon;

  if (o.learning_rate) config.train.learning_rate = *o.learning_rate;
  if (o.batch_size) config.train.batch_size = *o.batch_size;
  if (o.max_epochs) config.train.max_epochs = *o.max_epochs;
  if (o.patience) config.train.patience = *o.patience;
  if (o.target_f1) config.train.target_f1 = *o.target_f1;
  if (o.samples) config.train.mcdrop_samples = *o.samples;
  if (o.alpha) config.train.weights.alpha = *o.alpha;
  if (o.ce_weight) config.train.weights.ce_weight = *o.ce_weight;
  if (o.dice_weight) config.train.weights.dice_weight = *o.dice_weight;
  if (o.dice_smooth) config.train.weights.dice_smooth = *o.dice_smooth;

  if (o.patients) config.synth.patients = *o.patients;
  if (o.minutes) config.synth.minutes_per_patient = *o.minutes;
  if (o.channels) config.synth.channels_per_patient = *o.channels;
  if (o.artifact_rate) config.synth.rate_per_min.fill(*o.artifact_rate);
  if (o.rates) {
    if (o.rates->size() != kArtifactKinds) {
      throw ConfigError("config: --rates needs " + std::to_string(kArtifactKinds) +
                        " entries");
    }
    std::copy(o.rates->begin(), o.rates->end(), config.synth.rate_per_min.begin());
  }
  if (o.native_fs) config.synth.native_fs = *o.native_fs;
  if (o.artifact_gain) config.synth.artifact_gain = *o.artifact_gain;
  if (o.augment_fraction) config.augment_fraction = *o.augment_fraction;
  if (o.split) {
    if (o.split->size() != 3) throw ConfigError("config: --split needs 3 ratios");
    std::copy(o.split->begin(), o.split->end(), config.split.begin());
  }

  config.train.variant = config.model.variant;
  config.train.seed = config.seed;
  return config;
}

std::string effective_json(const RunConfig& c) {
  json root;
  root["seed"] = c.seed;
  root["threads"] = c.threads;
  json m;
  m["variant"] = variant_name(c.model.variant);
  m["encoder_channels"] = c.model.encoder_channels;
  m["decoder_channels"] = c.model.decoder_channels;
  m["kernel_size"] = c.model.kernel_size;
  m["input_channels"] = c.model.input_channels;
  m["input_length"] = c.model.input_length;
  m["num_classes"] = c.model.num_classes;
  m["num_exits"] = c.model.num_exits;
  m["dropout_p"] = c.model.dropout_p;
  m["bn_momentum"] = c.model.bn_momentum;
  m["bn_epsilon"] = c.model.bn_epsilon;
  root["model"] = m;
  json t;
  t["learning_rate"] = c.train.learning_rate;
  t["batch_size"] = c.train.batch_size;
  t["max_epochs"] = c.train.max_epochs;
  t["patience"] = c.train.patience;
  t["target_f1"] = c.train.target_f1;
  t["mcdrop_samples"] = c.train.mcdrop_samples;
  t["alpha"] = c.train.weights.alpha;
  t["ce_weight"] = c.train.weights.ce_weight;
  t["dice_weight"] = c.train.weights.dice_weight;
  t["dice_smooth"] = c.train.weights.dice_smooth;
  root["train"] = t;
  json s;
  s["patients"] = c.synth.patients;
  s["minutes_per_patient"] = c.synth.minutes_per_patient;
  s["channels_per_patient"] = c.synth.channels_per_patient;
  s["rate_per_min"] = c.synth.rate_per_min;
  s["native_fs"] = c.synth.native_fs;
  s["artifact_gain"] = c.synth.artifact_gain;
  s["augment_fraction"] = c.augment_fraction;
  s["split"] = c.split;
  root["synth"] = s;
  return root.dump(2) + "\n";
}

std::string config_digest(const RunConfig& c) {
  const std::string text = effective_json(c);
  uint64_t h = 1469598103934665603ull;
  for (char ch : text) {
    h ^= uint8_t(ch);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_effective_config(const RunConfig& c, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / "effective_config.json").string();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("config: cannot write " + path);
  f << effective_json(c);
}

}  // namespace e4g::cli
