#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "e4g/dataset_io.hpp"
#include "e4g/evaluation.hpp"
#include "e4g/gradcheck.hpp"
#include "e4g/plot.hpp"
#include "e4g/synth.hpp"
#include "e4g/trainer.hpp"
#include "e4g/uncertainty.hpp"

namespace e4g::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Accepts either a dataset file or a directory holding <name>.e4gd.
std::string resolve_dataset(const std::string& path, const char* name) {
  if (fs::is_directory(path)) {
    return (fs::path(path) / (std::string(name) + ".e4gd")).string();
  }
  return path;
}

double artifact_fraction(const std::vector<Segment>& segments) {
  uint64_t ones = 0, total = 0;
  for (const Segment& s : segments) {
    for (uint8_t y : s.y) ones += y;
    total += s.y.size();
  }
  return total ? double(ones) / double(total) : 0.0;
}

std::vector<uint32_t> patient_list(const std::vector<Segment>& segments) {
  std::set<uint32_t> ids;
  for (const Segment& s : segments) ids.insert(s.patient_id);
  return {ids.begin(), ids.end()};
}

void check_model_matches_data(const ModelConfig& model) {
  model.validate();
  if (model.input_length != kSegmentLen) {
    throw ConfigError("model input_length " + std::to_string(model.input_length) +
                      " does not match dataset segments of " +
                      std::to_string(kSegmentLen));
  }
  if (model.num_classes != 2) {
    throw ConfigError("dataset masks are binary; num_classes must be 2");
  }
  if (model.input_channels != 1) {
    throw ConfigError("dataset segments are single-channel; input_channels must be 1");
  }
}

LabelMask argmax_mask(const Tensor<float>& logits) {
  // [1, C, T] -> per-time-point argmax (ties -> class 0)
  const size_t c = logits.extent(1);
  const size_t t = logits.extent(2);
  const float* x = logits.data();
  LabelMask mask(t, 0);
  for (size_t j = 0; j < t; ++j) {
    size_t pred = 0;
    float best = x[j];
    for (size_t ci = 1; ci < c; ++ci) {
      if (x[ci * t + j] > best) {
        best = x[ci * t + j];
        pred = ci;
      }
    }
    mask[j] = pred == 1 ? 1 : 0;
  }
  return mask;
}

LabelMask probmap_mask(const ProbMap& p) {
  const size_t c = p.probs.extent(0);
  const size_t t = p.probs.extent(1);
  const double* x = p.probs.data();
  LabelMask mask(t, 0);
  for (size_t j = 0; j < t; ++j) {
    size_t pred = 0;
    double best = x[j];
    for (size_t ci = 1; ci < c; ++ci) {
      if (x[ci * t + j] > best) {
        best = x[ci * t + j];
        pred = ci;
      }
    }
    mask[j] = pred == 1 ? 1 : 0;
  }
  return mask;
}

double mask_f1(const LabelMask& predicted, const LabelMask& labels) {
  ConfusionCounts counts;
  for (size_t j = 0; j < labels.size(); ++j) {
    counts.observe(predicted[j] != 0, labels[j] != 0);
  }
  return f1_from_counts(counts).f1;
}

std::string mask_bits(const LabelMask& mask) {
  std::string s(mask.size(), '0');
  for (size_t j = 0; j < mask.size(); ++j) s[j] = mask[j] ? '1' : '0';
  return s;
}

}  // namespace

int cmd_synth(const RunConfig& config, const std::string& out_dir, bool force) {
  config.synth.validate();
  if (config.synth.total_rate_per_min() == 0.0) {
    std::fprintf(stderr, "warning: artifact rate is 0; generated data has no artifacts\n");
  }

  const fs::path dir(out_dir);
  const char* names[3] = {"train", "val", "test"};
  if (!force) {
    for (const char* name : names) {
      const fs::path p = dir / (std::string(name) + ".e4gd");
      if (fs::exists(p)) {
        throw ConfigError("synth: " + p.string() + " exists (pass --force to overwrite)");
      }
    }
  }
  fs::create_directories(dir);

  Rng root(config.seed);
  const SynthResult result = synth_generate(config.synth, root);
  std::vector<Segment> segments;
  for (const Recording& rec : result.recordings) {
    std::vector<Segment> cut = preprocess_and_segment(rec, result.annotations);
    segments.insert(segments.end(), std::make_move_iterator(cut.begin()),
                    std::make_move_iterator(cut.end()));
  }

  Rng split_rng(hash_mix(config.seed, 0x73706c74));  // "splt"
  SplitSegments split =
      split_dataset(segments, config.split[0], config.split[1], config.split[2],
                    split_rng);
  Rng aug_rng(hash_mix(config.seed, 0x61756774));  // "augt"
  augment_split(split.train, config.augment_fraction, aug_rng);

  write_segments(split.train, (dir / "train.e4gd").string());
  write_segments(split.val, (dir / "val.e4gd").string());
  write_segments(split.test, (dir / "test.e4gd").string());
  write_effective_config(config, out_dir);

  json manifest;
  manifest["digest"] = config_digest(config);
  manifest["seed"] = config.seed;
  manifest["split"] = config.split;
  json counts;
  counts["train"] = split.train.size();
  counts["val"] = split.val.size();
  counts["test"] = split.test.size();
  manifest["segments"] = counts;
  json patients;
  patients["train"] = patient_list(split.train);
  patients["val"] = patient_list(split.val);
  patients["test"] = patient_list(split.test);
  manifest["patients"] = patients;
  json fractions;
  fractions["train"] = artifact_fraction(split.train);
  fractions["val"] = artifact_fraction(split.val);
  fractions["test"] = artifact_fraction(split.test);
  manifest["artifact_fraction"] = fractions;
  json files;
  files["train"] = "train.e4gd";
  files["val"] = "val.e4gd";
  files["test"] = "test.e4gd";
  manifest["files"] = files;
  {
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    if (!f) throw IoError("synth: cannot write manifest.json");
    f << manifest.dump(2) << "\n";
  }

  std::printf("wrote %zu train / %zu val / %zu test segments to %s\n",
              split.train.size(), split.val.size(), split.test.size(),
              out_dir.c_str());
  return kExitOk;
}

int cmd_train(const RunConfig& config, const std::string& data_dir,
              const std::string& out_dir) {
  check_model_matches_data(config.model);
  const std::vector<Segment> train_data =
      read_segments(resolve_dataset(data_dir, "train"));
  const std::vector<Segment> val_data = read_segments(resolve_dataset(data_dir, "val"));

  Rng model_rng(hash_mix(config.seed, 0x6d6f646c));  // "modl"
  ModelGraph<float> model = build_model<float>(config.model, model_rng);
  std::printf("training %s (%zu parameters) on %zu segments\n",
              variant_name(config.model.variant).c_str(),
              parameter_count(model), train_data.size());

  Checkpoint checkpoint = train(model, train_data, val_data, config.train);

  fs::create_directories(out_dir);
  const std::string ckpt_path = (fs::path(out_dir) / "model.e4gc").string();
  save_checkpoint(checkpoint, ckpt_path);
  write_effective_config(config, out_dir);

  const std::string hist_path = (fs::path(out_dir) / "history.tsv").string();
  {
    std::ofstream f(hist_path, std::ios::trunc);
    if (!f) throw IoError("train: cannot write " + hist_path);
    f << "epoch\ttrain_loss\tval_f1";
    const size_t n_exits =
        checkpoint.history.empty() ? 0 : checkpoint.history[0].per_exit_loss.size();
    for (size_t e = 0; e < n_exits; ++e) f << "\texit" << e + 1 << "_loss";
    f << "\n";
    char num[32];
    for (size_t i = 0; i < checkpoint.history.size(); ++i) {
      const EpochStats& s = checkpoint.history[i];
      f << i + 1;
      std::snprintf(num, sizeof(num), "\t%.6f\t%.6f", s.train_loss, s.val_f1);
      f << num;
      for (double l : s.per_exit_loss) {
        std::snprintf(num, sizeof(num), "\t%.6f", l);
        f << num;
      }
      f << "\n";
    }
  }

  size_t best_epoch = 0;
  double best_f1 = -1.0;
  for (size_t i = 0; i < checkpoint.history.size(); ++i) {
    if (checkpoint.history[i].val_f1 > best_f1) {
      best_f1 = checkpoint.history[i].val_f1;
      best_epoch = i + 1;
    }
  }
  for (size_t i = 0; i < checkpoint.history.size(); ++i) {
    const EpochStats& s = checkpoint.history[i];
    std::printf("epoch %zu: train_loss %.4f val_f1 %.4f\n", i + 1, s.train_loss,
                s.val_f1);
  }
  std::printf("best val F1 %.4f at epoch %zu; checkpoint saved to %s\n", best_f1,
              best_epoch, ckpt_path.c_str());
  return kExitOk;
}

int cmd_eval(const RunConfig& config, const std::string& checkpoint_path,
             const std::string& data_path, const std::string& out_dir,
             const std::vector<uint64_t>& eval_seeds, bool samples_given) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  ModelGraph<float> model = model_from_checkpoint(checkpoint);
  const bool is_mcdrop = model.config.variant == Variant::mcdrop;
  size_t samples = config.train.mcdrop_samples;
  if (!is_mcdrop) {
    if (samples_given && samples != 1) {
      throw ConfigError("eval: --samples applies to mcdrop checkpoints only");
    }
    samples = 1;
  }

  const std::vector<Segment> test = read_segments(resolve_dataset(data_path, "test"));
  std::vector<uint64_t> seeds = eval_seeds;
  if (seeds.empty()) seeds.push_back(config.seed);

  EvalReport report;
  report.model_name = variant_name(model.config.variant);
  report.config_digest = config_digest(config);
  for (uint64_t seed : seeds) {
    report.runs.push_back(
        evaluate_model(model, test, samples, seed, config.train.batch_size));
  }

  for (const RunMetrics& run : report.runs) {
    if (run.per_exit_f1.empty()) continue;
    const double min_exit =
        *std::min_element(run.per_exit_f1.begin(), run.per_exit_f1.end());
    if (run.f1 < min_exit - 0.05) {
      std::fprintf(stderr,
                   "warning: aggregated F1 %.4f trails the weakest exit (%.4f) by "
                   "more than 0.05\n",
                   run.f1, min_exit);
    }
  }

  const std::string text = emit_report_text(report);
  std::fputs(text.c_str(), stdout);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_effective_config(config, out_dir);
    std::ofstream t(fs::path(out_dir) / "report.txt", std::ios::trunc);
    std::ofstream d(fs::path(out_dir) / "report.tsv", std::ios::trunc);
    if (!t || !d) throw IoError("eval: cannot write report files to " + out_dir);
    t << text;
    d << emit_report_delimited(report);
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& config, const std::string& checkpoint_path,
                const std::string& data_path, size_t index,
                const std::string& out_dir) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  ModelGraph<float> model = model_from_checkpoint(checkpoint);
  const std::vector<Segment> data = read_segments(resolve_dataset(data_path, "test"));
  if (index >= data.size()) {
    throw DataError("predict: segment index " + std::to_string(index) +
                    " out of range (dataset has " + std::to_string(data.size()) +
                    " segments)");
  }
  const Segment& seg = data[index];

  Tensor<float> x = Tensor<float>::zeros({1, 1, kSegmentLen});
  std::copy_n(seg.x.data(), kSegmentLen, x.data());
  Tape<float> tape(false);
  Rng fwd_rng(0);
  const ExitBundle<float> bundle = forward(model, tape, x, RunMode::eval, fwd_rng);

  ProbMap aggregate;
  if (model.config.variant == Variant::mcdrop) {
    Rng mc_rng(hash_mix(config.seed, 0x70726564));  // "pred"
    aggregate = mcdrop_infer(model, seg.x, config.train.mcdrop_samples, mc_rng);
  } else {
    aggregate = aggregate_exits_batch(bundle)[0];
  }

  char title[64];
  std::vector<PredictionPanel> panels;
  for (size_t e = 0; e < bundle.logits.size(); ++e) {
    LabelMask mask = argmax_mask(bundle.logits[e]);
    std::snprintf(title, sizeof(title), "exit %zu (F1 %.3f)", e + 1,
                  mask_f1(mask, seg.y));
    panels.push_back({title, std::move(mask)});
  }
  LabelMask agg_mask = probmap_mask(aggregate);
  std::snprintf(title, sizeof(title), "aggregate (F1 %.3f)", mask_f1(agg_mask, seg.y));
  panels.push_back({title, agg_mask});

  fs::create_directories(out_dir);
  const std::string svg_path = (fs::path(out_dir) / "prediction.svg").string();
  emit_prediction_plot(seg.x, seg.y, panels, svg_path);

  const std::string masks_path = (fs::path(out_dir) / "masks.txt").string();
  {
    std::ofstream f(masks_path, std::ios::trunc);
    if (!f) throw IoError("predict: cannot write " + masks_path);
    f << "labels\t" << mask_bits(seg.y) << "\n";
    for (size_t e = 0; e < bundle.logits.size(); ++e) {
      f << "exit" << e + 1 << "\t" << mask_bits(panels[e].predicted) << "\n";
    }
    f << "aggregate\t" << mask_bits(agg_mask) << "\n";
  }
  std::printf("wrote %s and %s (%zu panels)\n", svg_path.c_str(), masks_path.c_str(),
              panels.size());
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config) {
  const std::vector<GradCheckResult> results = run_gradcheck(config.seed);
  std::printf("op\tmax_rel_err\tstatus\n");
  for (const GradCheckResult& r : results) {
    std::printf("%s\t%.3e\t%s\n", r.op.c_str(), r.max_rel_err,
                r.passed ? "PASS" : "FAIL");
  }
  if (!all_passed(results)) {
    std::fprintf(stderr, "gradcheck: FAILED\n");
    return kExitVerification;
  }
  std::printf("gradcheck: all %zu ops passed\n", results.size());
  return kExitOk;
}

int cmd_bench(const RunConfig& config, const std::vector<std::string>& checkpoint_paths,
              const std::string& data_path, size_t n_runs) {
  if (checkpoint_paths.empty()) throw ConfigError("bench: no checkpoints given");
  const std::vector<Segment> test = read_segments(resolve_dataset(data_path, "test"));
  if (test.empty()) throw DataError("bench: empty test set");

  std::vector<ModelGraph<float>> models;
  models.reserve(checkpoint_paths.size());
  std::vector<std::string> names;
  for (const std::string& path : checkpoint_paths) {
    models.push_back(model_from_checkpoint(load_checkpoint(path)));
    std::string name = variant_name(models.back().config.variant);
    if (std::count(names.begin(), names.end(), name)) {
      name += "_" + std::to_string(names.size() + 1);
    }
    names.push_back(name);
  }

  std::vector<LatencyEntry> entries;
  for (size_t i = 0; i < models.size(); ++i) {
    ModelGraph<float>* m = &models[i];
    const size_t samples =
        m->config.variant == Variant::mcdrop ? config.train.mcdrop_samples : 1;
    const uint64_t seed = config.seed;
    const size_t batch = config.train.batch_size;
    entries.push_back({names[i], [m, &test, samples, seed, batch] {
                         infer_probmaps(*m, test, samples, seed, batch);
                       }});
  }

  const std::vector<LatencyResult> results = latency_bench(entries, n_runs);
  std::printf("name\tmean_seconds\tratio\n");
  for (const LatencyResult& r : results) {
    std::printf("%s\t%.6f\t%.3f\n", r.name.c_str(), r.mean_seconds, r.ratio);
  }
  return kExitOk;
}

}  // namespace e4g::cli
