#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "e4g/errors.hpp"

namespace {

using namespace e4g;
using namespace e4g::cli;

// Raw flag storage; presence is checked through the CLI11 option handles so
// only explicitly passed values become overrides.
struct RawFlags {
  uint64_t seed = 0;
  size_t threads = 0;
  std::string variant;
  std::vector<size_t> encoder_channels, decoder_channels;
  size_t kernel_size = 0, input_channels = 0, input_length = 0;
  size_t num_classes = 0, num_exits = 0;
  double dropout_p = 0, bn_momentum = 0, bn_epsilon = 0;
  double learning_rate = 0, target_f1 = 0;
  size_t batch_size = 0, max_epochs = 0, patience = 0, samples = 0;
  std::vector<double> alpha;
  double ce_weight = 0, dice_weight = 0, dice_smooth = 0;
  size_t patients = 0, channels = 0;
  double minutes = 0, artifact_rate = 0, artifact_gain = 0, augment_fraction = 0;
  std::vector<double> rates, native_fs, split;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"e4g: early-exit ensembles for per-time-point EEG artifact segmentation"};
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  RawFlags raw;

  app.add_option("--config", config_path, "JSON config file (flags override it)");
  auto* f_seed = app.add_option("--seed", raw.seed, "master seed for all randomness");
  auto* f_threads = app.add_option("--threads", raw.threads, "worker cap (reserved)");
  app.add_flag("--force", force, "overwrite existing outputs");

  auto* f_variant =
      app.add_option("--variant", raw.variant, "vanilla | mcdrop | early_exit");
  auto* f_enc = app.add_option("--encoder-channels", raw.encoder_channels,
                               "encoder channel counts")
                    ->delimiter(',');
  auto* f_dec = app.add_option("--decoder-channels", raw.decoder_channels,
                               "decoder channel counts")
                    ->delimiter(',');
  auto* f_kernel = app.add_option("--kernel-size", raw.kernel_size, "conv kernel size");
  auto* f_in_ch = app.add_option("--input-channels", raw.input_channels, "EEG channels");
  auto* f_in_len = app.add_option("--input-length", raw.input_length, "segment length");
  auto* f_classes = app.add_option("--num-classes", raw.num_classes, "output classes");
  auto* f_exits = app.add_option("--num-exits", raw.num_exits, "prediction exits");
  auto* f_dropout = app.add_option("--dropout-p", raw.dropout_p, "decoder dropout rate");
  auto* f_bn_mom = app.add_option("--bn-momentum", raw.bn_momentum, "BN momentum");
  auto* f_bn_eps = app.add_option("--bn-epsilon", raw.bn_epsilon, "BN epsilon");

  auto* f_lr = app.add_option("--learning-rate", raw.learning_rate, "Adam step size");
  auto* f_batch = app.add_option("--batch-size", raw.batch_size, "mini-batch size");
  auto* f_epochs = app.add_option("--max-epochs", raw.max_epochs, "epoch cap");
  auto* f_patience = app.add_option("--patience", raw.patience, "early-stop patience");
  auto* f_target = app.add_option("--target-f1", raw.target_f1,
                                  "stop once validation F1 reaches this");
  auto* f_samples =
      app.add_option("--samples", raw.samples, "mcdrop stochastic passes");
  auto* f_alpha =
      app.add_option("--alpha", raw.alpha, "per-exit loss weights")->delimiter(',');
  auto* f_ce = app.add_option("--ce-weight", raw.ce_weight, "cross-entropy weight");
  auto* f_dice = app.add_option("--dice-weight", raw.dice_weight, "dice weight");
  auto* f_smooth = app.add_option("--dice-smooth", raw.dice_smooth, "dice smoothing");

  auto* f_patients = app.add_option("--patients", raw.patients, "synthetic patients");
  auto* f_minutes =
      app.add_option("--minutes", raw.minutes, "recording minutes per patient");
  auto* f_channels = app.add_option("--channels", raw.channels, "channels per patient");
  auto* f_rate = app.add_option("--artifact-rate", raw.artifact_rate,
                                "events per minute for every artifact kind");
  auto* f_rates = app.add_option("--rates", raw.rates,
                                 "per-kind events per minute (eye,muscle,electrode,"
                                 "chewing,shiver)")
                      ->delimiter(',');
  auto* f_fs =
      app.add_option("--native-fs", raw.native_fs, "native sampling rates to cycle")
          ->delimiter(',');
  auto* f_gain =
      app.add_option("--artifact-gain", raw.artifact_gain, "artifact amplitude scale");
  auto* f_aug = app.add_option("--augment-fraction", raw.augment_fraction,
                               "target artifact segment fraction after augmentation");
  auto* f_split =
      app.add_option("--split", raw.split, "train,val,test ratios")->delimiter(',');

  std::string synth_out, train_data, train_out, eval_ckpt, eval_data, eval_out;
  std::string predict_ckpt, predict_data, predict_out, bench_data;
  std::vector<std::string> bench_ckpts;
  std::vector<uint64_t> eval_seeds;
  size_t predict_index = 0, bench_runs = 5;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->fallthrough();
  synth->add_option("--out", synth_out, "output directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model variant");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model.e4gc path")->required();
  eval_cmd->add_option("--data", eval_data, "test set (file or dataset dir)")
      ->required();
  eval_cmd->add_option("--out", eval_out, "report output directory");
  eval_cmd->add_option("--eval-seeds", eval_seeds, "comma-separated evaluation seeds")
      ->delimiter(',');

  CLI::App* predict = app.add_subcommand("predict", "plot per-exit predictions");
  predict->fallthrough();
  predict->add_option("--checkpoint", predict_ckpt, "model.e4gc path")->required();
  predict->add_option("--data", predict_data, "segment source (file or dataset dir)")
      ->required();
  predict->add_option("--index", predict_index, "segment index");
  predict->add_option("--out", predict_out, "output directory")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference op audit");
  gradcheck->fallthrough();

  CLI::App* bench = app.add_subcommand("bench", "latency ratios across checkpoints");
  bench->fallthrough();
  bench->add_option("checkpoints", bench_ckpts, "checkpoint paths (first is baseline)")
      ->required();
  bench->add_option("--data", bench_data, "test set (file or dataset dir)")->required();
  bench->add_option("--runs", bench_runs, "timed repetitions per model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Overrides o;
  if (f_seed->count()) o.seed = raw.seed;
  if (f_threads->count()) o.threads = raw.threads;
  if (f_variant->count()) o.variant = raw.variant;
  if (f_enc->count()) o.encoder_channels = raw.encoder_channels;
  if (f_dec->count()) o.decoder_channels = raw.decoder_channels;
  if (f_kernel->count()) o.kernel_size = raw.kernel_size;
  if (f_in_ch->count()) o.input_channels = raw.input_channels;
  if (f_in_len->count()) o.input_length = raw.input_length;
  if (f_classes->count()) o.num_classes = raw.num_classes;
  if (f_exits->count()) o.num_exits = raw.num_exits;
  if (f_dropout->count()) o.dropout_p = raw.dropout_p;
  if (f_bn_mom->count()) o.bn_momentum = raw.bn_momentum;
  if (f_bn_eps->count()) o.bn_epsilon = raw.bn_epsilon;
  if (f_lr->count()) o.learning_rate = raw.learning_rate;
  if (f_batch->count()) o.batch_size = raw.batch_size;
  if (f_epochs->count()) o.max_epochs = raw.max_epochs;
  if (f_patience->count()) o.patience = raw.patience;
  if (f_target->count()) o.target_f1 = raw.target_f1;
  if (f_samples->count()) o.samples = raw.samples;
  if (f_alpha->count()) o.alpha = raw.alpha;
  if (f_ce->count()) o.ce_weight = raw.ce_weight;
  if (f_dice->count()) o.dice_weight = raw.dice_weight;
  if (f_smooth->count()) o.dice_smooth = raw.dice_smooth;
  if (f_patients->count()) o.patients = raw.patients;
  if (f_minutes->count()) o.minutes = raw.minutes;
  if (f_channels->count()) o.channels = raw.channels;
  if (f_rate->count()) o.artifact_rate = raw.artifact_rate;
  if (f_rates->count()) o.rates = raw.rates;
  if (f_fs->count()) o.native_fs = raw.native_fs;
  if (f_gain->count()) o.artifact_gain = raw.artifact_gain;
  if (f_aug->count()) o.augment_fraction = raw.augment_fraction;
  if (f_split->count()) o.split = raw.split;

  try {
    const RunConfig config = make_config(config_path, o);
    if (synth->parsed()) return cmd_synth(config, synth_out, force);
    if (train_cmd->parsed()) return cmd_train(config, train_data, train_out);
    if (eval_cmd->parsed()) {
      return cmd_eval(config, eval_ckpt, eval_data, eval_out, eval_seeds,
                      f_samples->count() > 0);
    }
    if (predict->parsed()) {
      return cmd_predict(config, predict_ckpt, predict_data, predict_index,
                         predict_out);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(config);
    if (bench->parsed()) return cmd_bench(config, bench_ckpts, bench_data, bench_runs);
    std::fprintf(stderr, "error: no subcommand\n");
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
}
