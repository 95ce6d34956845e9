#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "e4g/evaluation.hpp"

#ifndef E4G_CLI_PATH
#error "E4G_CLI_PATH must point at the e4g binary"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("e4g_cli_") + tag + "_" +
                                        std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string dir(const std::string& name) const { return (path / name).string(); }
};

RunResult run_cli(const TempDir& scratch, const std::string& args) {
  const std::string out_file = scratch.dir("stdout.log");
  const std::string err_file = scratch.dir("stderr.log");
  const std::string cmd = std::string(E4G_CLI_PATH) + " " + args + " >" + out_file +
                          " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = status >= 0 ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

// small but complete dataset: 3 patients, one minute each
std::string synth_args(const std::string& out_dir) {
  return "synth --seed 7 --patients 3 --minutes 1 --out " + out_dir;
}

}  // namespace

TEST_CASE("cli runs the whole pipeline end to end") {
  TempDir scratch("pipe");
  const std::string data = scratch.dir("data");
  const std::string model_dir = scratch.dir("model");
  const std::string eval_dir = scratch.dir("eval");
  const std::string pred_dir = scratch.dir("pred");

  // synth
  RunResult synth = run_cli(scratch, synth_args(data));
  CAPTURE(synth.err);
  REQUIRE(synth.code == 0);
  CHECK(synth.out.find("wrote") != std::string::npos);
  CHECK(fs::exists(fs::path(data) / "train.e4gd"));
  CHECK(fs::exists(fs::path(data) / "val.e4gd"));
  CHECK(fs::exists(fs::path(data) / "test.e4gd"));
  CHECK(fs::exists(fs::path(data) / "manifest.json"));
  CHECK(fs::exists(fs::path(data) / "effective_config.json"));
  const std::string manifest = slurp(fs::path(data) / "manifest.json");
  CHECK(manifest.find("\"digest\"") != std::string::npos);
  CHECK(manifest.find("\"seed\": 7") != std::string::npos);

  // refuses to clobber without --force, allows it with
  RunResult refuse = run_cli(scratch, synth_args(data));
  CHECK(refuse.code == 2);
  CHECK(refuse.err.find("--force") != std::string::npos);
  const std::string before = slurp(fs::path(data) / "train.e4gd");
  RunResult forced = run_cli(scratch, synth_args(data) + " --force");
  CHECK(forced.code == 0);
  CHECK(slurp(fs::path(data) / "train.e4gd") == before);  // same seed, same bytes

  // train one cheap vanilla epoch
  RunResult train = run_cli(scratch, "train --variant vanilla --seed 7 --max-epochs 1 "
                                     "--batch-size 8 --data " +
                                         data + " --out " + model_dir);
  CAPTURE(train.err);
  REQUIRE(train.code == 0);
  CHECK(train.out.find("training vanilla") != std::string::npos);
  CHECK(train.out.find("best val F1") != std::string::npos);
  CHECK(fs::exists(fs::path(model_dir) / "model.e4gc"));
  const std::string history = slurp(fs::path(model_dir) / "history.tsv");
  CHECK(history.find("epoch\ttrain_loss\tval_f1") == 0);
  // header plus exactly one epoch row
  CHECK(std::count(history.begin(), history.end(), '\n') == 2);

  const std::string ckpt = (fs::path(model_dir) / "model.e4gc").string();

  // eval writes both report flavours
  RunResult eval = run_cli(scratch, "eval --checkpoint " + ckpt + " --data " + data +
                                        " --eval-seeds 1,2 --out " + eval_dir);
  CAPTURE(eval.err);
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("vanilla") != std::string::npos);
  const std::string tsv = slurp(fs::path(eval_dir) / "report.tsv");
  CHECK(tsv.find("e4g-report\t1") == 0);
  e4g::EvalReport report = e4g::parse_report_delimited(tsv);
  CHECK(report.model_name == "vanilla");
  REQUIRE(report.runs.size() == 2);
  CHECK(report.runs[0].seed == 1);
  CHECK(report.runs[1].seed == 2);
  CHECK(slurp(fs::path(eval_dir) / "report.txt").find("f1") != std::string::npos);

  // per-segment prediction plot
  RunResult pred = run_cli(scratch, "predict --checkpoint " + ckpt + " --data " + data +
                                        " --index 0 --out " + pred_dir);
  CAPTURE(pred.err);
  REQUIRE(pred.code == 0);
  CHECK(fs::exists(fs::path(pred_dir) / "prediction.svg"));
  const std::string masks = slurp(fs::path(pred_dir) / "masks.txt");
  CHECK(masks.find("labels\t") == 0);
  CHECK(masks.find("aggregate\t") != std::string::npos);

  // out-of-range index is a data error
  RunResult far = run_cli(scratch, "predict --checkpoint " + ckpt + " --data " + data +
                                       " --index 99999 --out " + pred_dir);
  CHECK(far.code == 3);

  // bench against itself: ratio exactly 1
  RunResult bench = run_cli(scratch, "bench " + ckpt + " --data " + data + " --runs 1");
  CAPTURE(bench.err);
  REQUIRE(bench.code == 0);
  CHECK(bench.out.find("vanilla\t") != std::string::npos);
  CHECK(bench.out.find("\t1.000") != std::string::npos);

  // --samples on a dropout-free checkpoint is a config error
  RunResult samples = run_cli(scratch, "eval --checkpoint " + ckpt + " --data " + data +
                                           " --samples 3");
  CHECK(samples.code == 2);
}

TEST_CASE("cli gradcheck audits every op") {
  TempDir scratch("grad");
  RunResult r = run_cli(scratch, "gradcheck --seed 3");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("op\tmax_rel_err\tstatus") == 0);
  CHECK(r.out.find("conv1d") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("all") != std::string::npos);
}

TEST_CASE("cli rejects malformed invocations with config exit codes") {
  TempDir scratch("err");

  RunResult none = run_cli(scratch, "");
  CHECK(none.code == 2);

  RunResult unknown_flag = run_cli(scratch, "gradcheck --what");
  CHECK(unknown_flag.code == 2);

  RunResult bad_variant = run_cli(scratch, "gradcheck --variant resnet");
  CHECK(bad_variant.code == 2);
  CHECK(bad_variant.err.find("error") != std::string::npos);

  // unknown keys in a config file are spotted, with their full path
  const std::string cfg = scratch.dir("cfg.json");
  {
    std::ofstream f(cfg);
    f << "{\"model\": {\"depth\": 3}}\n";
  }
  RunResult unknown_key = run_cli(scratch, "gradcheck --config " + cfg);
  CHECK(unknown_key.code == 2);
  CHECK(unknown_key.err.find("model.depth") != std::string::npos);

  const std::string bad_json = scratch.dir("bad.json");
  {
    std::ofstream f(bad_json);
    f << "{not json\n";
  }
  CHECK(run_cli(scratch, "gradcheck --config " + bad_json).code == 2);

  // missing files are data errors, not config errors
  RunResult missing = run_cli(scratch, "eval --checkpoint /nonexistent.e4gc "
                                       "--data /nonexistent_dir");
  CHECK(missing.code == 3);

  RunResult help = run_cli(scratch, "--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("synth") != std::string::npos);
}

TEST_CASE("cli config file values flow into the effective config") {
  TempDir scratch("cfg");
  const std::string cfg = scratch.dir("cfg.json");
  {
    std::ofstream f(cfg);
    f << "{\"seed\": 123, \"synth\": {\"patients\": 3, \"minutes_per_patient\": 1.0}}\n";
  }
  const std::string data = scratch.dir("data");
  RunResult synth = run_cli(scratch, "synth --config " + cfg + " --out " + data);
  CAPTURE(synth.err);
  REQUIRE(synth.code == 0);
  const std::string effective = slurp(fs::path(data) / "effective_config.json");
  CHECK(effective.find("\"seed\": 123") != std::string::npos);
  CHECK(effective.find("\"patients\": 3") != std::string::npos);
  // flags override the file
  const std::string data2 = scratch.dir("data2");
  RunResult over = run_cli(scratch, "synth --config " + cfg + " --seed 9 --out " + data2);
  REQUIRE(over.code == 0);
  CHECK(slurp(fs::path(data2) / "effective_config.json").find("\"seed\": 9") !=
        std::string::npos);

  // zero artifact rate still works but warns
  const std::string data3 = scratch.dir("data3");
  RunResult quiet = run_cli(scratch, "synth --patients 3 --minutes 1 --artifact-rate 0 "
                                     "--augment-fraction 0.5 --out " +
                                         data3);
  REQUIRE(quiet.code == 0);
  CHECK(quiet.err.find("warning: artifact rate is 0") != std::string::npos);
}
