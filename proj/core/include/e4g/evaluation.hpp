#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "e4g/model.hpp"
#include "e4g/signal.hpp"
#include "e4g/uncertainty.hpp"

namespace e4g {

// Micro-averaged per-time-point confusion counts; artifact (1) is positive.
// Mergeable so per-segment tallies can reduce deterministically.
struct ConfusionCounts {
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  void observe(bool predicted, bool actual);
  void merge(const ConfusionCounts& other);
  uint64_t total() const { return tp + fp + tn + fn; }
};

struct F1Result {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool degenerate = false;  // some denominator was zero and got clamped to 0
};

F1Result f1_from_counts(const ConfusionCounts& counts);

// Argmax of the aggregated probabilities vs labels, reduced to F1.
F1Result f1_precision_recall(const ProbMap& probs, const LabelMask& labels);

ConfusionCounts confusion_from_probmap(const ProbMap& probs, const LabelMask& labels);

// Adds each exit's own argmax confusion into counts[i] (batched or not).
template <typename Real>
void accumulate_per_exit(const ExitBundle<Real>& bundle, const LabelMask& labels,
                         std::vector<ConfusionCounts>& counts);

template <typename Real>
std::vector<double> per_exit_f1(const ExitBundle<Real>& bundle, const LabelMask& labels);

// ---- latency ---------------------------------------------------------------

struct LatencyEntry {
  std::string name;
  std::function<void()> run;  // one full-test-set inference
};

struct LatencyResult {
  std::string name;
  double mean_seconds = 0.0;
  double ratio = 1.0;  // vs the first entry
};

// Wall-clock mean of n_runs per entry; first entry is the baseline.
std::vector<LatencyResult> latency_bench(const std::vector<LatencyEntry>& entries,
                                         size_t n_runs = 5);

// ---- reports ---------------------------------------------------------------

// One model evaluated under one seed. Uncertainty splits are reported at two
// granularities: tp_* merges every time point of the test set into one
// correct/incorrect partition; sm_* averages per-sample partition means.
struct RunMetrics {
  uint64_t seed = 0;
  double f1 = 0.0, precision = 0.0, recall = 0.0;
  bool degenerate = false;
  std::vector<double> per_exit_f1;
  std::optional<double> tp_entropy_true, tp_entropy_false;
  std::optional<double> tp_brier_true, tp_brier_false;
  std::optional<double> tp_confidence_true, tp_confidence_false;
  std::optional<double> sm_entropy_true, sm_entropy_false;
  std::optional<double> sm_brier_true, sm_brier_false;
  std::optional<double> sm_confidence_true, sm_confidence_false;
  double brier = 0.0;
  double latency_ratio = 1.0;
};

struct EvalReport {
  std::string model_name;
  std::string config_digest;
  std::vector<RunMetrics> runs;
};

// Aggregated per-sample probability maps over a dataset: the exit mean in one
// pass for early_exit/vanilla, `mcdrop_samples` stochastic passes for mcdrop.
std::vector<ProbMap> infer_probmaps(ModelGraph<float>& model,
                                    const std::vector<Segment>& data,
                                    size_t mcdrop_samples, uint64_t seed,
                                    size_t batch_size = 50);

// Evaluates a checkpointed model over a test split. For mcdrop variants the
// aggregate uses `mcdrop_samples` stochastic passes; other variants ignore it.
RunMetrics evaluate_model(ModelGraph<float>& model, const std::vector<Segment>& test,
                          size_t mcdrop_samples, uint64_t seed, size_t batch_size = 50);

// "0.838±.06": mean to 3 decimals, std to 2 decimals without leading zero.
std::string format_mean_std(double mean, double stddev);

// Human-readable table with mean±std rows across runs.
std::string emit_report_text(const EvalReport& report);

// Machine-readable: header row, then one %.17g row per run (exact round-trip).
std::string emit_report_delimited(const EvalReport& report);
EvalReport parse_report_delimited(const std::string& text);

}  // namespace e4g
