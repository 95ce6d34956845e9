#pragma once

#include <optional>
#include <vector>

#include "e4g/model.hpp"
#include "e4g/tensor.hpp"

namespace e4g {

// Aggregated per-time-point class probabilities. Probabilities and all
// derived uncertainty metrics are kept in double precision regardless of the
// model's compute type, so analytic inequalities survive the arithmetic.
struct ProbMap {
  Tensor<double> probs;     // [C, T]
  size_t source_count = 0;  // number of ensemble members averaged
};

struct UncertaintyReport {
  Tensor<double> entropy_per_t;     // [T]
  Tensor<double> confidence_per_t;  // [T]
  double brier = 0.0;               // over all time points
  // Partition metrics are absent (not NaN) when the partition is empty.
  std::optional<double> mean_entropy_true;
  std::optional<double> mean_entropy_false;
  std::optional<double> brier_true;
  std::optional<double> brier_false;
  std::optional<double> confidence_true;
  std::optional<double> confidence_false;
};

// probs = (1/B) * sum_i softmax(logits_i), softmax applied per time point.
template <typename Real>
ProbMap aggregate_exits(const ExitBundle<Real>& bundle);

// Batched variant: slices [N, C, T] logits into per-sample maps. Rank-2
// bundles yield a single-element vector.
template <typename Real>
std::vector<ProbMap> aggregate_exits_batch(const ExitBundle<Real>& bundle);

// Per time point, -sum_c p_c ln p_c with 0 ln 0 := 0.
Tensor<double> predictive_entropy(const ProbMap& p);

// Mean over time of the squared Euclidean distance to the one-hot label.
double brier(const ProbMap& p, const LabelMask& labels);

// Per time point, max_c p_c.
Tensor<double> predictive_confidence(const ProbMap& p);

// Argmax prediction per time point (ties -> class 0), partitioned into
// correct/incorrect; entropy, confidence and Brier restricted per partition.
UncertaintyReport split_by_correctness(const ProbMap& p, const LabelMask& labels);

// n_samples stochastic eval passes (dropout active), softmax outputs
// averaged. Sample i draws its masks from rng.split(i).
template <typename Real>
ProbMap mcdrop_infer(ModelGraph<Real>& model, const Tensor<Real>& x,
                     size_t n_samples, Rng& rng);

}  // namespace e4g
