#pragma once

#include <cstdint>
#include <vector>

#include "e4g/model.hpp"
#include "e4g/tensor.hpp"

namespace e4g {

struct LossWeights {
  std::vector<double> alpha = {1.0, 1.0, 1.0, 1.0, 1.0};
  double ce_weight = 1.0;
  double dice_weight = 1.0;
  double dice_smooth = 1.0;

  void validate() const;  // throws ConfigError
};

// Mean over time points of -log softmax probability of the true class.
// logits [C, T] or [N, C, T]; labels length T (or N*T).
template <typename Real>
Tensor<Real> cross_entropy(Tape<Real>& tape, const Tensor<Real>& logits,
                           const LabelMask& labels);

// 1 - (2*sum(p*y) + smooth) / (sum(p) + sum(y) + smooth) on the artifact
// class; batched input averages the per-sample dice losses.
template <typename Real>
Tensor<Real> dice_loss(Tape<Real>& tape, const Tensor<Real>& logits,
                       const LabelMask& labels, Real smooth);

template <typename Real>
Tensor<Real> exit_loss(Tape<Real>& tape, const Tensor<Real>& logits,
                       const LabelMask& labels, const LossWeights& weights);

// Weighted sum of per-exit losses, alpha[i] * exit_loss(bundle[i]). When
// per_exit is given it receives the unscaled exit losses (for reporting).
template <typename Real>
Tensor<Real> ensemble_loss(Tape<Real>& tape, const ExitBundle<Real>& bundle,
                           const LabelMask& labels, const LossWeights& weights,
                           std::vector<Tensor<Real>>* per_exit = nullptr);

}  // namespace e4g
