#pragma once

#include <string>
#include <vector>

#include "e4g/tensor.hpp"

namespace e4g {

// One shaded panel of the prediction figure.
struct PredictionPanel {
  std::string title;
  LabelMask predicted;
};

// Writes a self-contained SVG: one panel per entry, each showing the signal
// trace over shaded spans — green where only the label marks an artifact, red
// where only the prediction does, brown where both agree. Deterministic bytes
// for identical inputs.
void emit_prediction_plot(const Tensor<float>& x, const LabelMask& labels,
                          const std::vector<PredictionPanel>& panels,
                          const std::string& path);

}  // namespace e4g
