#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "e4g/tensor.hpp"

namespace e4g {

enum class Variant { vanilla, mcdrop, early_exit };

std::string variant_name(Variant v);
Variant variant_from_string(const std::string& s);

// Temporal U-Net topology. Encoder stages run conv+BN+ELU then pool; the last
// encoder entry is the bottleneck (no pool). Decoder blocks run
// upsample, conv+BN+ELU, concat skip, conv+BN+ELU. The early_exit variant
// attaches an exit branch (upsample to T, conv to C) after each hidden
// decoder block; every variant ends in a head (conv+ELU, conv to C).
struct ModelConfig {
  std::vector<size_t> encoder_channels = {5, 7, 9, 12, 16, 22};
  std::vector<size_t> decoder_channels = {16, 12, 9, 7, 5};
  size_t kernel_size = 4;
  size_t input_channels = 1;
  size_t input_length = 2500;
  size_t num_classes = 2;
  size_t num_exits = 5;
  Variant variant = Variant::early_exit;
  double dropout_p = 0.0;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;

  static ModelConfig for_variant(Variant v);

  // Throws ConfigError when the fields cannot form a valid network.
  void validate() const;
};

template <typename Real>
struct ConvLayer {
  Tensor<Real> w;  // [C_out, C_in, K]
  Tensor<Real> b;  // [C_out]
};

template <typename Real>
struct NormLayer {
  Tensor<Real> gamma;
  Tensor<Real> beta;
  BatchNormState<Real> state;
};

template <typename Real>
struct ExitBundle {
  std::vector<Tensor<Real>> logits;  // each C×T (or N×C×T for batched input)
};

// Called after each named sublayer with the produced shape.
using ShapeObserver = std::function<void(const std::string&, const Shape&)>;

template <typename Real>
struct ModelGraph {
  ModelConfig config;

  std::vector<ConvLayer<Real>> enc_conv;  // encoder stages; last is bottleneck
  std::vector<NormLayer<Real>> enc_norm;
  std::vector<ConvLayer<Real>> dec_conv1, dec_conv2;
  std::vector<NormLayer<Real>> dec_norm1, dec_norm2;
  std::vector<ConvLayer<Real>> exit_conv;  // early_exit only
  ConvLayer<Real> head_conv1, head_conv2;

  // Trainable tensors in a fixed, checkpoint-stable order.
  std::vector<std::pair<std::string, Tensor<Real>>> named_parameters() const;
  // Non-trainable running statistics, same ordering guarantees.
  std::vector<std::pair<std::string, Tensor<Real>>> named_buffers() const;
};

template <typename Real>
ModelGraph<Real> build_model(const ModelConfig& config, Rng& rng);

// One pass through the network. Accepts [M, T] or [N, M, T] input; returns
// num_exits logit tensors for early_exit, otherwise just the head's. The
// graph is mutated only in train mode (batch-norm running statistics).
template <typename Real>
ExitBundle<Real> forward(ModelGraph<Real>& model, Tape<Real>& tape,
                         const Tensor<Real>& x, RunMode mode, Rng& rng,
                         const ShapeObserver& observe = {});

template <typename Real>
uint64_t parameter_count(const ModelGraph<Real>& model);

extern template struct ModelGraph<float>;
extern template struct ModelGraph<double>;

}  // namespace e4g
