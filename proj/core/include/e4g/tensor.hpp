#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "e4g/errors.hpp"
#include "e4g/rng.hpp"

namespace e4g {

using Shape = std::vector<size_t>;

// Per-time-point segmentation labels: 0 = clean, 1 = artifact. Batched
// callers pass the row-major concatenation of per-sample masks.
using LabelMask = std::vector<uint8_t>;

size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Forward / dropout / batch-norm behaviour selector.
//   train         - batch statistics, dropout active, tape usually recording
//   eval          - running statistics, dropout off, pure function
//   eval_sampling - like eval but dropout stays active (MC-dropout passes)
enum class RunMode { train, eval, eval_sampling };

// Dense rank<=3 real tensor. Copying a Tensor copies a handle to shared
// storage; ops never mutate the values of their inputs. The gradient buffer
// lives next to the values and is allocated lazily on first use.
template <typename Real>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Real value);
  static Tensor scalar(Real value) { return full({}, value); }
  static Tensor from(Shape shape, std::vector<Real> values);

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return st_->shape; }
  size_t rank() const { return st_->shape.size(); }
  size_t extent(size_t axis) const { return st_->shape[axis]; }
  size_t numel() const { return st_->value.size(); }

  // A Tensor is a handle: constness of the handle does not propagate to the
  // shared storage, so data and grad are writable through const handles.
  Real* data() const { return st_->value.data(); }
  std::span<Real> values() const { return st_->value; }

  // Value of a single-element tensor.
  Real item() const;

  bool requires_grad() const { return st_ && st_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    st_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return st_ && !st_->grad.empty(); }
  Real* grad() const { return st_->grad.empty() ? nullptr : st_->grad.data(); }

  // Allocates a zero gradient buffer if absent.
  void ensure_grad() const;
  void zero_grad() const;

  // Deep copy of values; grad and requires_grad are not copied.
  Tensor clone() const;

  // Stable identity of the underlying storage.
  const void* id() const { return st_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> st_;
};

// Reverse-mode tape. Nodes are appended in execution order, which is a
// topological order by construction (an op's operands always exist before
// its node is recorded). backward() walks the list once, in reverse.
//
// A Tape is single-owner: never share one across threads. Independent tapes
// on different threads are fine.
template <typename Real>
class Tape {
 public:
  Tape() = default;
  explicit Tape(bool recording) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Records a node if recording and any input requires grad; marks the
  // output as requiring grad in that case. pull() must read output.grad()
  // and accumulate (+=) into the grads of inputs that require them.
  void record(Tensor<Real> output, std::vector<Tensor<Real>> inputs,
              std::function<void()> pull);

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every
  // requires_grad tensor reachable backwards from root.
  void backward(const Tensor<Real>& root);

 private:
  struct Node {
    Tensor<Real> output;
    std::vector<Tensor<Real>> inputs;
    std::function<void()> pull;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
};

// Per-channel running statistics owned by a batch-norm layer.
template <typename Real>
struct BatchNormState {
  Tensor<Real> running_mean;
  Tensor<Real> running_var;

  static BatchNormState init(size_t channels) {
    return {Tensor<Real>::zeros({channels}), Tensor<Real>::full({channels}, Real(1))};
  }
};

// ---- Differentiable operations ------------------------------------------
//
// Layout convention: signals are [C, L] or batched [N, C, L], row-major.
// Batched inputs produce batched outputs of the same rank.

// 1D convolution, stride 1, explicit zero padding.
// input [C_in, L], weight [C_out, C_in, K], bias [C_out] -> [C_out, L_out]
// with L_out = L + pad_left + pad_right - K + 1.
template <typename Real>
Tensor<Real> conv1d(Tape<Real>& tape, const Tensor<Real>& input,
                    const Tensor<Real>& weight, const Tensor<Real>& bias,
                    size_t pad_left, size_t pad_right);

// Max pooling; gradient goes to the first maximal index of each window.
template <typename Real>
Tensor<Real> maxpool1d(Tape<Real>& tape, const Tensor<Real>& input,
                       size_t kernel, size_t stride);

// Nearest-neighbour upsampling to an explicit output length.
// Output index j copies input index floor(j * L / target_len).
template <typename Real>
Tensor<Real> upsample_nearest(Tape<Real>& tape, const Tensor<Real>& input,
                              size_t target_len);

// Batch normalisation over the batch and length axes, per channel.
// train mode uses batch statistics and updates `state`; eval and
// eval_sampling use the running statistics.
template <typename Real>
Tensor<Real> batchnorm1d(Tape<Real>& tape, const Tensor<Real>& input,
                         const Tensor<Real>& gamma, const Tensor<Real>& beta,
                         BatchNormState<Real>& state, RunMode mode,
                         Real momentum, Real epsilon);

template <typename Real>
Tensor<Real> elu(Tape<Real>& tape, const Tensor<Real>& input);

// Inverted dropout: zeroes elements with probability p and scales survivors
// by 1/(1-p) in train and eval_sampling modes; identity in eval mode.
template <typename Real>
Tensor<Real> dropout(Tape<Real>& tape, const Tensor<Real>& input, double p,
                     RunMode mode, Rng& rng);

// Concatenation along the channel axis.
template <typename Real>
Tensor<Real> concat_channels(Tape<Real>& tape, const Tensor<Real>& a,
                             const Tensor<Real>& b);

// Softmax over the class (channel) axis, applied per time point,
// stabilised by max subtraction.
template <typename Real>
Tensor<Real> softmax_classes(Tape<Real>& tape, const Tensor<Real>& logits);

// Elementwise helpers used by the loss layer.
template <typename Real>
Tensor<Real> add(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> mul(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> scale(Tape<Real>& tape, const Tensor<Real>& a, Real c);
template <typename Real>
Tensor<Real> sum(Tape<Real>& tape, const Tensor<Real>& a);

// Central finite differences, (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
// Verification oracle; lives outside the tape entirely.
template <typename Real>
Tensor<Real> finite_diff_grad(const std::function<Real(const Tensor<Real>&)>& f,
                              const Tensor<Real>& x, Real eps);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace e4g
