#include "e4g/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "e4g/losses.hpp"
#include "e4g/tensor.hpp"

namespace e4g {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

namespace {

using T = Tensor<double>;
using OpFn = std::function<T(Tape<double>&, const std::vector<T>&)>;

T random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  T t = T::zeros(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Checks d(sum(w .* op(inputs)))/d(input_j) against finite differences for
// every input, reporting the worst relative error across all elements.
GradCheckResult check_op(const std::string& name, std::vector<T> inputs,
                         const OpFn& op, double tolerance, Rng& rng) {
  // fixed projection weights make the scalar objective sensitive everywhere
  Tape<double> tape;
  for (T& in : inputs) in.set_requires_grad(true);
  T y = op(tape, inputs);
  T w = random_tensor(y.shape(), rng);
  T loss = sum(tape, mul(tape, y, w));
  tape.backward(loss);

  double worst = 0.0;
  for (size_t j = 0; j < inputs.size(); ++j) {
    std::function<double(const T&)> f = [&](const T& probe) {
      Tape<double> silent(false);
      std::vector<T> ins = inputs;
      ins[j] = probe;
      T out = op(silent, ins);
      double acc = 0.0;
      for (size_t i = 0; i < out.numel(); ++i) acc += out.data()[i] * w.data()[i];
      return acc;
    };
    T fd = finite_diff_grad<double>(f, inputs[j], 1e-5);
    const double* analytic = inputs[j].grad();
    for (size_t i = 0; i < fd.numel(); ++i) {
      const double a = analytic ? analytic[i] : 0.0;
      worst = std::max(worst, rel_err(a, fd.data()[i]));
    }
  }
  return {name, worst, tolerance, worst <= tolerance};
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck(uint64_t seed, double tolerance) {
  Rng root(seed);
  std::vector<GradCheckResult> results;

  {
    Rng rng = root.split(1);
    std::vector<T> ins = {random_tensor({2, 3, 7}, rng), random_tensor({4, 3, 3}, rng),
                          random_tensor({4}, rng)};
    results.push_back(check_op(
        "conv1d", ins,
        [](Tape<double>& t, const std::vector<T>& in) {
          return conv1d(t, in[0], in[1], in[2], 1, 1);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(2);
    std::vector<T> ins = {random_tensor({2, 2, 9}, rng)};
    results.push_back(check_op(
        "maxpool1d", ins,
        [](Tape<double>& t, const std::vector<T>& in) {
          return maxpool1d(t, in[0], 2, 2);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(3);
    std::vector<T> ins = {random_tensor({1, 2, 5}, rng)};
    results.push_back(check_op(
        "upsample_nearest", ins,
        [](Tape<double>& t, const std::vector<T>& in) {
          return upsample_nearest(t, in[0], 9);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(4);
    std::vector<T> ins = {random_tensor({2, 3, 6}, rng), random_tensor({3}, rng, 0.5, 1.5),
                          random_tensor({3}, rng)};
    results.push_back(check_op(
        "batchnorm1d", ins,
        [](Tape<double>& t, const std::vector<T>& in) {
          BatchNormState<double> state = BatchNormState<double>::init(3);
          return batchnorm1d(t, in[0], in[1], in[2], state, RunMode::train, 0.1, 1e-5);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(5);
    std::vector<T> ins = {random_tensor({2, 3, 5}, rng, -2.0, 2.0)};
    results.push_back(check_op(
        "elu", ins,
        [](Tape<double>& t, const std::vector<T>& in) { return elu(t, in[0]); },
        tolerance, rng));
  }
  {
    Rng rng = root.split(6);
    std::vector<T> ins = {random_tensor({2, 2, 4}, rng), random_tensor({2, 3, 4}, rng)};
    results.push_back(check_op(
        "concat_channels", ins,
        [](Tape<double>& t, const std::vector<T>& in) {
          return concat_channels(t, in[0], in[1]);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(7);
    std::vector<T> ins = {random_tensor({2, 3, 5}, rng, -2.0, 2.0)};
    results.push_back(check_op(
        "softmax_classes", ins,
        [](Tape<double>& t, const std::vector<T>& in) {
          return softmax_classes(t, in[0]);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(8);
    LabelMask labels(2 * 5);
    for (uint8_t& y : labels) y = uint8_t(rng.uniform_int(0, 2));
    std::vector<T> ins = {random_tensor({2, 3, 5}, rng, -2.0, 2.0)};
    results.push_back(check_op(
        "cross_entropy", ins,
        [labels](Tape<double>& t, const std::vector<T>& in) {
          return cross_entropy(t, in[0], labels);
        },
        tolerance, rng));
  }
  {
    Rng rng = root.split(9);
    LabelMask labels(2 * 6);
    for (uint8_t& y : labels) y = rng.bernoulli(0.5) ? 1 : 0;
    std::vector<T> ins = {random_tensor({2, 2, 6}, rng, -2.0, 2.0)};
    results.push_back(check_op(
        "dice_loss", ins,
        [labels](Tape<double>& t, const std::vector<T>& in) {
          return dice_loss(t, in[0], labels, 1.0);
        },
        tolerance, rng));
  }
  return results;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
  for (const GradCheckResult& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace e4g
