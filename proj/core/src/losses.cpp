#include "e4g/losses.hpp"

#include <cmath>

namespace e4g {

void LossWeights::validate() const {
  for (double a : alpha) {
    if (!(a >= 0.0)) throw ConfigError("loss weights: alpha entries must be >= 0");
  }
  if (!(ce_weight >= 0.0) || !(dice_weight >= 0.0)) {
    throw ConfigError("loss weights: ce_weight and dice_weight must be >= 0");
  }
  if (!(dice_smooth > 0.0)) throw ConfigError("loss weights: dice_smooth must be > 0");
}

namespace {

struct LogitsView {
  size_t n, c, t;
};

template <typename Real>
LogitsView check_logits(const Tensor<Real>& logits, const LabelMask& labels,
                        const char* what) {
  LogitsView v{};
  if (logits.defined() && logits.rank() == 2) {
    v = {1, logits.extent(0), logits.extent(1)};
  } else if (logits.defined() && logits.rank() == 3) {
    v = {logits.extent(0), logits.extent(1), logits.extent(2)};
  } else {
    throw ShapeError(std::string(what) + ": logits must be [C, T] or [N, C, T]");
  }
  if (v.c < 2) throw ShapeError(std::string(what) + ": need >= 2 classes");
  if (labels.size() != v.n * v.t) {
    throw ShapeError(std::string(what) + ": labels length " +
                     std::to_string(labels.size()) + " does not match " +
                     std::to_string(v.n * v.t) + " time points");
  }
  return v;
}

// Stable softmax probability of class 1 for a two-class column.
template <typename Real>
double prob_artifact(Real l0, Real l1) {
  const double d = double(l1) - double(l0);
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

}  // namespace

template <typename Real>
Tensor<Real> cross_entropy(Tape<Real>& tape, const Tensor<Real>& logits,
                           const LabelMask& labels) {
  const LogitsView v = check_logits(logits, labels, "cross_entropy");
  for (uint8_t y : labels) {
    if (y >= v.c) throw DataError("cross_entropy: label outside class range");
  }

  const Real* x = logits.data();
  double acc = 0.0;
  for (size_t n = 0; n < v.n; ++n) {
    const size_t base = n * v.c * v.t;
    for (size_t t = 0; t < v.t; ++t) {
      double mx = x[base + t];
      for (size_t c = 1; c < v.c; ++c) mx = std::max(mx, double(x[base + c * v.t + t]));
      double denom = 0.0;
      for (size_t c = 0; c < v.c; ++c) denom += std::exp(double(x[base + c * v.t + t]) - mx);
      const double lse = mx + std::log(denom);
      acc += lse - double(x[base + labels[n * v.t + t] * v.t + t]);
    }
  }
  const size_t count = v.n * v.t;
  Tensor<Real> out = Tensor<Real>::scalar(Real(acc / double(count)));

  tape.record(out, {logits}, [logits, out, labels, v, count]() mutable {
    if (!logits.requires_grad()) return;
    logits.ensure_grad();
    const Real gy = out.grad()[0];
    const Real* x = logits.data();
    Real* gx = logits.grad();
    const double inv = double(gy) / double(count);
    for (size_t n = 0; n < v.n; ++n) {
      const size_t base = n * v.c * v.t;
      for (size_t t = 0; t < v.t; ++t) {
        double mx = x[base + t];
        for (size_t c = 1; c < v.c; ++c) mx = std::max(mx, double(x[base + c * v.t + t]));
        double denom = 0.0;
        for (size_t c = 0; c < v.c; ++c) denom += std::exp(double(x[base + c * v.t + t]) - mx);
        const uint8_t y = labels[n * v.t + t];
        for (size_t c = 0; c < v.c; ++c) {
          const double p = std::exp(double(x[base + c * v.t + t]) - mx) / denom;
          gx[base + c * v.t + t] += Real(inv * (p - (c == y ? 1.0 : 0.0)));
        }
      }
    }
  });
  return out;
}

template <typename Real>
Tensor<Real> dice_loss(Tape<Real>& tape, const Tensor<Real>& logits,
                       const LabelMask& labels, Real smooth) {
  const LogitsView v = check_logits(logits, labels, "dice_loss");
  if (v.c != 2) throw ShapeError("dice_loss: defined for two classes");
  if (!(smooth > Real(0))) throw ConfigError("dice_loss: smooth must be > 0");

  const Real* x = logits.data();
  double acc = 0.0;
  for (size_t n = 0; n < v.n; ++n) {
    const size_t base = n * 2 * v.t;
    double sp = 0.0, sy = 0.0, inter = 0.0;
    for (size_t t = 0; t < v.t; ++t) {
      const double p = prob_artifact(x[base + t], x[base + v.t + t]);
      const double y = labels[n * v.t + t] ? 1.0 : 0.0;
      sp += p;
      sy += y;
      inter += p * y;
    }
    acc += 1.0 - (2.0 * inter + double(smooth)) / (sp + sy + double(smooth));
  }
  Tensor<Real> out = Tensor<Real>::scalar(Real(acc / double(v.n)));

  tape.record(out, {logits}, [logits, out, labels, v, smooth]() mutable {
    if (!logits.requires_grad()) return;
    logits.ensure_grad();
    const Real gy = out.grad()[0];
    const Real* x = logits.data();
    Real* gx = logits.grad();
    for (size_t n = 0; n < v.n; ++n) {
      const size_t base = n * 2 * v.t;
      double sp = 0.0, sy = 0.0, inter = 0.0;
      for (size_t t = 0; t < v.t; ++t) {
        const double p = prob_artifact(x[base + t], x[base + v.t + t]);
        const double y = labels[n * v.t + t] ? 1.0 : 0.0;
        sp += p;
        sy += y;
        inter += p * y;
      }
      const double d = sp + sy + double(smooth);
      const double num = 2.0 * inter + double(smooth);
      const double outer = double(gy) / double(v.n);
      for (size_t t = 0; t < v.t; ++t) {
        const double p = prob_artifact(x[base + t], x[base + v.t + t]);
        const double y = labels[n * v.t + t] ? 1.0 : 0.0;
        // d(dice)/dp = (num - 2*y*d) / d^2, then through the 2-class softmax
        const double dd_dp = (num - 2.0 * y * d) / (d * d);
        const double dp_dl = p * (1.0 - p);
        gx[base + v.t + t] += Real(outer * dd_dp * dp_dl);
        gx[base + t] -= Real(outer * dd_dp * dp_dl);
      }
    }
  });
  return out;
}

template <typename Real>
Tensor<Real> exit_loss(Tape<Real>& tape, const Tensor<Real>& logits,
                       const LabelMask& labels, const LossWeights& weights) {
  weights.validate();
  Tensor<Real> ce = cross_entropy(tape, logits, labels);
  Tensor<Real> dc = dice_loss(tape, logits, labels, Real(weights.dice_smooth));
  return add(tape, scale(tape, ce, Real(weights.ce_weight)),
             scale(tape, dc, Real(weights.dice_weight)));
}

template <typename Real>
Tensor<Real> ensemble_loss(Tape<Real>& tape, const ExitBundle<Real>& bundle,
                           const LabelMask& labels, const LossWeights& weights,
                           std::vector<Tensor<Real>>* per_exit) {
  weights.validate();
  if (bundle.logits.size() != weights.alpha.size()) {
    throw ShapeError("ensemble_loss: bundle has " +
                     std::to_string(bundle.logits.size()) + " exits but alpha has " +
                     std::to_string(weights.alpha.size()) + " entries");
  }
  if (per_exit) per_exit->clear();
  Tensor<Real> total;
  for (size_t i = 0; i < bundle.logits.size(); ++i) {
    Tensor<Real> ei = exit_loss(tape, bundle.logits[i], labels, weights);
    if (per_exit) per_exit->push_back(ei);
    Tensor<Real> li = scale(tape, ei, Real(weights.alpha[i]));
    total = total.defined() ? add(tape, total, li) : li;
  }
  return total;
}

#define E4G_INSTANTIATE_LOSSES(Real)                                               \
  template Tensor<Real> cross_entropy(Tape<Real>&, const Tensor<Real>&,            \
                                      const LabelMask&);                           \
  template Tensor<Real> dice_loss(Tape<Real>&, const Tensor<Real>&,               \
                                  const LabelMask&, Real);                         \
  template Tensor<Real> exit_loss(Tape<Real>&, const Tensor<Real>&,               \
                                  const LabelMask&, const LossWeights&);           \
  template Tensor<Real> ensemble_loss(Tape<Real>&, const ExitBundle<Real>&,       \
                                      const LabelMask&, const LossWeights&,        \
                                      std::vector<Tensor<Real>>*);

E4G_INSTANTIATE_LOSSES(float)
E4G_INSTANTIATE_LOSSES(double)

#undef E4G_INSTANTIATE_LOSSES

}  // namespace e4g
