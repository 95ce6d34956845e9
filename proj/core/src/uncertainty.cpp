#include "e4g/uncertainty.hpp"

#include <algorithm>
#include <cmath>

namespace e4g {

namespace {

void check_probmap(const ProbMap& p, const char* what) {
  if (!p.probs.defined() || p.probs.rank() != 2 || p.probs.extent(0) < 2) {
    throw ShapeError(std::string(what) + ": ProbMap must hold [C, T] with C >= 2");
  }
}

// Accumulates the softmax of one logits tensor into acc (both row-major C×T
// blocks of the same extent).
template <typename Real>
void add_softmax(const Real* x, size_t c, size_t t, double* acc) {
  for (size_t j = 0; j < t; ++j) {
    double mx = x[j];
    for (size_t ci = 1; ci < c; ++ci) mx = std::max(mx, double(x[ci * t + j]));
    double denom = 0.0;
    for (size_t ci = 0; ci < c; ++ci) denom += std::exp(double(x[ci * t + j]) - mx);
    for (size_t ci = 0; ci < c; ++ci) {
      acc[ci * t + j] += std::exp(double(x[ci * t + j]) - mx) / denom;
    }
  }
}

}  // namespace

template <typename Real>
std::vector<ProbMap> aggregate_exits_batch(const ExitBundle<Real>& bundle) {
  if (bundle.logits.empty()) throw ShapeError("aggregate_exits: empty bundle");
  const Tensor<Real>& first = bundle.logits.front();
  if (!first.defined() || (first.rank() != 2 && first.rank() != 3)) {
    throw ShapeError("aggregate_exits: logits must be [C, T] or [N, C, T]");
  }
  for (const Tensor<Real>& l : bundle.logits) {
    if (!l.defined() || l.shape() != first.shape()) {
      throw ShapeError("aggregate_exits: exits disagree on logits shape");
    }
  }
  const bool batched = first.rank() == 3;
  const size_t n = batched ? first.extent(0) : 1;
  const size_t c = first.extent(batched ? 1 : 0);
  const size_t t = first.extent(batched ? 2 : 1);
  if (c < 2) throw ShapeError("aggregate_exits: need >= 2 classes");

  std::vector<ProbMap> maps;
  maps.reserve(n);
  const double inv_b = 1.0 / double(bundle.logits.size());
  for (size_t s = 0; s < n; ++s) {
    Tensor<double> probs = Tensor<double>::zeros({c, t});
    for (const Tensor<Real>& l : bundle.logits) {
      add_softmax(l.data() + s * c * t, c, t, probs.data());
    }
    for (double& v : probs.values()) v *= inv_b;
    maps.push_back(ProbMap{probs, bundle.logits.size()});
  }
  return maps;
}

template <typename Real>
ProbMap aggregate_exits(const ExitBundle<Real>& bundle) {
  if (!bundle.logits.empty() && bundle.logits.front().defined() &&
      bundle.logits.front().rank() == 3) {
    throw ShapeError("aggregate_exits: got batched logits; use aggregate_exits_batch");
  }
  return aggregate_exits_batch(bundle).front();
}

Tensor<double> predictive_entropy(const ProbMap& p) {
  check_probmap(p, "predictive_entropy");
  const size_t c = p.probs.extent(0);
  const size_t t = p.probs.extent(1);
  Tensor<double> out = Tensor<double>::zeros({t});
  const double* x = p.probs.data();
  for (size_t j = 0; j < t; ++j) {
    double h = 0.0;
    for (size_t ci = 0; ci < c; ++ci) {
      const double v = x[ci * t + j];
      if (v > 0.0) h -= v * std::log(v);
    }
    out.data()[j] = h;
  }
  return out;
}

Tensor<double> predictive_confidence(const ProbMap& p) {
  check_probmap(p, "predictive_confidence");
  const size_t c = p.probs.extent(0);
  const size_t t = p.probs.extent(1);
  Tensor<double> out = Tensor<double>::zeros({t});
  const double* x = p.probs.data();
  for (size_t j = 0; j < t; ++j) {
    double mx = x[j];
    for (size_t ci = 1; ci < c; ++ci) mx = std::max(mx, x[ci * t + j]);
    out.data()[j] = mx;
  }
  return out;
}

namespace {

double brier_column(const double* x, size_t c, size_t t, size_t j, uint8_t label) {
  double acc = 0.0;
  for (size_t ci = 0; ci < c; ++ci) {
    const double target = ci == label ? 1.0 : 0.0;
    const double d = x[ci * t + j] - target;
    acc += d * d;
  }
  return acc;
}

}  // namespace

double brier(const ProbMap& p, const LabelMask& labels) {
  check_probmap(p, "brier");
  const size_t c = p.probs.extent(0);
  const size_t t = p.probs.extent(1);
  if (labels.size() != t) throw ShapeError("brier: labels length mismatch");
  for (uint8_t y : labels) {
    if (y >= c) throw DataError("brier: label outside class range");
  }
  const double* x = p.probs.data();
  double acc = 0.0;
  for (size_t j = 0; j < t; ++j) acc += brier_column(x, c, t, j, labels[j]);
  return acc / double(t);
}

UncertaintyReport split_by_correctness(const ProbMap& p, const LabelMask& labels) {
  check_probmap(p, "split_by_correctness");
  const size_t c = p.probs.extent(0);
  const size_t t = p.probs.extent(1);
  if (labels.size() != t) throw ShapeError("split_by_correctness: labels length mismatch");
  for (uint8_t y : labels) {
    if (y >= c) throw DataError("split_by_correctness: label outside class range");
  }

  UncertaintyReport r;
  r.entropy_per_t = predictive_entropy(p);
  r.confidence_per_t = predictive_confidence(p);
  const double* x = p.probs.data();

  double ent[2] = {0.0, 0.0}, conf[2] = {0.0, 0.0}, br[2] = {0.0, 0.0};
  size_t count[2] = {0, 0};
  double brier_all = 0.0;
  for (size_t j = 0; j < t; ++j) {
    size_t pred = 0;
    double best = x[j];
    for (size_t ci = 1; ci < c; ++ci) {
      if (x[ci * t + j] > best) {  // strict: ties keep class 0
        best = x[ci * t + j];
        pred = ci;
      }
    }
    const int part = pred == labels[j] ? 1 : 0;  // 1 = correct ("true")
    const double b = brier_column(x, c, t, j, labels[j]);
    ent[part] += r.entropy_per_t.data()[j];
    conf[part] += r.confidence_per_t.data()[j];
    br[part] += b;
    brier_all += b;
    ++count[part];
  }
  r.brier = t > 0 ? brier_all / double(t) : 0.0;
  if (count[1] > 0) {
    r.mean_entropy_true = ent[1] / double(count[1]);
    r.confidence_true = conf[1] / double(count[1]);
    r.brier_true = br[1] / double(count[1]);
  }
  if (count[0] > 0) {
    r.mean_entropy_false = ent[0] / double(count[0]);
    r.confidence_false = conf[0] / double(count[0]);
    r.brier_false = br[0] / double(count[0]);
  }
  return r;
}

template <typename Real>
ProbMap mcdrop_infer(ModelGraph<Real>& model, const Tensor<Real>& x,
                     size_t n_samples, Rng& rng) {
  if (model.config.variant != Variant::mcdrop) {
    throw ConfigError("mcdrop_infer: model variant is " +
                      variant_name(model.config.variant) + ", expected mcdrop");
  }
  if (n_samples == 0) throw ConfigError("mcdrop_infer: n_samples must be >= 1");
  if (!x.defined() || x.rank() != 2) {
    throw ShapeError("mcdrop_infer: expected a per-sample [M, T] input");
  }

  const size_t c = model.config.num_classes;
  const size_t t = model.config.input_length;
  Tensor<double> probs = Tensor<double>::zeros({c, t});
  for (size_t i = 0; i < n_samples; ++i) {
    Rng sample_rng = rng.split(i);
    Tape<Real> tape(false);
    ExitBundle<Real> bundle = forward(model, tape, x, RunMode::eval_sampling, sample_rng);
    add_softmax(bundle.logits.back().data(), c, t, probs.data());
  }
  for (double& v : probs.values()) v /= double(n_samples);
  return ProbMap{probs, n_samples};
}

#define E4G_INSTANTIATE_UNCERTAINTY(Real)                                          \
  template ProbMap aggregate_exits(const ExitBundle<Real>&);                       \
  template std::vector<ProbMap> aggregate_exits_batch(const ExitBundle<Real>&);    \
  template ProbMap mcdrop_infer(ModelGraph<Real>&, const Tensor<Real>&, size_t,    \
                                Rng&);

E4G_INSTANTIATE_UNCERTAINTY(float)
E4G_INSTANTIATE_UNCERTAINTY(double)

#undef E4G_INSTANTIATE_UNCERTAINTY

}  // namespace e4g
