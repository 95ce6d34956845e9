#include "e4g/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "e4g/evaluation.hpp"
#include "e4g/rng.hpp"

namespace e4g {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (!(target_f1 > 0.0) || target_f1 > 1.0) {
    throw ConfigError("train: target_f1 must be in (0, 1]");
  }
  if (mcdrop_samples < 1) throw ConfigError("train: mcdrop_samples must be >= 1");
  weights.validate();
}

void AdamState::init(const std::vector<std::pair<std::string, Tensor<float>>>& params) {
  t = 0;
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& [name, p] : params) {
    m.push_back(Tensor<float>::zeros(p.shape()));
    v.push_back(Tensor<float>::zeros(p.shape()));
  }
}

void adam_step(const std::vector<std::pair<std::string, Tensor<float>>>& params,
               AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: state does not match parameter list");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor<float>& p = params[i].second;
    if (p.shape() != state.m[i].shape()) {
      throw ShapeError("adam_step: moment shape mismatch for " + params[i].first);
    }
    if (!p.has_grad()) {
      throw Error("adam_step: parameter " + params[i].first + " has no gradient");
    }
    float* theta = p.data();
    const float* g = p.grad();
    float* mi = state.m[i].data();
    float* vi = state.v[i].data();
    const size_t n = p.numel();
    for (size_t k = 0; k < n; ++k) {
      const double gk = g[k];
      const double mk = state.beta1 * mi[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * vi[k] + (1.0 - state.beta2) * gk * gk;
      mi[k] = float(mk);
      vi[k] = float(vk);
      theta[k] -= float(lr * (mk / bc1) / (std::sqrt(vk / bc2) + state.epsilon));
    }
  }
}

namespace {

Tensor<float> stack_batch(const std::vector<Segment>& data,
                          const std::vector<size_t>& order, size_t begin, size_t end) {
  const size_t n = end - begin;
  Tensor<float> x = Tensor<float>::zeros({n, 1, kSegmentLen});
  for (size_t i = 0; i < n; ++i) {
    std::copy_n(data[order[begin + i]].x.data(), kSegmentLen, x.data() + i * kSegmentLen);
  }
  return x;
}

LabelMask stack_labels(const std::vector<Segment>& data,
                       const std::vector<size_t>& order, size_t begin, size_t end) {
  LabelMask labels;
  labels.reserve((end - begin) * kSegmentLen);
  for (size_t i = begin; i < end; ++i) {
    const Segment& s = data[order[i]];
    labels.insert(labels.end(), s.y.begin(), s.y.end());
  }
  return labels;
}

AdamState clone_state(const AdamState& state) {
  AdamState out;
  out.beta1 = state.beta1;
  out.beta2 = state.beta2;
  out.epsilon = state.epsilon;
  out.t = state.t;
  for (const Tensor<float>& t : state.m) out.m.push_back(t.clone());
  for (const Tensor<float>& t : state.v) out.v.push_back(t.clone());
  return out;
}

}  // namespace

Checkpoint snapshot_model(ModelGraph<float>& model) {
  Checkpoint c;
  c.config = model.config;
  for (const auto& [name, t] : model.named_parameters()) {
    c.tensors.emplace_back(name, t.clone());
  }
  for (const auto& [name, t] : model.named_buffers()) {
    c.tensors.emplace_back(name, t.clone());
  }
  return c;
}

Checkpoint train(ModelGraph<float>& model, const std::vector<Segment>& train_data,
                 const std::vector<Segment>& val_data, const TrainConfig& config) {
  config.validate();
  if (train_data.empty()) throw DataError("train: empty training set");
  if (val_data.empty()) throw DataError("train: empty validation set");
  if (model.config.variant != config.variant) {
    throw ConfigError("train: model variant " + variant_name(model.config.variant) +
                      " does not match config " + variant_name(config.variant));
  }
  const bool multi_exit = config.variant == Variant::early_exit;
  if (multi_exit && config.weights.alpha.size() != model.config.num_exits) {
    throw ConfigError("train: alpha has " + std::to_string(config.weights.alpha.size()) +
                      " entries for " + std::to_string(model.config.num_exits) + " exits");
  }

  auto params = model.named_parameters();
  for (auto& [name, p] : params) {
    p.set_requires_grad(true);
    p.ensure_grad();
  }
  AdamState state;
  state.init(params);
  Rng root(config.seed);

  std::vector<size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), size_t(0));

  Checkpoint best;
  double best_f1 = -1.0;
  size_t epochs_since_best = 0;
  std::vector<EpochStats> history;

  for (size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng erng = root.split(epoch);
    for (size_t i = order.size() - 1; i > 0; --i) {
      const size_t j = size_t(erng.uniform_int(0, int64_t(i)));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    std::vector<double> exit_sum(model.config.num_exits, 0.0);
    for (size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const size_t end = std::min(order.size(), begin + config.batch_size);
      Tensor<float> x = stack_batch(train_data, order, begin, end);
      LabelMask labels = stack_labels(train_data, order, begin, end);
      for (auto& [name, p] : params) p.zero_grad();

      Tape<float> tape(true);
      ExitBundle<float> bundle = forward(model, tape, x, RunMode::train, erng);
      std::vector<Tensor<float>> per_exit;
      Tensor<float> loss;
      if (multi_exit) {
        loss = ensemble_loss(tape, bundle, labels, config.weights, &per_exit);
      } else {
        loss = exit_loss(tape, bundle.logits[0], labels, config.weights);
        per_exit = {loss};
      }
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      tape.backward(loss);
      adam_step(params, state, config.learning_rate);

      const double w = double(end - begin);
      loss_sum += lv * w;
      for (size_t e = 0; e < per_exit.size(); ++e) {
        exit_sum[e] += double(per_exit[e].item()) * w;
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / double(order.size());
    for (double s : exit_sum) stats.per_exit_loss.push_back(s / double(order.size()));
    stats.val_f1 = evaluate_model(model, val_data, config.mcdrop_samples, config.seed,
                                  config.batch_size)
                       .f1;
    history.push_back(stats);

    if (stats.val_f1 > best_f1) {
      best_f1 = stats.val_f1;
      best = snapshot_model(model);
      best.adam = clone_state(state);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (best_f1 >= config.target_f1) break;
    if (epochs_since_best >= config.patience) break;
  }

  best.history = std::move(history);
  return best;
}

}  // namespace e4g
