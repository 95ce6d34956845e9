#include "e4g/model.hpp"

#include <cmath>

namespace e4g {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::mcdrop: return "mcdrop";
    case Variant::early_exit: return "early_exit";
  }
  throw ConfigError("unknown variant value");
}

Variant variant_from_string(const std::string& s) {
  if (s == "vanilla") return Variant::vanilla;
  if (s == "mcdrop") return Variant::mcdrop;
  if (s == "early_exit") return Variant::early_exit;
  throw ConfigError("unknown model variant '" + s +
                    "' (expected vanilla, mcdrop or early_exit)");
}

ModelConfig ModelConfig::for_variant(Variant v) {
  ModelConfig c;
  c.variant = v;
  switch (v) {
    case Variant::early_exit:
      c.num_exits = c.decoder_channels.size();  // 4 hidden exits + head
      break;
    case Variant::mcdrop:
      c.num_exits = 1;
      c.dropout_p = 0.2;
      break;
    case Variant::vanilla:
      c.num_exits = 1;
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  if (encoder_channels.size() < 2) {
    throw ConfigError("model: need at least one encoder stage plus a bottleneck");
  }
  if (decoder_channels.size() + 1 != encoder_channels.size()) {
    throw ConfigError("model: decoder must have one fewer stage than the encoder");
  }
  // Mirror layout: decoder channels are the encoder stages reversed.
  for (size_t i = 0; i < decoder_channels.size(); ++i) {
    if (decoder_channels[i] != encoder_channels[decoder_channels.size() - 1 - i]) {
      throw ConfigError("model: decoder channels must mirror the encoder stages");
    }
  }
  for (size_t c : encoder_channels) {
    if (c == 0) throw ConfigError("model: channel counts must be positive");
  }
  if (kernel_size == 0) throw ConfigError("model: kernel_size must be positive");
  if (input_channels == 0) throw ConfigError("model: input_channels must be positive");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  const size_t hidden_exits = decoder_channels.size() - 1;
  const size_t expected_exits = variant == Variant::early_exit ? hidden_exits + 1 : 1;
  if (num_exits != expected_exits) {
    throw ConfigError("model: num_exits must be " + std::to_string(expected_exits) +
                      " for variant " + variant_name(variant));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ConfigError("model: dropout_p must be in [0, 1)");
  }
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0) || !(bn_epsilon > 0.0)) {
    throw ConfigError("model: invalid batch-norm constants");
  }
  // The input must survive one pool per hidden encoder stage.
  size_t len = input_length;
  for (size_t i = 0; i + 1 < encoder_channels.size(); ++i) {
    if (len < 2) {
      throw ConfigError("model: input_length " + std::to_string(input_length) +
                        " too short for " + std::to_string(encoder_channels.size() - 1) +
                        " pooling stages");
    }
    len = (len - 2) / 2 + 1;
  }
}

namespace {

template <typename Real>
ConvLayer<Real> make_conv(size_t c_out, size_t c_in, size_t k, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(c_in * k));
  Tensor<Real> w = Tensor<Real>::zeros({c_out, c_in, k});
  for (Real& v : w.values()) v = Real(rng.uniform(-bound, bound));
  Tensor<Real> b = Tensor<Real>::zeros({c_out});
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  return {w, b};
}

template <typename Real>
NormLayer<Real> make_norm(size_t channels) {
  NormLayer<Real> n{Tensor<Real>::full({channels}, Real(1)),
                    Tensor<Real>::zeros({channels}),
                    BatchNormState<Real>::init(channels)};
  n.gamma.set_requires_grad(true);
  n.beta.set_requires_grad(true);
  return n;
}

}  // namespace

template <typename Real>
ModelGraph<Real> build_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelGraph<Real> m;
  m.config = config;

  const size_t k = config.kernel_size;
  size_t c_prev = config.input_channels;
  for (size_t c : config.encoder_channels) {
    m.enc_conv.push_back(make_conv<Real>(c, c_prev, k, rng));
    m.enc_norm.push_back(make_norm<Real>(c));
    c_prev = c;
  }
  const size_t stages = config.decoder_channels.size();
  for (size_t i = 0; i < stages; ++i) {
    const size_t c_out = config.decoder_channels[i];
    m.dec_conv1.push_back(make_conv<Real>(c_out, c_prev, k, rng));
    m.dec_norm1.push_back(make_norm<Real>(c_out));
    // conv2 follows the concat with the mirrored skip, doubling channels
    m.dec_conv2.push_back(make_conv<Real>(c_out, 2 * c_out, k, rng));
    m.dec_norm2.push_back(make_norm<Real>(c_out));
    c_prev = c_out;
  }
  if (config.variant == Variant::early_exit) {
    for (size_t i = 0; i + 1 < stages; ++i) {
      m.exit_conv.push_back(
          make_conv<Real>(config.num_classes, config.decoder_channels[i], k, rng));
    }
  }
  const size_t c_last = config.decoder_channels.back();
  m.head_conv1 = make_conv<Real>(c_last, c_last, k, rng);
  m.head_conv2 = make_conv<Real>(config.num_classes, c_last, k, rng);
  return m;
}

template <typename Real>
ExitBundle<Real> forward(ModelGraph<Real>& model, Tape<Real>& tape,
                         const Tensor<Real>& x, RunMode mode, Rng& rng,
                         const ShapeObserver& observe) {
  const ModelConfig& cfg = model.config;
  const bool batched = x.defined() && x.rank() == 3;
  if (!x.defined() || (x.rank() != 2 && x.rank() != 3)) {
    throw ShapeError("forward: input must be [M, T] or [N, M, T]");
  }
  const size_t m_axis = batched ? 1 : 0;
  if (x.extent(m_axis) != cfg.input_channels ||
      x.extent(m_axis + 1) != cfg.input_length) {
    throw ShapeError("forward: expected input " + std::to_string(cfg.input_channels) +
                     "x" + std::to_string(cfg.input_length) + ", got " +
                     shape_str(x.shape()));
  }

  const size_t pad_l = (cfg.kernel_size - 1) / 2;
  const size_t pad_r = cfg.kernel_size - 1 - pad_l;
  const Real momentum = Real(cfg.bn_momentum);
  const Real epsilon = Real(cfg.bn_epsilon);
  auto note = [&](const std::string& name, const Tensor<Real>& t) {
    if (observe) observe(name, t.shape());
  };

  const size_t hidden = cfg.encoder_channels.size() - 1;
  std::vector<Tensor<Real>> skips;
  skips.reserve(hidden);
  Tensor<Real> h = x;
  for (size_t i = 0; i < hidden; ++i) {
    const std::string tag = "enc" + std::to_string(i + 1);
    h = conv1d(tape, h, model.enc_conv[i].w, model.enc_conv[i].b, pad_l, pad_r);
    note(tag + ".conv", h);
    h = batchnorm1d(tape, h, model.enc_norm[i].gamma, model.enc_norm[i].beta,
                    model.enc_norm[i].state, mode, momentum, epsilon);
    h = elu(tape, h);
    skips.push_back(h);
    h = maxpool1d(tape, h, 2, 2);
    note(tag + ".pool", h);
  }
  h = conv1d(tape, h, model.enc_conv[hidden].w, model.enc_conv[hidden].b, pad_l, pad_r);
  note("bottleneck.conv", h);
  h = batchnorm1d(tape, h, model.enc_norm[hidden].gamma, model.enc_norm[hidden].beta,
                  model.enc_norm[hidden].state, mode, momentum, epsilon);
  h = elu(tape, h);

  ExitBundle<Real> bundle;
  const size_t stages = cfg.decoder_channels.size();
  for (size_t i = 0; i < stages; ++i) {
    const std::string tag = "dec" + std::to_string(i + 1);
    const Tensor<Real>& skip = skips[hidden - 1 - i];
    const size_t target = skip.extent(skip.rank() - 1);
    h = upsample_nearest(tape, h, target);
    note(tag + ".up", h);
    h = conv1d(tape, h, model.dec_conv1[i].w, model.dec_conv1[i].b, pad_l, pad_r);
    note(tag + ".conv1", h);
    h = batchnorm1d(tape, h, model.dec_norm1[i].gamma, model.dec_norm1[i].beta,
                    model.dec_norm1[i].state, mode, momentum, epsilon);
    h = elu(tape, h);
    h = concat_channels(tape, h, skip);
    note(tag + ".concat", h);
    h = conv1d(tape, h, model.dec_conv2[i].w, model.dec_conv2[i].b, pad_l, pad_r);
    note(tag + ".conv2", h);
    h = batchnorm1d(tape, h, model.dec_norm2[i].gamma, model.dec_norm2[i].beta,
                    model.dec_norm2[i].state, mode, momentum, epsilon);
    h = elu(tape, h);
    if (cfg.variant == Variant::mcdrop && cfg.dropout_p > 0.0) {
      h = dropout(tape, h, cfg.dropout_p, mode, rng);
    }
    if (cfg.variant == Variant::early_exit && i + 1 < stages) {
      const std::string etag = "exit" + std::to_string(i + 1);
      Tensor<Real> e = upsample_nearest(tape, h, cfg.input_length);
      note(etag + ".up", e);
      e = conv1d(tape, e, model.exit_conv[i].w, model.exit_conv[i].b, pad_l, pad_r);
      note(etag + ".conv", e);
      bundle.logits.push_back(e);
    }
  }

  Tensor<Real> y = conv1d(tape, h, model.head_conv1.w, model.head_conv1.b, pad_l, pad_r);
  note("head.conv1", y);
  y = elu(tape, y);
  y = conv1d(tape, y, model.head_conv2.w, model.head_conv2.b, pad_l, pad_r);
  note("head.conv2", y);
  bundle.logits.push_back(y);
  return bundle;
}

template <typename Real>
std::vector<std::pair<std::string, Tensor<Real>>> ModelGraph<Real>::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor<Real>>> out;
  const size_t hidden = config.encoder_channels.size() - 1;
  auto add_conv = [&out](const std::string& name, const ConvLayer<Real>& c) {
    out.emplace_back(name + ".w", c.w);
    out.emplace_back(name + ".b", c.b);
  };
  auto add_norm = [&out](const std::string& name, const NormLayer<Real>& n) {
    out.emplace_back(name + ".gamma", n.gamma);
    out.emplace_back(name + ".beta", n.beta);
  };
  for (size_t i = 0; i < enc_conv.size(); ++i) {
    const std::string tag =
        i < hidden ? "enc" + std::to_string(i + 1) : std::string("bottleneck");
    add_conv(tag + ".conv", enc_conv[i]);
    add_norm(tag + ".bn", enc_norm[i]);
  }
  for (size_t i = 0; i < dec_conv1.size(); ++i) {
    const std::string tag = "dec" + std::to_string(i + 1);
    add_conv(tag + ".conv1", dec_conv1[i]);
    add_norm(tag + ".bn1", dec_norm1[i]);
    add_conv(tag + ".conv2", dec_conv2[i]);
    add_norm(tag + ".bn2", dec_norm2[i]);
  }
  for (size_t i = 0; i < exit_conv.size(); ++i) {
    add_conv("exit" + std::to_string(i + 1) + ".conv", exit_conv[i]);
  }
  add_conv("head.conv1", head_conv1);
  add_conv("head.conv2", head_conv2);
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, Tensor<Real>>> ModelGraph<Real>::named_buffers()
    const {
  std::vector<std::pair<std::string, Tensor<Real>>> out;
  const size_t hidden = config.encoder_channels.size() - 1;
  auto add = [&out](const std::string& name, const NormLayer<Real>& n) {
    out.emplace_back(name + ".running_mean", n.state.running_mean);
    out.emplace_back(name + ".running_var", n.state.running_var);
  };
  for (size_t i = 0; i < enc_norm.size(); ++i) {
    const std::string tag =
        i < hidden ? "enc" + std::to_string(i + 1) : std::string("bottleneck");
    add(tag + ".bn", enc_norm[i]);
  }
  for (size_t i = 0; i < dec_norm1.size(); ++i) {
    const std::string tag = "dec" + std::to_string(i + 1);
    add(tag + ".bn1", dec_norm1[i]);
    add(tag + ".bn2", dec_norm2[i]);
  }
  return out;
}

template <typename Real>
uint64_t parameter_count(const ModelGraph<Real>& model) {
  uint64_t n = 0;
  for (const auto& [name, t] : model.named_parameters()) n += t.numel();
  return n;
}

template struct ModelGraph<float>;
template struct ModelGraph<double>;

#define E4G_INSTANTIATE_MODEL(Real)                                              \
  template ModelGraph<Real> build_model(const ModelConfig&, Rng&);               \
  template ExitBundle<Real> forward(ModelGraph<Real>&, Tape<Real>&,              \
                                    const Tensor<Real>&, RunMode, Rng&,          \
                                    const ShapeObserver&);                       \
  template uint64_t parameter_count(const ModelGraph<Real>&);

E4G_INSTANTIATE_MODEL(float)
E4G_INSTANTIATE_MODEL(double)

#undef E4G_INSTANTIATE_MODEL

}  // namespace e4g
