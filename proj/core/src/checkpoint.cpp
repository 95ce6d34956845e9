#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "e4g/rng.hpp"
#include "e4g/trainer.hpp"
#include "io_bytes.hpp"

namespace e4g {

namespace {

constexpr char kMagic[4] = {'E', '4', 'G', 'C'};
constexpr uint32_t kVersion = 1;

using detail::ByteReader;

void put_shape_payload(std::string& out, const Tensor<float>& t) {
  detail::put_u8(out, uint8_t(t.rank()));
  for (size_t d = 0; d < t.rank(); ++d) detail::put_u32(out, uint32_t(t.extent(d)));
  const float* x = t.data();
  for (size_t i = 0; i < t.numel(); ++i) detail::put_f32(out, x[i]);
}

Tensor<float> get_shape_payload(ByteReader& r) {
  const uint8_t rank = r.u8();
  if (rank == 0 || rank > 4) throw IoError("checkpoint: bad tensor rank");
  Shape shape;
  for (uint8_t d = 0; d < rank; ++d) shape.push_back(r.u32());
  Tensor<float> t = Tensor<float>::zeros(shape);
  float* x = t.data();
  for (size_t i = 0; i < t.numel(); ++i) x[i] = r.f32();
  return t;
}

void put_config(std::string& out, const ModelConfig& c) {
  detail::put_u8(out, uint8_t(c.variant));
  detail::put_u32(out, uint32_t(c.kernel_size));
  detail::put_u32(out, uint32_t(c.input_channels));
  detail::put_u32(out, uint32_t(c.input_length));
  detail::put_u32(out, uint32_t(c.num_classes));
  detail::put_u32(out, uint32_t(c.num_exits));
  detail::put_f64(out, c.dropout_p);
  detail::put_f64(out, c.bn_momentum);
  detail::put_f64(out, c.bn_epsilon);
  detail::put_u8(out, uint8_t(c.encoder_channels.size()));
  for (size_t ch : c.encoder_channels) detail::put_u32(out, uint32_t(ch));
  detail::put_u8(out, uint8_t(c.decoder_channels.size()));
  for (size_t ch : c.decoder_channels) detail::put_u32(out, uint32_t(ch));
}

ModelConfig get_config(ByteReader& r) {
  ModelConfig c;
  const uint8_t v = r.u8();
  if (v > uint8_t(Variant::early_exit)) throw IoError("checkpoint: bad variant byte");
  c.variant = Variant(v);
  c.kernel_size = r.u32();
  c.input_channels = r.u32();
  c.input_length = r.u32();
  c.num_classes = r.u32();
  c.num_exits = r.u32();
  c.dropout_p = r.f64();
  c.bn_momentum = r.f64();
  c.bn_epsilon = r.f64();
  c.encoder_channels.clear();
  const uint8_t ne = r.u8();
  for (uint8_t i = 0; i < ne; ++i) c.encoder_channels.push_back(r.u32());
  c.decoder_channels.clear();
  const uint8_t nd = r.u8();
  for (uint8_t i = 0; i < nd; ++i) c.decoder_channels.push_back(r.u32());
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  detail::put_u32(out, kVersion);
  put_config(out, checkpoint.config);

  detail::put_u32(out, uint32_t(checkpoint.tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    if (name.size() > 0xffff) throw IoError("checkpoint: tensor name too long");
    detail::put_u16(out, uint16_t(name.size()));
    out.append(name);
    put_shape_payload(out, t);
  }

  detail::put_u8(out, checkpoint.adam ? 1 : 0);
  if (checkpoint.adam) {
    const AdamState& a = *checkpoint.adam;
    if (a.m.size() != a.v.size()) throw IoError("checkpoint: ragged Adam state");
    detail::put_f64(out, a.beta1);
    detail::put_f64(out, a.beta2);
    detail::put_f64(out, a.epsilon);
    detail::put_u64(out, a.t);
    detail::put_u32(out, uint32_t(a.m.size()));
    for (size_t i = 0; i < a.m.size(); ++i) {
      put_shape_payload(out, a.m[i]);
      put_shape_payload(out, a.v[i]);
    }
  }

  detail::put_u32(out, uint32_t(checkpoint.history.size()));
  for (const EpochStats& e : checkpoint.history) {
    detail::put_f64(out, e.train_loss);
    detail::put_f64(out, e.val_f1);
    detail::put_u8(out, uint8_t(e.per_exit_loss.size()));
    for (double l : e.per_exit_loss) detail::put_f64(out, l);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader r(buf, "checkpoint");

  if (r.bytes(4) != std::string(kMagic, 4)) throw IoError("checkpoint: bad magic");
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint c;
  c.version = version;
  c.config = get_config(r);

  const uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint16_t len = r.u16();
    std::string name = r.bytes(len);
    Tensor<float> t = get_shape_payload(r);
    c.tensors.emplace_back(std::move(name), t);
  }

  if (r.u8() != 0) {
    AdamState a;
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.epsilon = r.f64();
    a.t = r.u64();
    const uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
      a.m.push_back(get_shape_payload(r));
      a.v.push_back(get_shape_payload(r));
    }
    c.adam = std::move(a);
  }

  const uint32_t n_epochs = r.u32();
  for (uint32_t i = 0; i < n_epochs; ++i) {
    EpochStats e;
    e.train_loss = r.f64();
    e.val_f1 = r.f64();
    const uint8_t ne = r.u8();
    for (uint8_t k = 0; k < ne; ++k) e.per_exit_loss.push_back(r.f64());
    c.history.push_back(std::move(e));
  }

  if (!r.exhausted()) throw IoError("checkpoint: trailing bytes");
  return c;
}

ModelGraph<float> model_from_checkpoint(const Checkpoint& checkpoint) {
  checkpoint.config.validate();
  Rng rng(0);
  ModelGraph<float> model = build_model<float>(checkpoint.config, rng);

  std::unordered_map<std::string, Tensor<float>> slots;
  for (const auto& [name, t] : model.named_parameters()) slots.emplace(name, t);
  for (const auto& [name, t] : model.named_buffers()) slots.emplace(name, t);

  if (checkpoint.tensors.size() != slots.size()) {
    throw DataError("checkpoint: expected " + std::to_string(slots.size()) +
                    " tensors, found " + std::to_string(checkpoint.tensors.size()));
  }
  for (const auto& [name, src] : checkpoint.tensors) {
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint: unknown tensor " + name);
    Tensor<float>& dst = it->second;
    if (dst.shape() != src.shape()) {
      throw ShapeError("checkpoint: shape mismatch for " + name + ": stored " +
                       shape_str(src.shape()) + " vs model " + shape_str(dst.shape()));
    }
    std::copy_n(src.data(), src.numel(), dst.data());
  }
  return model;
}

}  // namespace e4g
