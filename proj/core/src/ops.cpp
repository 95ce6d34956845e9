#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "e4g/tensor.hpp"

namespace e4g {

namespace {

// Uniform view of [C, L] and [N, C, L] tensors.
struct NclView {
  size_t n, c, l;
  bool batched;
};

template <typename Real>
NclView view_ncl(const Tensor<Real>& t, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + ": undefined tensor");
  if (t.rank() == 2) return {1, t.extent(0), t.extent(1), false};
  if (t.rank() == 3) return {t.extent(0), t.extent(1), t.extent(2), true};
  throw ShapeError(std::string(what) + ": expected rank 2 or 3, got " +
                   shape_str(t.shape()));
}

Shape make_ncl_shape(const NclView& v, size_t c, size_t l) {
  if (v.batched) return {v.n, c, l};
  return {c, l};
}

}  // namespace

// ---- conv1d ---------------------------------------------------------------

template <typename Real>
Tensor<Real> conv1d(Tape<Real>& tape, const Tensor<Real>& input,
                    const Tensor<Real>& weight, const Tensor<Real>& bias,
                    size_t pad_left, size_t pad_right) {
  const NclView v = view_ncl(input, "conv1d input");
  if (weight.rank() != 3) {
    throw ShapeError("conv1d weight must be [C_out, C_in, K], got " +
                     shape_str(weight.shape()));
  }
  const size_t c_out = weight.extent(0);
  const size_t c_in = weight.extent(1);
  const size_t k = weight.extent(2);
  if (c_in != v.c) {
    throw ShapeError("conv1d channel mismatch: input has " + std::to_string(v.c) +
                     " channels, weight expects " + std::to_string(c_in));
  }
  if (bias.rank() != 1 || bias.extent(0) != c_out) {
    throw ShapeError("conv1d bias must be [C_out]");
  }
  const size_t padded = v.l + pad_left + pad_right;
  if (k > padded) {
    throw ShapeError("conv1d kernel " + std::to_string(k) +
                     " exceeds padded length " + std::to_string(padded));
  }
  const size_t l_out = padded - k + 1;

  Tensor<Real> out = Tensor<Real>::zeros(make_ncl_shape(v, c_out, l_out));
  const Real* x = input.data();
  const Real* w = weight.data();
  const Real* b = bias.data();
  Real* y = out.data();

  for (size_t n = 0; n < v.n; ++n) {
    for (size_t co = 0; co < c_out; ++co) {
      Real* yrow = y + (n * c_out + co) * l_out;
      std::fill(yrow, yrow + l_out, b[co]);
      for (size_t ci = 0; ci < c_in; ++ci) {
        const Real* xrow = x + (n * c_in + ci) * v.l;
        const Real* wrow = w + (co * c_in + ci) * k;
        for (size_t kk = 0; kk < k; ++kk) {
          const Real wv = wrow[kk];
          // y[t] += w * x[t + kk - pad_left] over the in-bounds range of t
          const size_t t0 = kk < pad_left ? pad_left - kk : 0;
          const size_t t1 = std::min(l_out, v.l + pad_left - kk);
          const ptrdiff_t off = static_cast<ptrdiff_t>(kk) - static_cast<ptrdiff_t>(pad_left);
          for (size_t t = t0; t < t1; ++t) yrow[t] += wv * xrow[t + off];
        }
      }
    }
  }

  tape.record(out, {input, weight, bias}, [input, weight, bias, out, v, c_out, c_in, k,
                                           pad_left, l_out]() mutable {
    const Real* gy = out.grad();
    const Real* w = weight.data();
    const Real* x = input.data();
    if (input.requires_grad()) {
      input.ensure_grad();
      Real* gx = input.grad();
      for (size_t n = 0; n < v.n; ++n) {
        for (size_t ci = 0; ci < c_in; ++ci) {
          Real* gxrow = gx + (n * c_in + ci) * v.l;
          for (size_t co = 0; co < c_out; ++co) {
            const Real* gyrow = gy + (n * c_out + co) * l_out;
            const Real* wrow = w + (co * c_in + ci) * k;
            for (size_t kk = 0; kk < k; ++kk) {
              const Real wv = wrow[kk];
              // gx[s] += w * gy[s + pad_left - kk] over the in-bounds range
              const size_t s0 = kk > pad_left ? kk - pad_left : 0;
              const ptrdiff_t hi = static_cast<ptrdiff_t>(l_out) +
                                   static_cast<ptrdiff_t>(kk) -
                                   static_cast<ptrdiff_t>(pad_left);
              const size_t s1 = hi < 0 ? 0 : std::min(v.l, static_cast<size_t>(hi));
              const ptrdiff_t off =
                  static_cast<ptrdiff_t>(pad_left) - static_cast<ptrdiff_t>(kk);
              for (size_t s = s0; s < s1; ++s) gxrow[s] += wv * gyrow[s + off];
            }
          }
        }
      }
    }
    if (weight.requires_grad()) {
      weight.ensure_grad();
      Real* gw = weight.grad();
      for (size_t co = 0; co < c_out; ++co) {
        for (size_t ci = 0; ci < c_in; ++ci) {
          for (size_t kk = 0; kk < k; ++kk) {
            // per-sample dots in Real (vectorizable), outer sum in double
            double acc = 0.0;
            const size_t t0 = kk < pad_left ? pad_left - kk : 0;
            const size_t t1 = std::min(l_out, v.l + pad_left - kk);
            const ptrdiff_t off =
                static_cast<ptrdiff_t>(kk) - static_cast<ptrdiff_t>(pad_left);
            for (size_t n = 0; n < v.n; ++n) {
              const Real* gyrow = gy + (n * c_out + co) * l_out;
              const Real* xrow = x + (n * c_in + ci) * v.l;
              Real dot = Real(0);
              for (size_t t = t0; t < t1; ++t) dot += gyrow[t] * xrow[t + off];
              acc += dot;
            }
            gw[(co * c_in + ci) * k + kk] += Real(acc);
          }
        }
      }
    }
    if (bias.requires_grad()) {
      bias.ensure_grad();
      Real* gb = bias.grad();
      for (size_t co = 0; co < c_out; ++co) {
        double acc = 0.0;
        for (size_t n = 0; n < v.n; ++n) {
          const Real* gyrow = gy + (n * c_out + co) * l_out;
          Real dot = Real(0);
          for (size_t t = 0; t < l_out; ++t) dot += gyrow[t];
          acc += dot;
        }
        gb[co] += Real(acc);
      }
    }
  });
  return out;
}

// ---- maxpool1d --------------------------------------------------------------

template <typename Real>
Tensor<Real> maxpool1d(Tape<Real>& tape, const Tensor<Real>& input, size_t kernel,
                       size_t stride) {
  const NclView v = view_ncl(input, "maxpool1d input");
  if (kernel == 0 || stride == 0) throw ConfigError("maxpool1d kernel and stride must be positive");
  if (v.l < kernel) {
    throw ShapeError("maxpool1d input length " + std::to_string(v.l) +
                     " shorter than kernel " + std::to_string(kernel));
  }
  const size_t l_out = (v.l - kernel) / stride + 1;
  const size_t rows = v.n * v.c;

  Tensor<Real> out = Tensor<Real>::zeros(make_ncl_shape(v, v.c, l_out));
  std::vector<uint32_t> argmax(rows * l_out);
  const Real* x = input.data();
  Real* y = out.data();

  for (size_t r = 0; r < rows; ++r) {
    const Real* xrow = x + r * v.l;
    Real* yrow = y + r * l_out;
    uint32_t* arow = argmax.data() + r * l_out;
    for (size_t j = 0; j < l_out; ++j) {
      size_t base = j * stride;
      size_t best = base;
      Real bv = xrow[base];
      for (size_t kk = 1; kk < kernel; ++kk) {
        // strict > keeps the first maximal index on ties
        if (xrow[base + kk] > bv) {
          bv = xrow[base + kk];
          best = base + kk;
        }
      }
      yrow[j] = bv;
      arow[j] = static_cast<uint32_t>(best);
    }
  }

  tape.record(out, {input}, [input, out, argmax = std::move(argmax), rows, l_out,
                             l = v.l]() mutable {
    if (!input.requires_grad()) return;
    input.ensure_grad();
    const Real* gy = out.grad();
    Real* gx = input.grad();
    for (size_t r = 0; r < rows; ++r) {
      const Real* gyrow = gy + r * l_out;
      Real* gxrow = gx + r * l;
      const uint32_t* arow = argmax.data() + r * l_out;
      for (size_t j = 0; j < l_out; ++j) gxrow[arow[j]] += gyrow[j];
    }
  });
  return out;
}

// ---- upsample_nearest -------------------------------------------------------

template <typename Real>
Tensor<Real> upsample_nearest(Tape<Real>& tape, const Tensor<Real>& input,
                              size_t target_len) {
  const NclView v = view_ncl(input, "upsample_nearest input");
  if (target_len == 0) throw ShapeError("upsample_nearest target_len must be >= 1");
  if (v.l == 0) throw ShapeError("upsample_nearest input is empty");
  const size_t rows = v.n * v.c;

  Tensor<Real> out = Tensor<Real>::zeros(make_ncl_shape(v, v.c, target_len));
  const Real* x = input.data();
  Real* y = out.data();
  for (size_t r = 0; r < rows; ++r) {
    const Real* xrow = x + r * v.l;
    Real* yrow = y + r * target_len;
    for (size_t j = 0; j < target_len; ++j) yrow[j] = xrow[j * v.l / target_len];
  }

  tape.record(out, {input}, [input, out, rows, target_len, l = v.l]() mutable {
    if (!input.requires_grad()) return;
    input.ensure_grad();
    const Real* gy = out.grad();
    Real* gx = input.grad();
    for (size_t r = 0; r < rows; ++r) {
      const Real* gyrow = gy + r * target_len;
      Real* gxrow = gx + r * l;
      for (size_t j = 0; j < target_len; ++j) gxrow[j * l / target_len] += gyrow[j];
    }
  });
  return out;
}

// ---- batchnorm1d ------------------------------------------------------------

template <typename Real>
Tensor<Real> batchnorm1d(Tape<Real>& tape, const Tensor<Real>& input,
                         const Tensor<Real>& gamma, const Tensor<Real>& beta,
                         BatchNormState<Real>& state, RunMode mode, Real momentum,
                         Real epsilon) {
  if (!(epsilon > Real(0))) throw ConfigError("batchnorm1d epsilon must be > 0");
  const NclView v = view_ncl(input, "batchnorm1d input");
  if (gamma.rank() != 1 || gamma.extent(0) != v.c || beta.rank() != 1 ||
      beta.extent(0) != v.c) {
    throw ShapeError("batchnorm1d gamma/beta must be [C]");
  }

  Tensor<Real> out = Tensor<Real>::zeros(input.shape());
  const Real* x = input.data();
  const Real* g = gamma.data();
  const Real* bt = beta.data();
  Real* y = out.data();
  const size_t m = v.n * v.l;  // elements per channel

  if (mode == RunMode::train) {
    std::vector<Real> xhat(input.numel());
    std::vector<Real> invstd(v.c);
    Real* rm = state.running_mean.data();
    Real* rv = state.running_var.data();
    for (size_t c = 0; c < v.c; ++c) {
      double sum = 0.0, sumsq = 0.0;
      for (size_t n = 0; n < v.n; ++n) {
        const Real* xrow = x + (n * v.c + c) * v.l;
        for (size_t t = 0; t < v.l; ++t) {
          sum += xrow[t];
          sumsq += double(xrow[t]) * double(xrow[t]);
        }
      }
      const double mean = sum / double(m);
      const double var = std::max(0.0, sumsq / double(m) - mean * mean);
      const double istd = 1.0 / std::sqrt(var + double(epsilon));
      invstd[c] = Real(istd);
      for (size_t n = 0; n < v.n; ++n) {
        const Real* xrow = x + (n * v.c + c) * v.l;
        Real* hrow = xhat.data() + (n * v.c + c) * v.l;
        Real* yrow = y + (n * v.c + c) * v.l;
        for (size_t t = 0; t < v.l; ++t) {
          const Real h = Real((xrow[t] - mean) * istd);
          hrow[t] = h;
          yrow[t] = g[c] * h + bt[c];
        }
      }
      const double var_unbiased = m > 1 ? var * double(m) / double(m - 1) : var;
      rm[c] = Real((1.0 - momentum) * rm[c] + momentum * mean);
      rv[c] = Real((1.0 - momentum) * rv[c] + momentum * var_unbiased);
    }

    tape.record(out, {input, gamma, beta},
                [input, gamma, beta, out, v, m, xhat = std::move(xhat),
                 invstd = std::move(invstd)]() mutable {
                  const Real* gy = out.grad();
                  const Real* g = gamma.data();
                  for (size_t c = 0; c < v.c; ++c) {
                    double sum_gy = 0.0, sum_gy_h = 0.0;
                    for (size_t n = 0; n < v.n; ++n) {
                      const size_t o = (n * v.c + c) * v.l;
                      Real s = Real(0), sh = Real(0);
                      for (size_t t = 0; t < v.l; ++t) {
                        s += gy[o + t];
                        sh += gy[o + t] * xhat[o + t];
                      }
                      sum_gy += s;
                      sum_gy_h += sh;
                    }
                    if (gamma.requires_grad()) {
                      gamma.ensure_grad();
                      gamma.grad()[c] += Real(sum_gy_h);
                    }
                    if (beta.requires_grad()) {
                      beta.ensure_grad();
                      beta.grad()[c] += Real(sum_gy);
                    }
                    if (input.requires_grad()) {
                      input.ensure_grad();
                      Real* gx = input.grad();
                      const double k = double(g[c]) * double(invstd[c]) / double(m);
                      const double mg = sum_gy, mgh = sum_gy_h;
                      for (size_t n = 0; n < v.n; ++n) {
                        const size_t o = (n * v.c + c) * v.l;
                        for (size_t t = 0; t < v.l; ++t) {
                          gx[o + t] += Real(k * (double(m) * double(gy[o + t]) - mg -
                                                 double(xhat[o + t]) * mgh));
                        }
                      }
                    }
                  }
                });
  } else {
    const Real* rm = state.running_mean.data();
    const Real* rv = state.running_var.data();
    std::vector<Real> invstd(v.c);
    for (size_t c = 0; c < v.c; ++c) invstd[c] = Real(1.0 / std::sqrt(double(rv[c]) + double(epsilon)));
    for (size_t n = 0; n < v.n; ++n) {
      for (size_t c = 0; c < v.c; ++c) {
        const Real* xrow = x + (n * v.c + c) * v.l;
        Real* yrow = y + (n * v.c + c) * v.l;
        const Real a = g[c] * invstd[c];
        const Real o = bt[c] - a * rm[c];
        for (size_t t = 0; t < v.l; ++t) yrow[t] = a * xrow[t] + o;
      }
    }
    // Running statistics are constants here, so the map is affine per channel.
    tape.record(out, {input, gamma, beta},
                [input, gamma, beta, out, v, invstd = std::move(invstd),
                 rmh = state.running_mean]() mutable {
                  const Real* gy = out.grad();
                  const Real* g = gamma.data();
                  const Real* x = input.data();
                  const Real* rm = rmh.data();
                  for (size_t c = 0; c < v.c; ++c) {
                    double sum_gy = 0.0, sum_gy_h = 0.0;
                    for (size_t n = 0; n < v.n; ++n) {
                      const size_t o = (n * v.c + c) * v.l;
                      for (size_t t = 0; t < v.l; ++t) {
                        sum_gy += gy[o + t];
                        sum_gy_h += double(gy[o + t]) * double(x[o + t] - rm[c]) * double(invstd[c]);
                      }
                    }
                    if (gamma.requires_grad()) {
                      gamma.ensure_grad();
                      gamma.grad()[c] += Real(sum_gy_h);
                    }
                    if (beta.requires_grad()) {
                      beta.ensure_grad();
                      beta.grad()[c] += Real(sum_gy);
                    }
                    if (input.requires_grad()) {
                      input.ensure_grad();
                      Real* gx = input.grad();
                      const Real a = g[c] * invstd[c];
                      for (size_t n = 0; n < v.n; ++n) {
                        const size_t o = (n * v.c + c) * v.l;
                        for (size_t t = 0; t < v.l; ++t) gx[o + t] += a * gy[o + t];
                      }
                    }
                  }
                });
  }
  return out;
}

// ---- elu --------------------------------------------------------------------

template <typename Real>
Tensor<Real> elu(Tape<Real>& tape, const Tensor<Real>& input) {
  Tensor<Real> out = Tensor<Real>::zeros(input.shape());
  const Real* x = input.data();
  Real* y = out.data();
  const size_t n = input.numel();
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > Real(0) ? x[i] : Real(std::expm1(double(x[i])));

  tape.record(out, {input}, [input, out, n]() mutable {
    if (!input.requires_grad()) return;
    input.ensure_grad();
    const Real* gy = out.grad();
    const Real* x = input.data();
    const Real* y = out.data();
    Real* gx = input.grad();
    for (size_t i = 0; i < n; ++i) {
      gx[i] += gy[i] * (x[i] > Real(0) ? Real(1) : y[i] + Real(1));
    }
  });
  return out;
}

// ---- dropout ----------------------------------------------------------------

template <typename Real>
Tensor<Real> dropout(Tape<Real>& tape, const Tensor<Real>& input, double p,
                     RunMode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout requires 0 <= p < 1");
  if (mode == RunMode::eval) return input;

  const size_t n = input.numel();
  const Real keep_scale = Real(1.0 / (1.0 - p));
  std::vector<uint8_t> mask(n);
  Tensor<Real> out = Tensor<Real>::zeros(input.shape());
  const Real* x = input.data();
  Real* y = out.data();
  for (size_t i = 0; i < n; ++i) {
    mask[i] = rng.uniform() >= p ? 1 : 0;
    y[i] = mask[i] ? x[i] * keep_scale : Real(0);
  }

  tape.record(out, {input}, [input, out, mask = std::move(mask), keep_scale, n]() mutable {
    if (!input.requires_grad()) return;
    input.ensure_grad();
    const Real* gy = out.grad();
    Real* gx = input.grad();
    for (size_t i = 0; i < n; ++i) {
      if (mask[i]) gx[i] += gy[i] * keep_scale;
    }
  });
  return out;
}

// ---- concat_channels ----------------------------------------------------------

template <typename Real>
Tensor<Real> concat_channels(Tape<Real>& tape, const Tensor<Real>& a,
                             const Tensor<Real>& b) {
  const NclView va = view_ncl(a, "concat_channels a");
  const NclView vb = view_ncl(b, "concat_channels b");
  if (va.l != vb.l) {
    throw ShapeError("concat_channels length mismatch: " + std::to_string(va.l) +
                     " vs " + std::to_string(vb.l));
  }
  if (va.n != vb.n || va.batched != vb.batched) {
    throw ShapeError("concat_channels batch mismatch");
  }
  const size_t c_out = va.c + vb.c;

  Tensor<Real> out = Tensor<Real>::zeros(make_ncl_shape(va, c_out, va.l));
  const Real* xa = a.data();
  const Real* xb = b.data();
  Real* y = out.data();
  for (size_t n = 0; n < va.n; ++n) {
    std::copy(xa + n * va.c * va.l, xa + (n + 1) * va.c * va.l,
              y + n * c_out * va.l);
    std::copy(xb + n * vb.c * vb.l, xb + (n + 1) * vb.c * vb.l,
              y + n * c_out * va.l + va.c * va.l);
  }

  tape.record(out, {a, b}, [a, b, out, va, vb, c_out]() mutable {
    const Real* gy = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      Real* ga = a.grad();
      for (size_t n = 0; n < va.n; ++n) {
        const Real* src = gy + n * c_out * va.l;
        Real* dst = ga + n * va.c * va.l;
        for (size_t i = 0; i < va.c * va.l; ++i) dst[i] += src[i];
      }
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      Real* gb = b.grad();
      for (size_t n = 0; n < vb.n; ++n) {
        const Real* src = gy + n * c_out * va.l + va.c * va.l;
        Real* dst = gb + n * vb.c * vb.l;
        for (size_t i = 0; i < vb.c * vb.l; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

// ---- softmax_classes ----------------------------------------------------------

template <typename Real>
Tensor<Real> softmax_classes(Tape<Real>& tape, const Tensor<Real>& logits) {
  const NclView v = view_ncl(logits, "softmax_classes logits");
  if (v.c < 2) throw ShapeError("softmax_classes requires >= 2 classes");

  Tensor<Real> out = Tensor<Real>::zeros(logits.shape());
  const Real* x = logits.data();
  Real* y = out.data();
  for (size_t n = 0; n < v.n; ++n) {
    const size_t base = n * v.c * v.l;
    for (size_t t = 0; t < v.l; ++t) {
      Real mx = x[base + t];
      for (size_t c = 1; c < v.c; ++c) mx = std::max(mx, x[base + c * v.l + t]);
      double denom = 0.0;
      for (size_t c = 0; c < v.c; ++c) {
        const double e = std::exp(double(x[base + c * v.l + t] - mx));
        y[base + c * v.l + t] = Real(e);
        denom += e;
      }
      for (size_t c = 0; c < v.c; ++c) y[base + c * v.l + t] = Real(double(y[base + c * v.l + t]) / denom);
    }
  }

  tape.record(out, {logits}, [logits, out, v]() mutable {
    if (!logits.requires_grad()) return;
    logits.ensure_grad();
    const Real* gy = out.grad();
    const Real* p = out.data();
    Real* gx = logits.grad();
    for (size_t n = 0; n < v.n; ++n) {
      const size_t base = n * v.c * v.l;
      for (size_t t = 0; t < v.l; ++t) {
        double dot = 0.0;
        for (size_t c = 0; c < v.c; ++c) {
          const size_t i = base + c * v.l + t;
          dot += double(gy[i]) * double(p[i]);
        }
        for (size_t c = 0; c < v.c; ++c) {
          const size_t i = base + c * v.l + t;
          gx[i] += Real(double(p[i]) * (double(gy[i]) - dot));
        }
      }
    }
  });
  return out;
}

// ---- elementwise helpers -------------------------------------------------------

template <typename Real>
Tensor<Real> add(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
  Tensor<Real> out = Tensor<Real>::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  tape.record(out, {a, b}, [a, b, out, n]() mutable {
    const Real* gy = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      for (size_t i = 0; i < n; ++i) a.grad()[i] += gy[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      for (size_t i = 0; i < n; ++i) b.grad()[i] += gy[i];
    }
  });
  return out;
}

template <typename Real>
Tensor<Real> mul(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
  Tensor<Real> out = Tensor<Real>::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  tape.record(out, {a, b}, [a, b, out, n]() mutable {
    const Real* gy = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      for (size_t i = 0; i < n; ++i) a.grad()[i] += gy[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      for (size_t i = 0; i < n; ++i) b.grad()[i] += gy[i] * a.data()[i];
    }
  });
  return out;
}

template <typename Real>
Tensor<Real> scale(Tape<Real>& tape, const Tensor<Real>& a, Real c) {
  Tensor<Real> out = Tensor<Real>::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  tape.record(out, {a}, [a, out, c, n]() mutable {
    if (!a.requires_grad()) return;
    a.ensure_grad();
    const Real* gy = out.grad();
    for (size_t i = 0; i < n; ++i) a.grad()[i] += gy[i] * c;
  });
  return out;
}

template <typename Real>
Tensor<Real> sum(Tape<Real>& tape, const Tensor<Real>& a) {
  double acc = 0.0;
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) acc += a.data()[i];
  Tensor<Real> out = Tensor<Real>::scalar(Real(acc));
  tape.record(out, {a}, [a, out, n]() mutable {
    if (!a.requires_grad()) return;
    a.ensure_grad();
    const Real g = out.grad()[0];
    for (size_t i = 0; i < n; ++i) a.grad()[i] += g;
  });
  return out;
}

// ---- finite differences --------------------------------------------------------

template <typename Real>
Tensor<Real> finite_diff_grad(const std::function<Real(const Tensor<Real>&)>& f,
                              const Tensor<Real>& x, Real eps) {
  if (!(eps > Real(0))) throw ConfigError("finite_diff_grad eps must be > 0");
  Tensor<Real> probe = x.clone();
  Tensor<Real> g = Tensor<Real>::zeros(x.shape());
  for (size_t i = 0; i < x.numel(); ++i) {
    const Real orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const Real fp = f(probe);
    probe.data()[i] = orig - eps;
    const Real fm = f(probe);
    probe.data()[i] = orig;
    g.data()[i] = (fp - fm) / (Real(2) * eps);
  }
  return g;
}

// ---- explicit instantiations ----------------------------------------------------

#define E4G_INSTANTIATE_OPS(Real)                                                    \
  template Tensor<Real> conv1d(Tape<Real>&, const Tensor<Real>&, const Tensor<Real>&, \
                               const Tensor<Real>&, size_t, size_t);                 \
  template Tensor<Real> maxpool1d(Tape<Real>&, const Tensor<Real>&, size_t, size_t); \
  template Tensor<Real> upsample_nearest(Tape<Real>&, const Tensor<Real>&, size_t);  \
  template Tensor<Real> batchnorm1d(Tape<Real>&, const Tensor<Real>&,                \
                                    const Tensor<Real>&, const Tensor<Real>&,        \
                                    BatchNormState<Real>&, RunMode, Real, Real);     \
  template Tensor<Real> elu(Tape<Real>&, const Tensor<Real>&);                       \
  template Tensor<Real> dropout(Tape<Real>&, const Tensor<Real>&, double, RunMode,   \
                                Rng&);                                               \
  template Tensor<Real> concat_channels(Tape<Real>&, const Tensor<Real>&,            \
                                        const Tensor<Real>&);                        \
  template Tensor<Real> softmax_classes(Tape<Real>&, const Tensor<Real>&);           \
  template Tensor<Real> add(Tape<Real>&, const Tensor<Real>&, const Tensor<Real>&);  \
  template Tensor<Real> mul(Tape<Real>&, const Tensor<Real>&, const Tensor<Real>&);  \
  template Tensor<Real> scale(Tape<Real>&, const Tensor<Real>&, Real);               \
  template Tensor<Real> sum(Tape<Real>&, const Tensor<Real>&);                       \
  template Tensor<Real> finite_diff_grad(                                            \
      const std::function<Real(const Tensor<Real>&)>&, const Tensor<Real>&, Real);

E4G_INSTANTIATE_OPS(float)
E4G_INSTANTIATE_OPS(double)

#undef E4G_INSTANTIATE_OPS

}  // namespace e4g
