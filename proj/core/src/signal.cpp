#include "e4g/signal.hpp"

#include <algorithm>
#include <cmath>

namespace e4g {

std::string artifact_kind_name(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::none: return "none";
    case ArtifactKind::eye: return "eye";
    case ArtifactKind::muscle: return "muscle";
    case ArtifactKind::electrode: return "electrode";
    case ArtifactKind::chewing: return "chewing";
    case ArtifactKind::shiver: return "shiver";
  }
  throw DataError("unknown artifact kind value");
}

ArtifactKind artifact_kind_from_string(const std::string& s) {
  for (uint8_t v = 0; v <= uint8_t(kArtifactKinds); ++v) {
    if (s == artifact_kind_name(ArtifactKind(v))) return ArtifactKind(v);
  }
  throw DataError("unknown artifact kind '" + s + "'");
}

std::complex<double> BiquadCascade::response(double freq_hz) const {
  // Angle kept in half-turns so DC and Nyquist evaluate exactly; the
  // bandpass numerator g*(1 - z^-2) then vanishes identically there.
  const double r = 2.0 * freq_hz / fs;
  double c, s;
  if (r == std::floor(r)) {
    c = std::fmod(std::fabs(r), 2.0) == 1.0 ? -1.0 : 1.0;
    s = 0.0;
  } else {
    c = std::cos(M_PI * r);
    s = std::sin(M_PI * r);
  }
  const std::complex<double> z1(c, -s);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h(1.0, 0.0);
  for (const Biquad& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

bool BiquadCascade::stable(double margin) const {
  for (const Biquad& s : sections) {
    // roots of z^2 + a1 z + a2
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    const std::complex<double> r1 = (-s.a1 + disc) / 2.0;
    const std::complex<double> r2 = (-s.a1 - disc) / 2.0;
    if (std::abs(r1) >= 1.0 - margin || std::abs(r2) >= 1.0 - margin) return false;
  }
  return true;
}

BiquadCascade design_bandpass(double low_hz, double high_hz, double fs, int order) {
  if (!(fs > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0)) {
    throw ConfigError("design_bandpass: need 0 < low < high < fs/2");
  }
  if (order < 2 || order % 2 != 0) {
    throw ConfigError("design_bandpass: prototype order must be even and >= 2");
  }

  // prewarped analog band edges
  const double wl = 2.0 * fs * std::tan(M_PI * low_hz / fs);
  const double wh = 2.0 * fs * std::tan(M_PI * high_hz / fs);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  BiquadCascade cascade;
  cascade.fs = fs;
  const int n = order;
  for (int k = 1; k <= n / 2; ++k) {
    // Butterworth prototype pole in the upper-left quadrant
    const std::complex<double> p =
        std::polar(1.0, M_PI * (2.0 * k + n - 1.0) / (2.0 * n));
    // lowpass -> bandpass: s^2 - p*bw*s + w0^2 = 0
    const std::complex<double> disc = std::sqrt(p * p * bw * bw - 4.0 * w0 * w0);
    const std::complex<double> roots[2] = {(p * bw + disc) / 2.0, (p * bw - disc) / 2.0};
    for (const std::complex<double>& s : roots) {
      // bilinear transform; the conjugate pole lands on the conjugate z
      const std::complex<double> zp = (2.0 * fs + s) / (2.0 * fs - s);
      Biquad sec;
      sec.a1 = -2.0 * zp.real();
      sec.a2 = std::norm(zp);
      sec.b0 = 1.0;
      sec.b1 = 0.0;
      sec.b2 = -1.0;  // one zero at DC, one at Nyquist
      cascade.sections.push_back(sec);
    }
  }
  // normalize every section to unit gain at the digital center frequency
  const double f_center = std::atan(w0 / (2.0 * fs)) * fs / M_PI;
  for (Biquad& sec : cascade.sections) {
    BiquadCascade single{{sec}, fs};
    const double g = std::abs(single.response(f_center));
    sec.b0 /= g;
    sec.b1 /= g;
    sec.b2 /= g;
  }
  if (!cascade.stable()) throw ConfigError("design_bandpass: produced unstable sections");
  return cascade;
}

BiquadCascade design_notch(double f0_hz, double q, double fs) {
  if (!(fs > 0.0) || !(f0_hz > 0.0) || !(f0_hz < fs / 2.0)) {
    throw ConfigError("design_notch: need 0 < f0 < fs/2");
  }
  if (!(q > 0.0)) throw ConfigError("design_notch: q must be > 0");
  const double w0 = 2.0 * M_PI * f0_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad sec;
  sec.b0 = 1.0 / a0;
  sec.b1 = -2.0 * c / a0;
  sec.b2 = 1.0 / a0;
  sec.a1 = -2.0 * c / a0;
  sec.a2 = (1.0 - alpha) / a0;
  BiquadCascade cascade{{sec}, fs};
  if (!cascade.stable()) throw ConfigError("design_notch: produced unstable section");
  return cascade;
}

namespace {

// One cascade pass, direct-form II transposed, double state. `zi_scale`
// seeds each section with its steady-state response to a constant input,
// which suppresses start-up transients (the constant is the first sample).
std::vector<double> run_cascade(const std::vector<double>& x,
                                const BiquadCascade& filt, bool seed_state) {
  std::vector<double> y = x;
  for (const Biquad& s : filt.sections) {
    double z1 = 0.0, z2 = 0.0;
    if (seed_state && !y.empty()) {
      // steady state for constant input y[0]
      const double k = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
      z1 = (k - s.b0) * y[0];
      z2 = (s.b2 - s.a2 * k) * y[0];
    }
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

}  // namespace

std::vector<float> apply_filter(const std::vector<float>& signal,
                                const BiquadCascade& filt, FilterMode mode) {
  if (filt.sections.empty()) throw ConfigError("apply_filter: empty cascade");
  if (mode == FilterMode::forward) {
    std::vector<double> x(signal.begin(), signal.end());
    std::vector<double> y = run_cascade(x, filt, false);
    return std::vector<float>(y.begin(), y.end());
  }

  const size_t padlen = 3 * (2 * filt.sections.size() + 1);
  if (signal.size() <= padlen) {
    throw DataError("apply_filter: forward_backward needs more than " +
                    std::to_string(padlen) + " samples, got " +
                    std::to_string(signal.size()));
  }
  // odd reflection around both endpoints
  const size_t n = signal.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (size_t i = 0; i < padlen; ++i) {
    ext.push_back(2.0 * double(signal[0]) - double(signal[padlen - i]));
  }
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (size_t i = 0; i < padlen; ++i) {
    ext.push_back(2.0 * double(signal[n - 1]) - double(signal[n - 2 - i]));
  }

  std::vector<double> y = run_cascade(ext, filt, true);
  std::reverse(y.begin(), y.end());
  y = run_cascade(y, filt, true);
  std::reverse(y.begin(), y.end());

  std::vector<float> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = float(y[padlen + i]);
  return out;
}

std::vector<float> resample(const std::vector<float>& signal, double fs_in,
                            double fs_out) {
  if (!(fs_in > 0.0) || !(fs_out > 0.0)) {
    throw ConfigError("resample: sampling rates must be positive");
  }
  if (fs_in == fs_out) return signal;
  if (signal.empty()) return {};
  const size_t n = signal.size();
  const size_t out_len = size_t(std::floor(double(n) * fs_out / fs_in));
  std::vector<float> out(out_len);
  const double step = fs_in / fs_out;
  for (size_t j = 0; j < out_len; ++j) {
    const double pos = double(j) * step;
    if (pos >= double(n - 1)) {
      out[j] = signal[n - 1];
      continue;
    }
    const size_t i0 = size_t(pos);
    const double frac = pos - double(i0);
    out[j] = float(double(signal[i0]) + frac * (double(signal[i0 + 1]) - double(signal[i0])));
  }
  return out;
}

std::vector<Segment> segment(const Recording& recording,
                             const std::vector<Annotation>& annotations) {
  if (recording.fs != kTargetFs) {
    throw DataError("segment: recording must be resampled to 250 Hz first");
  }
  if (recording.samples.empty()) throw DataError("segment: empty recording");
  const double duration_s = double(recording.samples.size()) / recording.fs;
  for (const Annotation& a : annotations) {
    if (a.patient_id != recording.patient_id || a.channel_id != recording.channel_id) {
      continue;
    }
    if (a.start_s < 0.0 || a.end_s > duration_s || !(a.start_s < a.end_s)) {
      throw DataError("segment: annotation [" + std::to_string(a.start_s) + ", " +
                      std::to_string(a.end_s) + ") outside recording bounds");
    }
  }

  const size_t n_windows = recording.samples.size() / kSegmentLen;
  std::vector<Segment> out;
  out.reserve(n_windows);
  for (size_t w = 0; w < n_windows; ++w) {
    Segment seg;
    seg.patient_id = recording.patient_id;
    seg.channel_id = recording.channel_id;
    seg.x = Tensor<float>::zeros({1, kSegmentLen});
    std::copy_n(recording.samples.data() + w * kSegmentLen, kSegmentLen, seg.x.data());
    seg.y.assign(kSegmentLen, 0);
    const int64_t w0 = int64_t(w * kSegmentLen);
    const int64_t w1 = w0 + int64_t(kSegmentLen);
    for (const Annotation& a : annotations) {
      if (a.patient_id != recording.patient_id || a.channel_id != recording.channel_id) {
        continue;
      }
      const int64_t i0 = std::max(w0, int64_t(std::llround(a.start_s * recording.fs)));
      const int64_t i1 = std::min(w1, int64_t(std::llround(a.end_s * recording.fs)));
      if (i0 >= i1) continue;
      std::fill(seg.y.begin() + (i0 - w0), seg.y.begin() + (i1 - w0), uint8_t(1));
      // first intersecting annotation names the window's kind
      if (seg.artifact_kind == ArtifactKind::none) seg.artifact_kind = a.kind;
    }
    out.push_back(std::move(seg));
  }
  return out;
}

Segment augment_shift(const Segment& seg, int64_t shift) {
  const int64_t t = int64_t(kSegmentLen);
  if (shift <= -t || shift >= t) {
    throw ConfigError("augment_shift: |shift| must be < " + std::to_string(t));
  }
  const int64_t offset = ((shift % t) + t) % t;
  Segment out;
  out.patient_id = seg.patient_id;
  out.channel_id = seg.channel_id;
  out.artifact_kind = seg.artifact_kind;
  out.x = Tensor<float>::zeros({1, kSegmentLen});
  out.y.assign(kSegmentLen, 0);
  const float* xin = seg.x.data();
  float* xout = out.x.data();
  for (int64_t i = 0; i < t; ++i) {
    const int64_t j = (i + offset) % t;
    xout[j] = xin[i];
    out.y[j] = seg.y[i];
  }
  return out;
}

Segment augment_mix(const Segment& clean, const Segment& artifact, double gain) {
  if (clean.patient_id != artifact.patient_id) {
    throw DataError("augment_mix: refusing to mix across patients");
  }
  if (clean.channel_id != artifact.channel_id) {
    throw DataError("augment_mix: refusing to mix across channels");
  }
  for (uint8_t y : clean.y) {
    if (y != 0) throw DataError("augment_mix: clean segment has a nonzero mask");
  }
  Segment out;
  out.patient_id = clean.patient_id;
  out.channel_id = clean.channel_id;
  out.artifact_kind = artifact.artifact_kind;
  out.y = artifact.y;
  out.x = clean.x.clone();
  float* x = out.x.data();
  const float* ax = artifact.x.data();
  for (size_t i = 0; i < kSegmentLen; ++i) {
    if (artifact.y[i]) x[i] += float(gain) * ax[i];
  }
  return out;
}

}  // namespace e4g
