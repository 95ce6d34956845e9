#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "e4g/tensor.hpp"

namespace e4g {

inline constexpr size_t kSegmentLen = 2500;   // 10 s at 250 Hz
inline constexpr double kTargetFs = 250.0;

enum class ArtifactKind : uint8_t {
  none = 0,
  eye = 1,
  muscle = 2,
  electrode = 3,
  chewing = 4,
  shiver = 5,
};
inline constexpr size_t kArtifactKinds = 5;  // excluding none

std::string artifact_kind_name(ArtifactKind k);
ArtifactKind artifact_kind_from_string(const std::string& s);

// One channel of one patient at its native sampling rate.
struct Recording {
  uint32_t patient_id = 0;
  uint32_t channel_id = 0;
  double fs = 0.0;
  std::vector<float> samples;
};

// Ground-truth artifact interval in seconds, relative to the recording start.
struct Annotation {
  uint32_t patient_id = 0;
  uint32_t channel_id = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  ArtifactKind kind = ArtifactKind::none;
};

// A 10 s window at 250 Hz with its per-time-point mask.
struct Segment {
  Tensor<float> x;  // [1, kSegmentLen]
  LabelMask y;      // kSegmentLen entries of 0/1
  uint32_t patient_id = 0;
  uint32_t channel_id = 0;  // in-memory only; the dataset file stores per-patient
  ArtifactKind artifact_kind = ArtifactKind::none;
};

// Second-order section, normalized so the leading denominator coeff is 1:
// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  double fs = 0.0;

  // Complex frequency response at freq_hz.
  std::complex<double> response(double freq_hz) const;
  // All poles strictly inside the unit circle by `margin`.
  bool stable(double margin = 1e-6) const;
};

enum class FilterMode { forward, forward_backward };

// Butterworth bandpass via bilinear transform with frequency prewarping.
// `order` is the lowpass prototype order; the cascade holds `order` biquads.
BiquadCascade design_bandpass(double low_hz, double high_hz, double fs,
                              int order = 2);

// Single-biquad notch with unit gain away from f0 and a null at f0.
BiquadCascade design_notch(double f0_hz, double q, double fs);

// Direct-form II transposed; forward_backward filters forward then reversed
// (zero phase), with odd-reflection padding at both ends.
std::vector<float> apply_filter(const std::vector<float>& signal,
                                const BiquadCascade& filt, FilterMode mode);

// Linear interpolation onto the new grid; output length floor(n*fs_out/fs_in).
std::vector<float> resample(const std::vector<float>& signal, double fs_in,
                            double fs_out);

// Cuts non-overlapping 10 s windows (trailing remainder dropped) and rasterizes
// the matching annotations into per-time-point masks. The recording must
// already be at 250 Hz.
std::vector<Segment> segment(const Recording& recording,
                             const std::vector<Annotation>& annotations);

// Circular shift of x and y together; positive shifts move content later.
Segment augment_shift(const Segment& seg, int64_t shift);

// Overlays the artifact run of `artifact` onto `clean` (same patient and
// channel; clean must have an all-zero mask); the result inherits the
// artifact's mask and kind.
Segment augment_mix(const Segment& clean, const Segment& artifact, double gain);

}  // namespace e4g
