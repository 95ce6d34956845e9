#include "e4g/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace e4g {

double GeneratorSpec::total_rate_per_min() const {
  double total = 0.0;
  for (double r : rate_per_min) total += r;
  return total;
}

void GeneratorSpec::validate() const {
  if (patients == 0 || minutes_per_patient <= 0.0 || channels_per_patient == 0) {
    throw ConfigError("generator: need at least one patient, channel and minute");
  }
  for (double r : rate_per_min) {
    if (!(r >= 0.0)) throw ConfigError("generator: artifact rates must be >= 0");
  }
  if (native_fs.empty()) throw ConfigError("generator: native_fs list is empty");
  for (double fs : native_fs) {
    if (!(fs >= 150.0)) {
      throw ConfigError("generator: native rates must be >= 150 Hz (60 Hz notch)");
    }
  }
  if (!(artifact_gain > 0.0)) throw ConfigError("generator: artifact_gain must be > 0");
}

namespace {

// snap to the 5-sample grid at 250 Hz, so window boundaries never cut an
// artifact run into a single-sample sliver
constexpr double kGridS = 5.0 / kTargetFs;

double snap(double seconds) { return std::round(seconds / kGridS) * kGridS; }

std::vector<float> pink_background(size_t n, double fs, Rng& rng) {
  // Kellet's pink-noise IIR on white normals, then alpha and beta rhythms
  static constexpr double b[4] = {0.049922035, -0.095993537, 0.050612699,
                                  -0.004408786};
  static constexpr double a[4] = {1.0, -2.494956002, 2.017265875, -0.522189400};
  std::vector<double> x(n);
  double u1 = 0.0, u2 = 0.0, u3 = 0.0;  // input history
  double y1 = 0.0, y2 = 0.0, y3 = 0.0;  // output history
  double rms = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double u = rng.normal();
    const double y = b[0] * u + b[1] * u1 + b[2] * u2 + b[3] * u3 - a[1] * y1 -
                     a[2] * y2 - a[3] * y3;
    u3 = u2; u2 = u1; u1 = u;
    y3 = y2; y2 = y1; y1 = y;
    x[i] = y;
    rms += y * y;
  }
  rms = std::sqrt(rms / double(n));
  const double inv = rms > 0.0 ? 1.0 / rms : 1.0;

  const double alpha_amp = 0.4 * rng.uniform(0.8, 1.2);
  const double alpha_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double beta_amp = 0.25 * rng.uniform(0.8, 1.2);
  const double beta_phase = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<float> out(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = double(i) / fs;
    out[i] = float(x[i] * inv + alpha_amp * std::sin(2.0 * M_PI * 10.0 * t + alpha_phase) +
                   beta_amp * std::sin(2.0 * M_PI * 20.0 * t + beta_phase));
  }
  return out;
}

struct Interval {
  double start, end;
};

bool overlaps(const std::vector<Interval>& occupied, double start, double end,
              double margin) {
  for (const Interval& iv : occupied) {
    if (start < iv.end + margin && iv.start < end + margin) return true;
  }
  return false;
}

// Flat-top envelope with raised-cosine ramps. The artifact holds full
// amplitude across the annotated interval except for short on/off ramps, so
// the mask tracks where artifact energy actually is; a half-sine envelope
// would leave the labeled edges indistinguishable from background.
double flat_top_env(double tau, double dur_s) {
  const double ramp = std::min(0.15, dur_s / 4.0);
  if (tau < ramp) return 0.5 * (1.0 - std::cos(M_PI * tau / ramp));
  if (tau > dur_s - ramp) return 0.5 * (1.0 - std::cos(M_PI * (dur_s - tau) / ramp));
  return 1.0;
}

void inject_artifact(std::vector<float>& x, double fs, double start_s, double dur_s,
                     ArtifactKind kind, double gain, Rng& rng) {
  const int64_t i0 = std::llround(start_s * fs);
  const int64_t i1 = std::min<int64_t>(std::llround((start_s + dur_s) * fs),
                                       int64_t(x.size()));
  switch (kind) {
    case ArtifactKind::eye: {
      const double amp = gain * rng.uniform(3.0, 5.0);
      const double f = rng.uniform(0.5, 2.0);
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (int64_t i = i0; i < i1; ++i) {
        const double tau = double(i - i0) / fs;
        const double env = flat_top_env(tau, dur_s);
        x[i] += float(amp * env * std::sin(2.0 * M_PI * f * tau + phase));
      }
      break;
    }
    case ArtifactKind::muscle: {
      const double amp = gain * rng.uniform(2.0, 4.0);
      double freqs[6], phases[6];
      for (int j = 0; j < 6; ++j) {
        freqs[j] = rng.uniform(20.0, 50.0);
        phases[j] = rng.uniform(0.0, 2.0 * M_PI);
      }
      const double norm = amp / std::sqrt(3.0);  // six sines, RMS ~ amp/sqrt(2)*...
      for (int64_t i = i0; i < i1; ++i) {
        const double tau = double(i - i0) / fs;
        const double env = flat_top_env(tau, dur_s);
        double v = 0.0;
        for (int j = 0; j < 6; ++j) v += std::sin(2.0 * M_PI * freqs[j] * tau + phases[j]);
        x[i] += float(norm * env * v / 2.0);
      }
      break;
    }
    case ArtifactKind::electrode: {
      const double amp = gain * rng.uniform(4.0, 8.0);
      const bool flat = rng.bernoulli(0.5);
      for (int64_t i = i0; i < i1; ++i) {
        if (flat) {
          x[i] = float(0.05 * rng.normal());  // contact loss: signal collapses
        } else {
          x[i] += float(amp);  // sustained offset step
        }
      }
      break;
    }
    case ArtifactKind::chewing: {
      const double amp = gain * rng.uniform(2.0, 4.0);
      const double f_gate = rng.uniform(1.0, 2.0);
      const double f_osc = rng.uniform(15.0, 30.0);
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (int64_t i = i0; i < i1; ++i) {
        const double tau = double(i - i0) / fs;
        const double env = flat_top_env(tau, dur_s);
        const double gate = std::max(0.0, std::sin(2.0 * M_PI * f_gate * tau));
        x[i] += float(amp * env * gate * gate * std::sin(2.0 * M_PI * f_osc * tau + phase));
      }
      break;
    }
    case ArtifactKind::shiver: {
      const double amp = gain * rng.uniform(2.0, 4.0);
      const double f = rng.uniform(5.0, 8.0);
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (int64_t i = i0; i < i1; ++i) {
        const double tau = double(i - i0) / fs;
        const double env = flat_top_env(tau, dur_s);
        x[i] += float(amp * env * std::sin(2.0 * M_PI * f * tau + phase));
      }
      break;
    }
    case ArtifactKind::none:
      break;
  }
}

}  // namespace

SynthResult synth_generate(const GeneratorSpec& spec, const Rng& rng) {
  spec.validate();
  SynthResult result;
  const double total_s = spec.minutes_per_patient * 60.0;

  for (size_t pid = 0; pid < spec.patients; ++pid) {
    const double fs = spec.native_fs[pid % spec.native_fs.size()];
    for (size_t cid = 0; cid < spec.channels_per_patient; ++cid) {
      Rng r(hash_mix(rng.seed(), pid, cid));
      const size_t n = size_t(total_s * fs);
      Recording rec{uint32_t(pid), uint32_t(cid), fs, pink_background(n, fs, r)};

      std::vector<Interval> occupied;
      for (size_t k = 0; k < kArtifactKinds; ++k) {
        const double expected = spec.rate_per_min[k] * spec.minutes_per_patient;
        size_t count = size_t(expected);
        if (r.bernoulli(expected - double(count))) ++count;
        const ArtifactKind kind = ArtifactKind(k + 1);
        for (size_t e = 0; e < count; ++e) {
          const double dur = std::clamp(snap(r.uniform(0.5, 6.0)), 0.5, 6.0);
          bool placed = false;
          for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            const double start = snap(r.uniform(0.0, total_s - dur));
            if (start < 0.0 || start + dur > total_s) continue;
            if (overlaps(occupied, start, start + dur, 0.25)) continue;
            occupied.push_back({start, start + dur});
            inject_artifact(rec.samples, fs, start, dur, kind, spec.artifact_gain, r);
            result.annotations.push_back(
                {uint32_t(pid), uint32_t(cid), start, start + dur, kind});
            placed = true;
          }
        }
      }
      result.recordings.push_back(std::move(rec));
    }
  }
  return result;
}

std::vector<Segment> preprocess_and_segment(const Recording& recording,
                                            const std::vector<Annotation>& annotations) {
  const BiquadCascade bandpass = design_bandpass(0.3, 40.0, recording.fs, 2);
  const BiquadCascade notch = design_notch(60.0, 30.0, recording.fs);
  std::vector<float> x =
      apply_filter(recording.samples, bandpass, FilterMode::forward_backward);
  x = apply_filter(x, notch, FilterMode::forward_backward);
  x = resample(x, recording.fs, kTargetFs);
  Recording at250{recording.patient_id, recording.channel_id, kTargetFs, std::move(x)};
  return segment(at250, annotations);
}

SplitSegments split_dataset(const std::vector<Segment>& segments, double train_ratio,
                            double val_ratio, double test_ratio, Rng& rng) {
  if (!(train_ratio >= 0.0) || !(val_ratio >= 0.0) || !(test_ratio >= 0.0) ||
      std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-6) {
    throw ConfigError("split_dataset: ratios must be non-negative and sum to 1");
  }
  std::map<uint32_t, size_t> per_patient;
  for (const Segment& s : segments) ++per_patient[s.patient_id];
  if (per_patient.size() < 3) {
    throw DataError("split_dataset: need >= 3 distinct patients, got " +
                    std::to_string(per_patient.size()));
  }

  std::vector<uint32_t> patients;
  patients.reserve(per_patient.size());
  for (const auto& [pid, cnt] : per_patient) patients.push_back(pid);
  for (size_t i = patients.size() - 1; i > 0; --i) {
    std::swap(patients[i], patients[size_t(rng.uniform_int(0, int64_t(i)))]);
  }

  const double total = double(segments.size());
  std::map<uint32_t, int> bucket;  // 0 train, 1 val, 2 test
  size_t taken = 0;
  double test_count = 0.0, val_count = 0.0;
  while (taken < patients.size() && test_count < test_ratio * total) {
    bucket[patients[taken]] = 2;
    test_count += double(per_patient[patients[taken]]);
    ++taken;
  }
  while (taken < patients.size() && val_count < val_ratio * total) {
    bucket[patients[taken]] = 1;
    val_count += double(per_patient[patients[taken]]);
    ++taken;
  }
  bool any_train = false;
  for (; taken < patients.size(); ++taken) {
    bucket[patients[taken]] = 0;
    any_train = true;
  }
  if (train_ratio > 0.0 && !any_train) {
    throw DataError("split_dataset: no patients left for training");
  }

  SplitSegments out;
  for (const Segment& s : segments) {
    switch (bucket[s.patient_id]) {
      case 0: out.train.push_back(s); break;
      case 1: out.val.push_back(s); break;
      default: out.test.push_back(s); break;
    }
  }
  return out;
}

void augment_split(std::vector<Segment>& segments, double target_artifact_fraction,
                   Rng& rng) {
  if (!(target_artifact_fraction > 0.0 && target_artifact_fraction < 1.0)) {
    throw ConfigError("augment_split: target fraction must be in (0, 1)");
  }
  std::vector<size_t> artifact_idx;
  // same-patient, same-channel clean pools for mixing
  std::map<std::pair<uint32_t, uint32_t>, std::vector<size_t>> clean_pool;
  for (size_t i = 0; i < segments.size(); ++i) {
    bool any = false;
    for (uint8_t y : segments[i].y) any = any || y != 0;
    if (any) {
      artifact_idx.push_back(i);
    } else {
      clean_pool[{segments[i].patient_id, segments[i].channel_id}].push_back(i);
    }
  }
  if (artifact_idx.empty()) return;

  const size_t cap = segments.size() * 3;
  size_t n_artifact = artifact_idx.size();
  while (double(n_artifact) < target_artifact_fraction * double(segments.size()) &&
         segments.size() < cap) {
    const Segment& src =
        segments[artifact_idx[size_t(rng.uniform_int(0, int64_t(artifact_idx.size()) - 1))]];
    const auto pool_it = clean_pool.find({src.patient_id, src.channel_id});
    const bool can_mix = pool_it != clean_pool.end() && !pool_it->second.empty();
    if (can_mix && rng.bernoulli(0.5)) {
      const std::vector<size_t>& pool = pool_it->second;
      const Segment& clean =
          segments[pool[size_t(rng.uniform_int(0, int64_t(pool.size()) - 1))]];
      segments.push_back(augment_mix(clean, src, rng.uniform(0.6, 1.4)));
    } else {
      const int64_t shift = 5 * rng.uniform_int(-int64_t(kSegmentLen) / 10,
                                                int64_t(kSegmentLen) / 10);
      segments.push_back(augment_shift(src, shift));
    }
    ++n_artifact;
  }
}

}  // namespace e4g
