#pragma once

#include <array>
#include <vector>

#include "e4g/rng.hpp"
#include "e4g/signal.hpp"

namespace e4g {

// Desk-scale synthetic EEG corpus: pink-noise background with alpha/beta
// rhythms, plus five injected artifact archetypes with exact ground truth.
// Defaults produce ~2000 ten-second segments: desk-scale but large enough to
// train the ensemble to a stable F1.
struct GeneratorSpec {
  size_t patients = 20;
  double minutes_per_patient = 17.0;
  size_t channels_per_patient = 1;
  // events per minute for {eye, muscle, electrode, chewing, shiver}
  std::array<double, kArtifactKinds> rate_per_min = {0.8, 0.8, 0.8, 0.8, 0.8};
  // native sampling rates cycled across patients before resampling to 250 Hz
  std::vector<double> native_fs = {250.0, 500.0, 200.0};
  // scales every artifact's amplitude band; >1 makes the task easier
  double artifact_gain = 1.0;

  double total_rate_per_min() const;
  void validate() const;  // throws ConfigError
};

struct SynthResult {
  std::vector<Recording> recordings;
  std::vector<Annotation> annotations;
};

// Deterministic in (spec, rng seed); each recording derives its own stream
// from hash(seed, patient_id, channel_id).
SynthResult synth_generate(const GeneratorSpec& spec, const Rng& rng);

// Bandpass 0.3-40 Hz + 60 Hz notch (both zero phase), resample to 250 Hz,
// then cut into 10 s segments.
std::vector<Segment> preprocess_and_segment(const Recording& recording,
                                            const std::vector<Annotation>& annotations);

// Patient-independent split: shuffles patients with the given rng, fills the
// test and validation buckets to at least their ratios, trains on the rest.
struct SplitSegments {
  std::vector<Segment> train, val, test;
};
SplitSegments split_dataset(const std::vector<Segment>& segments, double train_ratio,
                            double val_ratio, double test_ratio, Rng& rng);

// Class-balance augmentation on one split: circular shifts of artifact
// segments plus same-patient clean/artifact mixes, targeting roughly one
// artifact segment per two segments. Appends to `segments`.
void augment_split(std::vector<Segment>& segments, double target_artifact_fraction,
                   Rng& rng);

}  // namespace e4g
