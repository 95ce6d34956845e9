#include "e4g/synth.hpp"

#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "e4g/errors.hpp"

using namespace e4g;

namespace {

GeneratorSpec tiny_spec() {
  GeneratorSpec spec;
  spec.patients = 4;
  spec.minutes_per_patient = 1.0;
  spec.channels_per_patient = 1;
  spec.rate_per_min = {2.0, 2.0, 2.0, 2.0, 2.0};
  return spec;
}

bool same_samples(const Recording& a, const Recording& b) {
  return a.patient_id == b.patient_id && a.channel_id == b.channel_id &&
         a.fs == b.fs && a.samples == b.samples;
}

size_t mask_mass(const Segment& s) {
  size_t m = 0;
  for (uint8_t y : s.y) m += y;
  return m;
}

}  // namespace

TEST_CASE("generator spec validation") {
  CHECK_NOTHROW(GeneratorSpec{}.validate());
  CHECK(GeneratorSpec{}.total_rate_per_min() == doctest::Approx(4.0));

  GeneratorSpec s = tiny_spec();
  s.patients = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = tiny_spec();
  s.minutes_per_patient = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = tiny_spec();
  s.rate_per_min[2] = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = tiny_spec();
  s.native_fs = {};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = tiny_spec();
  s.native_fs = {100.0};  // too slow to carry the 60 Hz notch band
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = tiny_spec();
  s.artifact_gain = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("synth_generate is deterministic in the seed") {
  GeneratorSpec spec = tiny_spec();
  SynthResult a = synth_generate(spec, Rng(11));
  SynthResult b = synth_generate(spec, Rng(11));
  SynthResult c = synth_generate(spec, Rng(12));

  REQUIRE(a.recordings.size() == 4);
  REQUIRE(a.recordings.size() == b.recordings.size());
  for (size_t i = 0; i < a.recordings.size(); ++i) {
    CHECK(same_samples(a.recordings[i], b.recordings[i]));
  }
  REQUIRE(a.annotations.size() == b.annotations.size());
  bool any_diff = false;
  for (size_t i = 0; i < std::min(a.recordings.size(), c.recordings.size()); ++i) {
    any_diff = any_diff || !same_samples(a.recordings[i], c.recordings[i]);
  }
  CHECK(any_diff);

  // native rates cycle across patients
  CHECK(a.recordings[0].fs == 250.0);
  CHECK(a.recordings[1].fs == 500.0);
  CHECK(a.recordings[2].fs == 200.0);
  CHECK(a.recordings[3].fs == 250.0);
  CHECK(a.recordings[1].samples.size() == size_t(60.0 * 500.0));
}

TEST_CASE("annotations sit on the 0.02 s grid with sane durations and margins") {
  GeneratorSpec spec = tiny_spec();
  SynthResult r = synth_generate(spec, Rng(5));
  REQUIRE(!r.annotations.empty());

  const double total_s = spec.minutes_per_patient * 60.0;
  std::map<std::pair<uint32_t, uint32_t>, std::vector<Annotation>> per_rec;
  for (const Annotation& a : r.annotations) {
    CHECK(a.start_s >= 0.0);
    CHECK(a.end_s <= total_s + 1e-9);
    const double dur = a.end_s - a.start_s;
    CHECK(dur >= 0.5 - 1e-9);
    CHECK(dur <= 6.0 + 1e-9);
    CHECK(std::abs(a.start_s * 50.0 - std::round(a.start_s * 50.0)) < 1e-6);
    CHECK(std::abs(a.end_s * 50.0 - std::round(a.end_s * 50.0)) < 1e-6);
    CHECK(a.kind != ArtifactKind::none);
    per_rec[{a.patient_id, a.channel_id}].push_back(a);
  }
  // events on one recording never overlap; they keep a 0.25 s margin
  for (const auto& [key, anns] : per_rec) {
    for (size_t i = 0; i < anns.size(); ++i) {
      for (size_t j = i + 1; j < anns.size(); ++j) {
        const bool apart = anns[i].end_s + 0.25 <= anns[j].start_s + 1e-9 ||
                           anns[j].end_s + 0.25 <= anns[i].start_s + 1e-9;
        CHECK(apart);
      }
    }
  }
}

TEST_CASE("zero artifact rate produces clean recordings") {
  GeneratorSpec spec = tiny_spec();
  spec.rate_per_min = {0, 0, 0, 0, 0};
  CHECK(spec.total_rate_per_min() == 0.0);
  SynthResult r = synth_generate(spec, Rng(3));
  CHECK(r.annotations.empty());
  for (const Recording& rec : r.recordings) {
    std::vector<Segment> segs = preprocess_and_segment(rec, r.annotations);
    for (const Segment& s : segs) CHECK(mask_mass(s) == 0);
  }
}

TEST_CASE("preprocess_and_segment resamples every native rate to 10 s windows") {
  GeneratorSpec spec = tiny_spec();
  SynthResult r = synth_generate(spec, Rng(9));
  size_t with_artifacts = 0;
  for (const Recording& rec : r.recordings) {
    std::vector<Segment> segs = preprocess_and_segment(rec, r.annotations);
    CHECK(segs.size() == 6);  // one minute
    for (const Segment& s : segs) {
      CHECK(s.x.shape() == Shape{1, kSegmentLen});
      CHECK(s.y.size() == kSegmentLen);
      CHECK(s.patient_id == rec.patient_id);
      // masked runs are never single-sample slivers
      size_t run = 0;
      for (size_t i = 0; i <= kSegmentLen; ++i) {
        if (i < kSegmentLen && s.y[i]) {
          ++run;
        } else if (run > 0) {
          CHECK(run > 1);
          run = 0;
        }
      }
      if (mask_mass(s) > 0) {
        ++with_artifacts;
        CHECK(s.artifact_kind != ArtifactKind::none);
      }
    }
  }
  CHECK(with_artifacts > 0);

  // the mask agrees sample-for-sample with the annotation intervals
  const Recording& rec = r.recordings[0];
  std::vector<Segment> segs = preprocess_and_segment(rec, r.annotations);
  size_t total_mass = 0;
  for (const Segment& s : segs) total_mass += mask_mass(s);
  size_t expected = 0;
  for (const Annotation& a : r.annotations) {
    if (a.patient_id != rec.patient_id || a.channel_id != rec.channel_id) continue;
    const double end = std::min(a.end_s, double(segs.size()) * 10.0);
    if (a.start_s >= end) continue;  // entirely inside the dropped remainder
    expected += size_t(std::llround(end * kTargetFs) - std::llround(a.start_s * kTargetFs));
  }
  CHECK(total_mass == expected);
}

TEST_CASE("split_dataset separates patients, not segments") {
  // ten patients with ten segments each
  std::vector<Segment> segs;
  for (uint32_t pid = 0; pid < 10; ++pid) {
    for (int k = 0; k < 10; ++k) {
      Segment s;
      s.patient_id = pid;
      s.x = Tensor<float>::zeros({1, kSegmentLen});
      s.y.assign(kSegmentLen, 0);
      segs.push_back(s);
    }
  }
  Rng rng(21);
  SplitSegments split = split_dataset(segs, 0.8, 0.1, 0.1, rng);
  CHECK(split.train.size() == 80);
  CHECK(split.val.size() == 10);
  CHECK(split.test.size() == 10);

  std::set<uint32_t> train_p, val_p, test_p;
  for (const Segment& s : split.train) train_p.insert(s.patient_id);
  for (const Segment& s : split.val) val_p.insert(s.patient_id);
  for (const Segment& s : split.test) test_p.insert(s.patient_id);
  for (uint32_t p : val_p) CHECK(train_p.count(p) == 0);
  for (uint32_t p : test_p) {
    CHECK(train_p.count(p) == 0);
    CHECK(val_p.count(p) == 0);
  }

  // deterministic given the same rng seed
  Rng rng2(21);
  SplitSegments again = split_dataset(segs, 0.8, 0.1, 0.1, rng2);
  REQUIRE(again.test.size() == split.test.size());
  for (size_t i = 0; i < again.test.size(); ++i) {
    CHECK(again.test[i].patient_id == split.test[i].patient_id);
  }

  Rng rng3(21);
  CHECK_THROWS_AS(split_dataset(segs, 0.5, 0.2, 0.2, rng3), ConfigError);
  std::vector<Segment> two_patients(segs.begin(), segs.begin() + 20);
  CHECK_THROWS_AS(split_dataset(two_patients, 0.8, 0.1, 0.1, rng3), DataError);
}

TEST_CASE("augment_split rebalances within patients and respects the cap") {
  GeneratorSpec spec = tiny_spec();
  spec.patients = 3;
  SynthResult r = synth_generate(spec, Rng(31));
  std::vector<Segment> segs;
  for (const Recording& rec : r.recordings) {
    std::vector<Segment> s = preprocess_and_segment(rec, r.annotations);
    segs.insert(segs.end(), s.begin(), s.end());
  }
  const size_t before = segs.size();
  size_t artifacts_before = 0;
  for (const Segment& s : segs) artifacts_before += mask_mass(s) > 0 ? 1 : 0;
  REQUIRE(artifacts_before > 0);

  std::set<std::pair<uint32_t, uint32_t>> known;
  for (const Segment& s : segs) known.insert({s.patient_id, s.channel_id});

  Rng rng(8);
  augment_split(segs, 0.5, rng);
  CHECK(segs.size() >= before);
  size_t artifacts_after = 0;
  for (const Segment& s : segs) artifacts_after += mask_mass(s) > 0 ? 1 : 0;
  // either the target was reached or the cap kicked in
  const bool reached = double(artifacts_after) >= 0.5 * double(segs.size());
  CHECK((reached || segs.size() == before * 3));
  // appended segments belong to patients we already had
  for (size_t i = before; i < segs.size(); ++i) {
    CHECK(known.count({segs[i].patient_id, segs[i].channel_id}) == 1);
    CHECK(mask_mass(segs[i]) > 0);
  }

  Rng rng2(8);
  std::vector<Segment> copy(segs.begin(), segs.begin() + before);
  CHECK_THROWS_AS(augment_split(copy, 0.0, rng2), ConfigError);
  CHECK_THROWS_AS(augment_split(copy, 1.0, rng2), ConfigError);

  // all-clean splits are left alone
  std::vector<Segment> clean;
  for (const Segment& s : segs) {
    if (mask_mass(s) == 0) clean.push_back(s);
  }
  const size_t n_clean = clean.size();
  augment_split(clean, 0.5, rng2);
  CHECK(clean.size() == n_clean);
}

TEST_CASE("default spec targets roughly two thousand segments") {
  GeneratorSpec spec;
  const size_t per_recording = size_t(spec.minutes_per_patient * 60.0 / 10.0);
  const size_t total = spec.patients * spec.channels_per_patient * per_recording;
  CHECK(total >= 1900);
  CHECK(total <= 2100);
}
