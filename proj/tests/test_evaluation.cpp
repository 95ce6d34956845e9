#include "e4g/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "e4g/errors.hpp"
#include "e4g/rng.hpp"
#include "e4g/trainer.hpp"

using namespace e4g;

namespace {

ConfusionCounts counts_of(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn) {
  ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.tn = tn;
  c.fn = fn;
  return c;
}

std::vector<Segment> toy_segments(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<Segment> out;
  for (size_t k = 0; k < n; ++k) {
    Segment s;
    s.patient_id = uint32_t(k);
    s.x = Tensor<float>::zeros({1, kSegmentLen});
    for (size_t i = 0; i < kSegmentLen; ++i) s.x.data()[i] = float(rng.normal());
    s.y.assign(kSegmentLen, 0);
    for (size_t i = 600; i < 900; ++i) s.y[i] = 1;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("confusion counts reduce to the textbook F1") {
  ConfusionCounts c;
  c.observe(true, true);
  c.observe(true, true);
  c.observe(true, true);
  c.observe(true, false);
  c.observe(false, true);
  c.observe(false, false);
  CHECK(c.tp == 3);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK(c.total() == 6);

  F1Result r = f1_from_counts(c);
  CHECK_FALSE(r.degenerate);
  CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.f1 == doctest::Approx(0.75).epsilon(1e-12));

  ConfusionCounts more = counts_of(2, 0, 5, 0);
  c.merge(more);
  CHECK(c.tp == 5);
  CHECK(c.tn == 6);
  CHECK(c.total() == 13);
}

TEST_CASE("f1 is the harmonic mean of precision and recall") {
  Rng rng(64);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionCounts c = counts_of(uint64_t(rng.uniform_int(1, 50)),
                                  uint64_t(rng.uniform_int(0, 50)),
                                  uint64_t(rng.uniform_int(0, 50)),
                                  uint64_t(rng.uniform_int(0, 50)));
    F1Result r = f1_from_counts(c);
    CHECK_FALSE(r.degenerate);
    const double hm = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    CHECK(r.f1 == doctest::Approx(hm).epsilon(1e-6));
  }
}

TEST_CASE("degenerate counts clamp to zero instead of dividing by it") {
  F1Result none = f1_from_counts(counts_of(0, 0, 10, 0));
  CHECK(none.degenerate);
  CHECK(none.f1 == 0.0);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);

  F1Result no_pred = f1_from_counts(counts_of(0, 0, 5, 5));
  CHECK(no_pred.degenerate);
  CHECK(no_pred.f1 == 0.0);

  F1Result no_actual = f1_from_counts(counts_of(0, 5, 5, 0));
  CHECK(no_actual.degenerate);
  CHECK(no_actual.f1 == 0.0);
}

TEST_CASE("probmap confusion takes the argmax with ties to clean") {
  ProbMap p{Tensor<double>::from(
                {2, 4}, {0.9, 0.2, 0.5, 0.3, 0.1, 0.8, 0.5, 0.7}),
            1};
  LabelMask labels = {0, 1, 1, 0};
  ConfusionCounts c = confusion_from_probmap(p, labels);
  // predictions: 0, 1, 0 (tie), 1
  CHECK(c.tn == 1);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  F1Result r = f1_precision_recall(p, labels);
  CHECK(r.f1 == doctest::Approx(0.5).epsilon(1e-12));

  // masks are binary; any nonzero byte counts as artifact
  LabelMask loud = {0, 2, 2, 0};
  ConfusionCounts c2 = confusion_from_probmap(p, loud);
  CHECK(c2.tp + c2.fn == 2);
  LabelMask short_mask = {0, 1};
  CHECK_THROWS_AS(confusion_from_probmap(p, short_mask), ShapeError);
}

TEST_CASE("per-exit scores mirror each exit's own logits") {
  ExitBundle<double> bundle;
  // exit 1 predicts the labels exactly; exit 2 predicts everything clean
  bundle.logits.push_back(Tensor<double>::from({2, 4}, {5, -5, 5, -5, -5, 5, -5, 5}));
  bundle.logits.push_back(Tensor<double>::from({2, 4}, {5, 5, 5, 5, -5, -5, -5, -5}));
  LabelMask labels = {0, 1, 0, 1};

  std::vector<double> f1s = per_exit_f1(bundle, labels);
  REQUIRE(f1s.size() == 2);
  CHECK(f1s[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f1s[1] == 0.0);  // degenerate: never predicts artifact

  std::vector<ConfusionCounts> counts(2);
  accumulate_per_exit(bundle, labels, counts);
  accumulate_per_exit(bundle, labels, counts);  // accumulates, not replaces
  CHECK(counts[0].tp == 4);
  CHECK(counts[0].total() == 8);
  CHECK(counts[1].fn == 4);
}

TEST_CASE("latency_bench reports means and ratios against the first entry") {
  using namespace std::chrono_literals;
  std::vector<LatencyEntry> entries;
  entries.push_back({"base", [] { std::this_thread::sleep_for(2ms); }});
  entries.push_back({"slow", [] { std::this_thread::sleep_for(8ms); }});
  entries.push_back({"also_base", [] { std::this_thread::sleep_for(2ms); }});

  std::vector<LatencyResult> r = latency_bench(entries, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0].name == "base");
  CHECK(r[0].ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r[0].mean_seconds >= 0.0015);
  CHECK(r[1].ratio > 2.0);  // sleeps have slack; 8ms/2ms with wide margin
  CHECK(r[1].ratio < 20.0);
  CHECK(r[2].ratio == doctest::Approx(1.0).epsilon(0.9));

  CHECK_THROWS_AS(latency_bench({}, 3), ConfigError);
  CHECK_THROWS_AS(latency_bench(entries, 0), ConfigError);
}

TEST_CASE("format_mean_std matches the report style") {
  CHECK(format_mean_std(0.838, 0.06) == "0.838±.06");
  CHECK(format_mean_std(0.5, 0.0) == "0.500±.00");
  CHECK(format_mean_std(0.9999, 0.123) == "1.000±.12");
}

TEST_CASE("delimited reports round trip exactly") {
  EvalReport report;
  report.model_name = "early_exit";
  report.config_digest = "00ff00ff00ff00ff";
  RunMetrics a;
  a.seed = 1;
  a.f1 = 0.9123456789012345;
  a.precision = 0.95;
  a.recall = 0.88;
  a.degenerate = false;
  a.per_exit_f1 = {0.8, 0.81, 0.82, 0.83, 0.91};
  a.tp_entropy_true = 0.21;
  a.tp_entropy_false = 0.35;
  a.tp_brier_true = 0.04;
  a.tp_brier_false = 0.61;
  a.tp_confidence_true = 0.93;
  a.tp_confidence_false = 0.71;
  a.sm_entropy_true = 0.22;
  // sm_entropy_false deliberately absent
  a.sm_brier_true = 0.05;
  a.sm_brier_false = 0.6;
  a.sm_confidence_true = 0.94;
  a.sm_confidence_false = 0.7;
  a.brier = 0.123456789;
  a.latency_ratio = 1.0;
  RunMetrics b = a;
  b.seed = 2;
  b.f1 = 0.87;
  b.degenerate = true;
  report.runs = {a, b};

  const std::string text = emit_report_delimited(report);
  CHECK(text.find("e4g-report\t1") == 0);
  CHECK(text.find("early_exit") != std::string::npos);

  EvalReport back = parse_report_delimited(text);
  CHECK(back.model_name == report.model_name);
  CHECK(back.config_digest == report.config_digest);
  REQUIRE(back.runs.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    const RunMetrics& x = report.runs[i];
    const RunMetrics& y = back.runs[i];
    CHECK(y.seed == x.seed);
    CHECK(y.f1 == x.f1);  // %.17g is exact for doubles
    CHECK(y.precision == x.precision);
    CHECK(y.recall == x.recall);
    CHECK(y.degenerate == x.degenerate);
    REQUIRE(y.per_exit_f1.size() == x.per_exit_f1.size());
    for (size_t e = 0; e < x.per_exit_f1.size(); ++e) {
      CHECK(y.per_exit_f1[e] == x.per_exit_f1[e]);
    }
    CHECK(y.tp_entropy_true == x.tp_entropy_true);
    CHECK(y.tp_entropy_false == x.tp_entropy_false);
    CHECK(y.tp_brier_true == x.tp_brier_true);
    CHECK(y.tp_brier_false == x.tp_brier_false);
    CHECK(y.tp_confidence_true == x.tp_confidence_true);
    CHECK(y.tp_confidence_false == x.tp_confidence_false);
    CHECK(y.sm_entropy_true == x.sm_entropy_true);
    CHECK_FALSE(y.sm_entropy_false.has_value());
    CHECK(y.sm_brier_true == x.sm_brier_true);
    CHECK(y.sm_brier_false == x.sm_brier_false);
    CHECK(y.sm_confidence_true == x.sm_confidence_true);
    CHECK(y.sm_confidence_false == x.sm_confidence_false);
    CHECK(y.brier == x.brier);
    CHECK(y.latency_ratio == x.latency_ratio);
  }

  // emitting the parsed report reproduces the text, byte for byte
  CHECK(emit_report_delimited(back) == text);

  CHECK_THROWS_AS(parse_report_delimited("nonsense"), DataError);
  CHECK_THROWS_AS(parse_report_delimited("e4g-report\t1\nmodel\tx\n"), DataError);
  // a ragged data row
  std::string ragged = text.substr(0, text.rfind('\t'));
  CHECK_THROWS_AS(parse_report_delimited(ragged), DataError);
}

TEST_CASE("text reports are deterministic and carry mean±std lines") {
  EvalReport report;
  report.model_name = "vanilla";
  report.config_digest = "abcd";
  RunMetrics a;
  a.seed = 1;
  a.f1 = 0.9;
  a.precision = 0.9;
  a.recall = 0.9;
  a.per_exit_f1 = {0.9};
  a.brier = 0.1;
  RunMetrics b = a;
  b.seed = 2;
  b.f1 = 0.8;
  report.runs = {a, b};

  const std::string t1 = emit_report_text(report);
  const std::string t2 = emit_report_text(report);
  CHECK(t1 == t2);
  CHECK(t1.find("vanilla") != std::string::npos);
  CHECK(t1.find("0.850±.07") != std::string::npos);  // mean of 0.9/0.8, tail n-1
  CHECK(t1.find("n/a") != std::string::npos);        // absent uncertainty splits
}

TEST_CASE("evaluate_model fills every field it can") {
  Rng mrng(23);
  ModelGraph<float> model =
      build_model<float>(ModelConfig::for_variant(Variant::early_exit), mrng);
  std::vector<Segment> test = toy_segments(3, 77);

  RunMetrics m = evaluate_model(model, test, 1, 9);
  CHECK(m.seed == 9);
  CHECK(m.f1 >= 0.0);
  CHECK(m.f1 <= 1.0);
  CHECK(m.brier >= 0.0);
  CHECK(m.brier <= 2.0);
  CHECK(m.latency_ratio == 1.0);
  REQUIRE(m.per_exit_f1.size() == 5);
  for (double f : m.per_exit_f1) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
  // an untrained model misclassifies plenty, so both partitions exist
  CHECK(m.tp_entropy_true.has_value());
  CHECK(m.tp_entropy_false.has_value());
  CHECK(*m.tp_entropy_true >= 0.0);
  CHECK(*m.tp_entropy_true <= std::log(2.0) + 1e-9);

  // deterministic: the same call gives the same numbers
  RunMetrics m2 = evaluate_model(model, test, 1, 9);
  CHECK(m2.f1 == m.f1);
  CHECK(m2.brier == m.brier);
  CHECK(m2.tp_entropy_true == m.tp_entropy_true);

  // batching cannot change the result
  RunMetrics m3 = evaluate_model(model, test, 1, 9, 2);
  CHECK(m3.f1 == m.f1);
  CHECK(m3.per_exit_f1 == m.per_exit_f1);
  CHECK(m3.brier == doctest::Approx(m.brier).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate_model(model, {}, 1, 9), DataError);
}

TEST_CASE("mcdrop evaluation is seed-deterministic and uses its samples") {
  Rng mrng(29);
  ModelGraph<float> model =
      build_model<float>(ModelConfig::for_variant(Variant::mcdrop), mrng);
  std::vector<Segment> test = toy_segments(2, 5);

  RunMetrics a = evaluate_model(model, test, 4, 3);
  RunMetrics b = evaluate_model(model, test, 4, 3);
  CHECK(a.f1 == b.f1);
  CHECK(a.brier == b.brier);

  RunMetrics c = evaluate_model(model, test, 4, 4);
  const bool differs = a.brier != c.brier || a.f1 != c.f1;
  CHECK(differs);

  std::vector<ProbMap> maps = infer_probmaps(model, test, 4, 3);
  REQUIRE(maps.size() == 2);
  CHECK(maps[0].source_count == 4);
  // infer_probmaps and evaluate_model agree on the aggregate
  ConfusionCounts counts;
  for (size_t i = 0; i < maps.size(); ++i) {
    counts.merge(confusion_from_probmap(maps[i], test[i].y));
  }
  CHECK(f1_from_counts(counts).f1 == doctest::Approx(a.f1).epsilon(1e-12));
}
