#include "e4g/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace e4g {

void ConfusionCounts::observe(bool predicted, bool actual) {
  if (predicted && actual) ++tp;
  else if (predicted && !actual) ++fp;
  else if (!predicted && actual) ++fn;
  else ++tn;
}

void ConfusionCounts::merge(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
}

F1Result f1_from_counts(const ConfusionCounts& c) {
  F1Result r;
  if (c.tp + c.fp == 0) {
    r.precision = 0.0;
    r.degenerate = true;
  } else {
    r.precision = double(c.tp) / double(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    r.recall = 0.0;
    r.degenerate = true;
  } else {
    r.recall = double(c.tp) / double(c.tp + c.fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1 = 0.0;
    r.degenerate = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

ConfusionCounts confusion_from_probmap(const ProbMap& probs, const LabelMask& labels) {
  const size_t c = probs.probs.extent(0);
  const size_t t = probs.probs.extent(1);
  if (labels.size() != t) throw ShapeError("confusion: labels length mismatch");
  const double* p = probs.probs.data();
  ConfusionCounts counts;
  for (size_t j = 0; j < t; ++j) {
    size_t pred = 0;
    double best = p[j];
    for (size_t ci = 1; ci < c; ++ci) {
      if (p[ci * t + j] > best) {
        best = p[ci * t + j];
        pred = ci;
      }
    }
    counts.observe(pred == 1, labels[j] != 0);
  }
  return counts;
}

F1Result f1_precision_recall(const ProbMap& probs, const LabelMask& labels) {
  return f1_from_counts(confusion_from_probmap(probs, labels));
}

template <typename Real>
void accumulate_per_exit(const ExitBundle<Real>& bundle, const LabelMask& labels,
                         std::vector<ConfusionCounts>& counts) {
  if (counts.size() != bundle.logits.size()) {
    throw ShapeError("per-exit counts: size mismatch with bundle");
  }
  for (size_t e = 0; e < bundle.logits.size(); ++e) {
    const Tensor<Real>& l = bundle.logits[e];
    const bool batched = l.rank() == 3;
    const size_t n = batched ? l.extent(0) : 1;
    const size_t c = l.extent(batched ? 1 : 0);
    const size_t t = l.extent(batched ? 2 : 1);
    if (labels.size() != n * t) throw ShapeError("per-exit counts: labels mismatch");
    const Real* x = l.data();
    for (size_t s = 0; s < n; ++s) {
      const size_t base = s * c * t;
      for (size_t j = 0; j < t; ++j) {
        size_t pred = 0;
        Real best = x[base + j];
        for (size_t ci = 1; ci < c; ++ci) {
          if (x[base + ci * t + j] > best) {  // argmax of logits == argmax of softmax
            best = x[base + ci * t + j];
            pred = ci;
          }
        }
        counts[e].observe(pred == 1, labels[s * t + j] != 0);
      }
    }
  }
}

template <typename Real>
std::vector<double> per_exit_f1(const ExitBundle<Real>& bundle, const LabelMask& labels) {
  std::vector<ConfusionCounts> counts(bundle.logits.size());
  accumulate_per_exit(bundle, labels, counts);
  std::vector<double> out;
  out.reserve(counts.size());
  for (const ConfusionCounts& c : counts) out.push_back(f1_from_counts(c).f1);
  return out;
}

std::vector<LatencyResult> latency_bench(const std::vector<LatencyEntry>& entries,
                                         size_t n_runs) {
  if (entries.empty()) throw ConfigError("latency_bench: no entries");
  if (n_runs == 0) throw ConfigError("latency_bench: n_runs must be >= 1");
  std::vector<LatencyResult> results;
  results.reserve(entries.size());
  for (const LatencyEntry& e : entries) {
    double total = 0.0;
    for (size_t r = 0; r < n_runs; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      e.run();
      const auto t1 = std::chrono::steady_clock::now();
      total += std::chrono::duration<double>(t1 - t0).count();
    }
    results.push_back({e.name, total / double(n_runs), 1.0});
  }
  const double base = results.front().mean_seconds;
  for (LatencyResult& r : results) {
    r.ratio = base > 0.0 ? r.mean_seconds / base : 1.0;
  }
  return results;
}

// ---- evaluation driver -------------------------------------------------------

namespace {

struct PartitionSums {
  double entropy[2] = {0.0, 0.0};
  double conf[2] = {0.0, 0.0};
  double brier[2] = {0.0, 0.0};
  uint64_t count[2] = {0, 0};
};

// Walks one sample's time points, adding entropy/confidence/brier into the
// correct (1) / incorrect (0) partitions.
void accumulate_partitions(const ProbMap& pm, const LabelMask& labels,
                           PartitionSums& sums) {
  const Tensor<double> ent = predictive_entropy(pm);
  const Tensor<double> conf = predictive_confidence(pm);
  const size_t c = pm.probs.extent(0);
  const size_t t = pm.probs.extent(1);
  const double* p = pm.probs.data();
  for (size_t j = 0; j < t; ++j) {
    size_t pred = 0;
    double best = p[j];
    for (size_t ci = 1; ci < c; ++ci) {
      if (p[ci * t + j] > best) {
        best = p[ci * t + j];
        pred = ci;
      }
    }
    const int part = pred == labels[j] ? 1 : 0;
    double b = 0.0;
    for (size_t ci = 0; ci < c; ++ci) {
      const double target = ci == labels[j] ? 1.0 : 0.0;
      const double d = p[ci * t + j] - target;
      b += d * d;
    }
    sums.entropy[part] += ent.data()[j];
    sums.conf[part] += conf.data()[j];
    sums.brier[part] += b;
    ++sums.count[part];
  }
}

Tensor<float> stack_batch(const std::vector<Segment>& data, size_t begin, size_t end) {
  const size_t n = end - begin;
  Tensor<float> x = Tensor<float>::zeros({n, 1, kSegmentLen});
  for (size_t i = 0; i < n; ++i) {
    std::copy_n(data[begin + i].x.data(), kSegmentLen, x.data() + i * kSegmentLen);
  }
  return x;
}

LabelMask stack_labels(const std::vector<Segment>& data, size_t begin, size_t end) {
  LabelMask labels;
  labels.reserve((end - begin) * kSegmentLen);
  for (size_t i = begin; i < end; ++i) {
    labels.insert(labels.end(), data[i].y.begin(), data[i].y.end());
  }
  return labels;
}

// Per-sample aggregated probability maps for one batch: the exit mean for
// early_exit/vanilla, or `samples` stochastic passes for mcdrop.
std::vector<ProbMap> batch_probmaps(ModelGraph<float>& model, const Tensor<float>& x,
                                    size_t samples, Rng& mc_rng,
                                    ExitBundle<float>* eval_bundle_out) {
  Tape<float> tape(false);
  Rng eval_rng(0);
  ExitBundle<float> bundle = forward(model, tape, x, RunMode::eval, eval_rng);
  if (eval_bundle_out) *eval_bundle_out = bundle;
  if (model.config.variant != Variant::mcdrop) {
    return aggregate_exits_batch(bundle);
  }

  const size_t n = x.extent(0);
  const size_t c = model.config.num_classes;
  const size_t t = model.config.input_length;
  std::vector<Tensor<double>> acc;
  acc.reserve(n);
  for (size_t s = 0; s < n; ++s) acc.push_back(Tensor<double>::zeros({c, t}));
  for (size_t pass = 0; pass < samples; ++pass) {
    Rng pass_rng = mc_rng.split(pass);
    Tape<float> silent(false);
    ExitBundle<float> stoch = forward(model, silent, x, RunMode::eval_sampling, pass_rng);
    ExitBundle<float> one{{stoch.logits.back()}};
    std::vector<ProbMap> maps = aggregate_exits_batch(one);
    for (size_t s = 0; s < n; ++s) {
      for (size_t i = 0; i < c * t; ++i) acc[s].data()[i] += maps[s].probs.data()[i];
    }
  }
  std::vector<ProbMap> out;
  out.reserve(n);
  for (size_t s = 0; s < n; ++s) {
    for (double& v : acc[s].values()) v /= double(samples);
    out.push_back(ProbMap{acc[s], samples});
  }
  return out;
}

}  // namespace

std::vector<ProbMap> infer_probmaps(ModelGraph<float>& model,
                                    const std::vector<Segment>& data,
                                    size_t mcdrop_samples, uint64_t seed,
                                    size_t batch_size) {
  if (data.empty()) throw DataError("infer: empty dataset");
  if (batch_size == 0) throw ConfigError("infer: batch_size must be >= 1");
  if (model.config.variant == Variant::mcdrop && mcdrop_samples == 0) {
    throw ConfigError("infer: mcdrop needs >= 1 samples");
  }
  Rng mc_rng(hash_mix(seed, 0x6d63));
  std::vector<ProbMap> out;
  out.reserve(data.size());
  for (size_t begin = 0; begin < data.size(); begin += batch_size) {
    const size_t end = std::min(data.size(), begin + batch_size);
    Tensor<float> x = stack_batch(data, begin, end);
    std::vector<ProbMap> maps = batch_probmaps(model, x, mcdrop_samples, mc_rng, nullptr);
    for (ProbMap& m : maps) out.push_back(std::move(m));
  }
  return out;
}

RunMetrics evaluate_model(ModelGraph<float>& model, const std::vector<Segment>& test,
                          size_t mcdrop_samples, uint64_t seed, size_t batch_size) {
  if (test.empty()) throw DataError("evaluate_model: empty test set");
  if (batch_size == 0) throw ConfigError("evaluate_model: batch_size must be >= 1");
  if (model.config.variant == Variant::mcdrop && mcdrop_samples == 0) {
    throw ConfigError("evaluate_model: mcdrop needs >= 1 samples");
  }

  RunMetrics rm;
  rm.seed = seed;
  ConfusionCounts agg;
  std::vector<ConfusionCounts> exit_counts(model.config.num_exits);
  PartitionSums tp_sums;  // merged over every time point
  // macro (per-sample) partition means
  double sm_ent[2] = {0, 0}, sm_conf[2] = {0, 0}, sm_brier[2] = {0, 0};
  uint64_t sm_count[2] = {0, 0};
  double brier_total = 0.0;
  uint64_t points_total = 0;
  Rng mc_rng(hash_mix(seed, 0x6d63));  // mcdrop pass streams

  for (size_t begin = 0; begin < test.size(); begin += batch_size) {
    const size_t end = std::min(test.size(), begin + batch_size);
    Tensor<float> x = stack_batch(test, begin, end);
    LabelMask labels = stack_labels(test, begin, end);
    ExitBundle<float> eval_bundle;
    std::vector<ProbMap> maps =
        batch_probmaps(model, x, mcdrop_samples, mc_rng, &eval_bundle);
    accumulate_per_exit(eval_bundle, labels, exit_counts);

    for (size_t s = 0; s < maps.size(); ++s) {
      LabelMask sample_labels(labels.begin() + s * kSegmentLen,
                              labels.begin() + (s + 1) * kSegmentLen);
      agg.merge(confusion_from_probmap(maps[s], sample_labels));
      PartitionSums local;
      accumulate_partitions(maps[s], sample_labels, local);
      for (int part = 0; part < 2; ++part) {
        tp_sums.entropy[part] += local.entropy[part];
        tp_sums.conf[part] += local.conf[part];
        tp_sums.brier[part] += local.brier[part];
        tp_sums.count[part] += local.count[part];
        if (local.count[part] > 0) {
          sm_ent[part] += local.entropy[part] / double(local.count[part]);
          sm_conf[part] += local.conf[part] / double(local.count[part]);
          sm_brier[part] += local.brier[part] / double(local.count[part]);
          ++sm_count[part];
        }
      }
      brier_total += local.brier[0] + local.brier[1];
      points_total += local.count[0] + local.count[1];
    }
  }

  const F1Result f1 = f1_from_counts(agg);
  rm.f1 = f1.f1;
  rm.precision = f1.precision;
  rm.recall = f1.recall;
  rm.degenerate = f1.degenerate;
  for (const ConfusionCounts& c : exit_counts) {
    rm.per_exit_f1.push_back(f1_from_counts(c).f1);
  }
  rm.brier = points_total > 0 ? brier_total / double(points_total) : 0.0;
  // part 1 = correct ("true"), part 0 = incorrect ("false")
  if (tp_sums.count[1] > 0) {
    rm.tp_entropy_true = tp_sums.entropy[1] / double(tp_sums.count[1]);
    rm.tp_confidence_true = tp_sums.conf[1] / double(tp_sums.count[1]);
    rm.tp_brier_true = tp_sums.brier[1] / double(tp_sums.count[1]);
  }
  if (tp_sums.count[0] > 0) {
    rm.tp_entropy_false = tp_sums.entropy[0] / double(tp_sums.count[0]);
    rm.tp_confidence_false = tp_sums.conf[0] / double(tp_sums.count[0]);
    rm.tp_brier_false = tp_sums.brier[0] / double(tp_sums.count[0]);
  }
  if (sm_count[1] > 0) {
    rm.sm_entropy_true = sm_ent[1] / double(sm_count[1]);
    rm.sm_confidence_true = sm_conf[1] / double(sm_count[1]);
    rm.sm_brier_true = sm_brier[1] / double(sm_count[1]);
  }
  if (sm_count[0] > 0) {
    rm.sm_entropy_false = sm_ent[0] / double(sm_count[0]);
    rm.sm_confidence_false = sm_conf[0] / double(sm_count[0]);
    rm.sm_brier_false = sm_brier[0] / double(sm_count[0]);
  }
  return rm;
}

// ---- formatting --------------------------------------------------------------

std::string format_mean_std(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", mean);
  std::string out = buf;
  std::snprintf(buf, sizeof(buf), "%.2f", stddev);
  std::string s = buf;
  if (s.size() > 1 && s[0] == '0') s.erase(0, 1);  // "0.06" -> ".06"
  return out + "\xc2\xb1" + s;  // ±
}

namespace {

struct Stat {
  double mean = 0.0, stddev = 0.0;
};

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= double(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / double(xs.size() - 1));
  }
  return s;
}

std::vector<double> collect(const EvalReport& r,
                            const std::function<std::optional<double>(const RunMetrics&)>& get) {
  std::vector<double> xs;
  for (const RunMetrics& m : r.runs) {
    if (auto v = get(m)) xs.push_back(*v);
  }
  return xs;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string opt17(const std::optional<double>& v) { return v ? g17(*v) : "na"; }

}  // namespace

std::string emit_report_text(const EvalReport& report) {
  std::ostringstream os;
  os << "model " << report.model_name << "\n";
  os << "config_digest " << report.config_digest << "\n";
  os << "runs " << report.runs.size() << "\n";
  auto line = [&](const char* label,
                  const std::function<std::optional<double>(const RunMetrics&)>& get) {
    const std::vector<double> xs = collect(report, get);
    if (xs.empty()) {
      os << label << " n/a\n";
      return;
    }
    const Stat s = stat_of(xs);
    os << label << " " << format_mean_std(s.mean, s.stddev) << "\n";
  };
  line("f1", [](const RunMetrics& m) { return std::optional<double>(m.f1); });
  line("precision", [](const RunMetrics& m) { return std::optional<double>(m.precision); });
  line("recall", [](const RunMetrics& m) { return std::optional<double>(m.recall); });
  size_t n_exits = 0;
  for (const RunMetrics& m : report.runs) n_exits = std::max(n_exits, m.per_exit_f1.size());
  for (size_t e = 0; e < n_exits; ++e) {
    line(("exit" + std::to_string(e + 1) + "_f1").c_str(),
         [e](const RunMetrics& m) -> std::optional<double> {
           if (e < m.per_exit_f1.size()) return m.per_exit_f1[e];
           return std::nullopt;
         });
  }
  line("brier", [](const RunMetrics& m) { return std::optional<double>(m.brier); });
  line("entropy_true", [](const RunMetrics& m) { return m.tp_entropy_true; });
  line("entropy_false", [](const RunMetrics& m) { return m.tp_entropy_false; });
  line("brier_true", [](const RunMetrics& m) { return m.tp_brier_true; });
  line("brier_false", [](const RunMetrics& m) { return m.tp_brier_false; });
  line("confidence_true", [](const RunMetrics& m) { return m.tp_confidence_true; });
  line("confidence_false", [](const RunMetrics& m) { return m.tp_confidence_false; });
  line("latency_ratio", [](const RunMetrics& m) { return std::optional<double>(m.latency_ratio); });
  return os.str();
}

std::string emit_report_delimited(const EvalReport& report) {
  std::ostringstream os;
  os << "e4g-report\t1\n";
  os << "model\t" << report.model_name << "\n";
  os << "config_digest\t" << report.config_digest << "\n";
  size_t n_exits = 0;
  for (const RunMetrics& m : report.runs) n_exits = std::max(n_exits, m.per_exit_f1.size());
  os << "seed\tf1\tprecision\trecall\tdegenerate\tbrier\tlatency_ratio";
  for (size_t e = 0; e < n_exits; ++e) os << "\texit" << e + 1 << "_f1";
  const char* split_cols[12] = {
      "tp_entropy_true",  "tp_entropy_false",  "tp_brier_true",  "tp_brier_false",
      "tp_confidence_true", "tp_confidence_false", "sm_entropy_true", "sm_entropy_false",
      "sm_brier_true",    "sm_brier_false",    "sm_confidence_true", "sm_confidence_false"};
  for (const char* c : split_cols) os << "\t" << c;
  os << "\n";
  for (const RunMetrics& m : report.runs) {
    os << m.seed << "\t" << g17(m.f1) << "\t" << g17(m.precision) << "\t"
       << g17(m.recall) << "\t" << (m.degenerate ? 1 : 0) << "\t" << g17(m.brier)
       << "\t" << g17(m.latency_ratio);
    for (size_t e = 0; e < n_exits; ++e) {
      os << "\t" << (e < m.per_exit_f1.size() ? g17(m.per_exit_f1[e]) : "na");
    }
    os << "\t" << opt17(m.tp_entropy_true) << "\t" << opt17(m.tp_entropy_false)
       << "\t" << opt17(m.tp_brier_true) << "\t" << opt17(m.tp_brier_false)
       << "\t" << opt17(m.tp_confidence_true) << "\t" << opt17(m.tp_confidence_false)
       << "\t" << opt17(m.sm_entropy_true) << "\t" << opt17(m.sm_entropy_false)
       << "\t" << opt17(m.sm_brier_true) << "\t" << opt17(m.sm_brier_false)
       << "\t" << opt17(m.sm_confidence_true) << "\t" << opt17(m.sm_confidence_false);
    os << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s == "na") return std::nullopt;
  return std::stod(s);
}

}  // namespace

EvalReport parse_report_delimited(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(is, line)) throw DataError("report: truncated input");
  };
  next_line();
  {
    const auto head = split_tabs(line);
    if (head.size() != 2 || head[0] != "e4g-report" || head[1] != "1") {
      throw DataError("report: bad header");
    }
  }
  EvalReport report;
  next_line();
  {
    const auto kv = split_tabs(line);
    if (kv.size() != 2 || kv[0] != "model") throw DataError("report: missing model line");
    report.model_name = kv[1];
  }
  next_line();
  {
    const auto kv = split_tabs(line);
    if (kv.size() != 2 || kv[0] != "config_digest") {
      throw DataError("report: missing digest line");
    }
    report.config_digest = kv[1];
  }
  next_line();
  const std::vector<std::string> cols = split_tabs(line);
  size_t n_exits = 0;
  for (const std::string& c : cols) {
    if (c.rfind("exit", 0) == 0) ++n_exits;
  }
  const size_t expected = 7 + n_exits + 12;
  if (cols.size() != expected || cols[0] != "seed") {
    throw DataError("report: unexpected column layout");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != expected) throw DataError("report: ragged row");
    RunMetrics m;
    size_t i = 0;
    m.seed = std::stoull(f[i++]);
    m.f1 = std::stod(f[i++]);
    m.precision = std::stod(f[i++]);
    m.recall = std::stod(f[i++]);
    m.degenerate = f[i++] == "1";
    m.brier = std::stod(f[i++]);
    m.latency_ratio = std::stod(f[i++]);
    for (size_t e = 0; e < n_exits; ++e) {
      if (f[i] != "na") m.per_exit_f1.push_back(std::stod(f[i]));
      ++i;
    }
    m.tp_entropy_true = parse_opt(f[i++]);
    m.tp_entropy_false = parse_opt(f[i++]);
    m.tp_brier_true = parse_opt(f[i++]);
    m.tp_brier_false = parse_opt(f[i++]);
    m.tp_confidence_true = parse_opt(f[i++]);
    m.tp_confidence_false = parse_opt(f[i++]);
    m.sm_entropy_true = parse_opt(f[i++]);
    m.sm_entropy_false = parse_opt(f[i++]);
    m.sm_brier_true = parse_opt(f[i++]);
    m.sm_brier_false = parse_opt(f[i++]);
    m.sm_confidence_true = parse_opt(f[i++]);
    m.sm_confidence_false = parse_opt(f[i++]);
    report.runs.push_back(std::move(m));
  }
  return report;
}

template void accumulate_per_exit(const ExitBundle<float>&, const LabelMask&,
                                  std::vector<ConfusionCounts>&);
template void accumulate_per_exit(const ExitBundle<double>&, const LabelMask&,
                                  std::vector<ConfusionCounts>&);
template std::vector<double> per_exit_f1(const ExitBundle<float>&, const LabelMask&);
template std::vector<double> per_exit_f1(const ExitBundle<double>&, const LabelMask&);

}  // namespace e4g
