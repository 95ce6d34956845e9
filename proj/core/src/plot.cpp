#include "e4g/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "e4g/errors.hpp"

namespace e4g {

namespace {

constexpr double kWidth = 1000.0;
constexpr double kPanelHeight = 130.0;
constexpr double kMarginX = 50.0;
constexpr double kMarginY = 24.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Emits one <rect> per maximal run of time points in the given category.
void emit_spans(std::ostringstream& os, const LabelMask& labels,
                const LabelMask& predicted, double y0, double height,
                double x_scale) {
  struct Cat {
    const char* color;
    uint8_t want_label, want_pred;
  };
  const Cat cats[3] = {
      {"#2e8b57", 1, 0},  // green: actual only
      {"#d9534f", 0, 1},  // red: predicted only
      {"#8b5a2b", 1, 1},  // brown: overlap
  };
  const size_t t = labels.size();
  for (const Cat& cat : cats) {
    size_t run_start = t;
    for (size_t j = 0; j <= t; ++j) {
      const bool in = j < t && (labels[j] != 0) == (cat.want_label != 0) &&
                      (predicted[j] != 0) == (cat.want_pred != 0);
      if (in && run_start == t) run_start = j;
      if (!in && run_start != t) {
        const double x0 = kMarginX + double(run_start) * x_scale;
        const double w = double(j - run_start) * x_scale;
        os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\""
           << fmt(w) << "\" height=\"" << fmt(height) << "\" fill=\"" << cat.color
           << "\" fill-opacity=\"0.5\"/>\n";
        run_start = t;
      }
    }
  }
}

}  // namespace

void emit_prediction_plot(const Tensor<float>& x, const LabelMask& labels,
                          const std::vector<PredictionPanel>& panels,
                          const std::string& path) {
  const size_t t = labels.size();
  if (t == 0) throw DataError("plot: empty labels");
  if (x.numel() != t) throw ShapeError("plot: signal and labels length mismatch");
  if (panels.empty()) throw DataError("plot: no panels");
  for (const PredictionPanel& p : panels) {
    if (p.predicted.size() != t) {
      throw ShapeError("plot: panel '" + p.title + "' mask length mismatch");
    }
  }

  const float* sig = x.data();
  float lo = sig[0], hi = sig[0];
  for (size_t j = 1; j < t; ++j) {
    lo = std::min(lo, sig[j]);
    hi = std::max(hi, sig[j]);
  }
  if (hi <= lo) hi = lo + 1.0f;  // flat trace still plots

  const double x_scale = (kWidth - 2.0 * kMarginX) / double(t);
  const double total_h = kMarginY + panels.size() * (kPanelHeight + kMarginY);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << fmt(total_h) << "\" viewBox=\"0 0 " << kWidth << " "
     << fmt(total_h) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (size_t p = 0; p < panels.size(); ++p) {
    const double y0 = kMarginY + double(p) * (kPanelHeight + kMarginY);
    os << "<text x=\"" << fmt(kMarginX) << "\" y=\"" << fmt(y0 - 6.0)
       << "\" font-family=\"sans-serif\" font-size=\"13\">" << panels[p].title
       << "</text>\n";
    emit_spans(os, labels, panels[p].predicted, y0, kPanelHeight, x_scale);
    os << "<polyline fill=\"none\" stroke=\"#1a1a1a\" stroke-width=\"0.7\" points=\"";
    for (size_t j = 0; j < t; ++j) {
      const double px = kMarginX + double(j) * x_scale;
      const double frac = (double(sig[j]) - lo) / (double(hi) - lo);
      const double py = y0 + kPanelHeight - frac * kPanelHeight;
      if (j) os << ' ';
      os << fmt(px) << ',' << fmt(py);
    }
    os << "\"/>\n";
    os << "<rect x=\"" << fmt(kMarginX) << "\" y=\"" << fmt(y0) << "\" width=\""
       << fmt(kWidth - 2.0 * kMarginX) << "\" height=\"" << fmt(kPanelHeight)
       << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"0.5\"/>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("plot: cannot open " + path + " for writing");
  f << os.str();
  if (!f) throw IoError("plot: short write to " + path);
}

}  // namespace e4g
