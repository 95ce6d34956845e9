#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace e4g {

struct GradCheckResult {
  std::string op;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// |a - b| / max(|a|, |b|, 1e-6)
double rel_err(double a, double b);

// Compares every custom backward rule against central finite differences on
// small random double tensors. Deterministic given seed.
std::vector<GradCheckResult> run_gradcheck(uint64_t seed, double tolerance = 1e-4);

bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace e4g
