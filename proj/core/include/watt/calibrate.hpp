#pragma once

#include <map>
#include <utility>

#include "watt/summary.hpp"

namespace watt {

// Published parameter counts for the 14-variant ablation grid, keyed (d,k).
const std::map<std::pair<int, int>, int64_t>& published_param_table();

struct CalibrationEntry {
  int d = 0, k = 0;
  int64_t target = 0;
  int64_t computed = 0;
  int64_t delta = 0;  // computed - target
};

// Exact quadratic structure of one depth family over k, derived from the
// targets by integer arithmetic (constant second differences).
struct QuadraticFit {
  int d = 0;
  bool consistent = false;   // second differences constant over the family
  int64_t second_difference = 0;
  int64_t a2 = 0, a1 = 0, a0 = 0;  // p(k) = a2*k^2 + a1*k + a0
};

struct CalibrationReport {
  std::vector<CalibrationEntry> entries;
  std::vector<QuadraticFit> fits;
  bool exact = false;
  int64_t max_abs_delta = 0;

  std::string to_string() const;
};

// Validates the pinned width/output tables against the published counts:
// derives the per-depth quadratics, counts every variant with the analyzer
// and reports per-variant deltas. exact==false means calibration failure;
// the report then carries the best-achievable deltas (never silently
// approximated).
CalibrationReport calibrate_base_widths();
CalibrationReport calibrate_base_widths(const std::map<std::pair<int, int>, int64_t>& targets);

}  // namespace watt
