#include "watt/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace watt {

const std::map<std::pair<int, int>, int64_t>& published_param_table() {
  static const std::map<std::pair<int, int>, int64_t> table = {
      {{1, 2}, 8501},    {{1, 3}, 13693},   {{1, 4}, 19909},  {{1, 5}, 27149},
      {{1, 6}, 35413},   {{1, 7}, 44701},   {{3, 2}, 106629}, {{3, 3}, 205673},
      {{3, 4}, 335693},  {{3, 5}, 496689},  {{3, 6}, 688661}, {{3, 7}, 911609},
      {{5, 2}, 371493},  {{5, 3}, 720233},
  };
  return table;
}

namespace {

QuadraticFit fit_family(int d, const std::vector<std::pair<int, int64_t>>& pts) {
  QuadraticFit fit;
  fit.d = d;
  if (pts.size() < 3) return fit;  // cannot establish curvature from two points
  std::vector<int64_t> first;
  for (size_t i = 1; i < pts.size(); ++i) first.push_back(pts[i].second - pts[i - 1].second);
  std::vector<int64_t> second;
  for (size_t i = 1; i < first.size(); ++i) second.push_back(first[i] - first[i - 1]);
  fit.consistent = std::all_of(second.begin(), second.end(),
                               [&](int64_t v) { return v == second.front(); });
  if (!fit.consistent) return fit;
  fit.second_difference = second.front();
  fit.a2 = fit.second_difference / 2;
  // solve a1, a0 from the first two points
  const int64_t k0 = pts[0].first, k1 = pts[1].first;
  const int64_t r0 = pts[0].second - fit.a2 * k0 * k0;
  const int64_t r1 = pts[1].second - fit.a2 * k1 * k1;
  fit.a1 = (r1 - r0) / (k1 - k0);
  fit.a0 = r0 - fit.a1 * k0;
  return fit;
}

}  // namespace

CalibrationReport calibrate_base_widths() { return calibrate_base_widths(published_param_table()); }

CalibrationReport calibrate_base_widths(const std::map<std::pair<int, int>, int64_t>& targets) {
  CalibrationReport report;
  std::map<int, std::vector<std::pair<int, int64_t>>> families;
  for (const auto& [dk, target] : targets) {
    const auto [d, k] = dk;
    WattModel<float> model(ArchConfig::make(d, k, /*attention=*/true), /*seed=*/0);
    const ModelSummary s = summarize(model);
    report.entries.push_back({d, k, target, s.total_params, s.total_params - target});
    families[d].push_back({k, target});
  }
  for (auto& [d, pts] : families) {
    std::sort(pts.begin(), pts.end());
    report.fits.push_back(fit_family(d, pts));
  }
  report.max_abs_delta = 0;
  for (const auto& e : report.entries)
    report.max_abs_delta = std::max(report.max_abs_delta, std::abs(e.delta));
  report.exact = report.max_abs_delta == 0;
  return report;
}

std::string CalibrationReport::to_string() const {
  std::ostringstream os;
  os << "calibration " << (exact ? "EXACT" : "FAILED") << " (max |delta| = " << max_abs_delta
     << ")\n";
  for (const auto& e : entries)
    os << "  WATT-EffNet-" << e.d << "-" << e.k << ": computed " << e.computed << " target "
       << e.target << " delta " << (e.delta >= 0 ? "+" : "") << e.delta << "\n";
  for (const auto& f : fits) {
    os << "  d=" << f.d << " family: ";
    if (!f.consistent) {
      os << (f.points < 3 ? "two published points, curvature unconstrained\n"
                          : "second differences not constant\n");
      continue;
    }
    os << "second difference " << f.second_difference << ", p(k) = " << f.a2 << "*k^2 + " << f.a1
       << "*k + " << f.a0 << "\n";
  }
  return os.str();
}

}  // namespace watt
