#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace touchauth {

// Percentile by linear interpolation between closest ranks: rank = q/100 *
// (n-1), value interpolated between the two surrounding order statistics.
// q = 50 is the median.
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile: empty input");
  if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile: q out of [0,100]");
  if (sorted.size() == 1) return sorted[0];
  const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double percentile(std::span<const double> values, double q) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, q);
}

inline double median(std::span<const double> values) { return percentile(values, 50.0); }

inline double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

// Population (1/n) standard deviation.
inline double population_stddev(std::span<const double> values) {
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

// Boxplot summary: median, quartiles, 1.5-IQR whiskers clamped to data
// points, and the values beyond the whiskers.
struct BoxStats {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

inline BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("box_stats: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  BoxStats b;
  b.median = percentile_sorted(sorted, 50.0);
  b.q25 = percentile_sorted(sorted, 25.0);
  b.q75 = percentile_sorted(sorted, 75.0);
  const double iqr = b.q75 - b.q25;
  const double lo_fence = b.q25 - 1.5 * iqr;
  const double hi_fence = b.q75 + 1.5 * iqr;
  b.whisker_lo = sorted.front();
  b.whisker_hi = sorted.back();
  for (double v : sorted) {
    if (v >= lo_fence) {
      b.whisker_lo = v;
      break;
    }
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it <= hi_fence) {
      b.whisker_hi = *it;
      break;
    }
  }
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) b.outliers.push_back(v);
  }
  return b;
}

}  // namespace touchauth
