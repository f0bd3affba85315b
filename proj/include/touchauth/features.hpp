#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "touchauth/csv.hpp"
#include "touchauth/stats.hpp"
#include "touchauth/types.hpp"

namespace touchauth {

inline constexpr std::size_t kFeatureCount = 31;

// Canonical feature order. All matrices, CSV columns, and index constants
// follow this order exactly.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "mid_stroke_area",
    "vel_p20",
    "mid_stroke_pressure",
    "end_to_end_direction",
    "stop_x",
    "start_x",
    "avg_direction",
    "start_y",
    "avg_velocity",
    "stop_y",
    "duration",
    "end_to_end_dist",
    "trajectory_length",
    "vel_p80",
    "median_vel_last3",
    "vel_p50",
    "acc_p20",
    "ratio_dist_traj",
    "max_deviation",
    "acc_p80",
    "mean_resultant_length",
    "median_acc_first5",
    "dev_p50",
    "inter_stroke_time",
    "dev_p80",
    "dev_p20",
    "acc_p50",
    "phone_orientation",
    "mid_stroke_finger_orientation",
    "direction_flag",
    "finger_orientation_change",
};

namespace feat {
inline constexpr std::size_t mid_stroke_area = 0;
inline constexpr std::size_t vel_p20 = 1;
inline constexpr std::size_t mid_stroke_pressure = 2;
inline constexpr std::size_t end_to_end_direction = 3;
inline constexpr std::size_t stop_x = 4;
inline constexpr std::size_t start_x = 5;
inline constexpr std::size_t avg_direction = 6;
inline constexpr std::size_t start_y = 7;
inline constexpr std::size_t avg_velocity = 8;
inline constexpr std::size_t stop_y = 9;
inline constexpr std::size_t duration = 10;
inline constexpr std::size_t end_to_end_dist = 11;
inline constexpr std::size_t trajectory_length = 12;
inline constexpr std::size_t vel_p80 = 13;
inline constexpr std::size_t median_vel_last3 = 14;
inline constexpr std::size_t vel_p50 = 15;
inline constexpr std::size_t acc_p20 = 16;
inline constexpr std::size_t ratio_dist_traj = 17;
inline constexpr std::size_t max_deviation = 18;
inline constexpr std::size_t acc_p80 = 19;
inline constexpr std::size_t mean_resultant_length = 20;
inline constexpr std::size_t median_acc_first5 = 21;
inline constexpr std::size_t dev_p50 = 22;
inline constexpr std::size_t inter_stroke_time = 23;
inline constexpr std::size_t dev_p80 = 24;
inline constexpr std::size_t dev_p20 = 25;
inline constexpr std::size_t acc_p50 = 26;
inline constexpr std::size_t phone_orientation = 27;
inline constexpr std::size_t mid_stroke_finger_orientation = 28;
inline constexpr std::size_t direction_flag = 29;
inline constexpr std::size_t finger_orientation_change = 30;
}  // namespace feat

inline std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  throw std::invalid_argument("unknown feature name: " + std::string(name));
}

// Features whose values enumerate categories rather than measure a quantity.
inline bool is_categorical_feature(std::size_t index) {
  return index == feat::phone_orientation || index == feat::direction_flag;
}

enum class DirectionClass { up = 0, down = 1, left = 2, right = 3 };

inline std::string_view direction_class_name(DirectionClass d) {
  switch (d) {
    case DirectionClass::up: return "up";
    case DirectionClass::down: return "down";
    case DirectionClass::left: return "left";
    case DirectionClass::right: return "right";
  }
  return "right";
}

inline std::optional<DirectionClass> parse_direction_class(std::string_view s) {
  if (s == "up") return DirectionClass::up;
  if (s == "down") return DirectionClass::down;
  if (s == "left") return DirectionClass::left;
  if (s == "right") return DirectionClass::right;
  return std::nullopt;
}

// up/down strokes feed the scrolling classifier, left/right the horizontal one.
inline bool is_vertical(DirectionClass d) {
  return d == DirectionClass::up || d == DirectionClass::down;
}

// One stroke's feature values in canonical order. Absent values (a feature
// whose defining quantity does not exist for this stroke, e.g. the
// inter-stroke time of a session's first stroke) are stored as quiet NaN.
struct FeatureVector {
  std::array<double, kFeatureCount> v{};
  DirectionClass direction_class = DirectionClass::right;
  std::string user_id;
  std::string doc_id;
  std::string phone_id;
  std::size_t stroke_index_in_session = 0;

  FeatureVector() { v.fill(std::numeric_limits<double>::quiet_NaN()); }

  bool has(std::size_t i) const { return !std::isnan(v[i]); }
  bool is_complete() const {
    for (double x : v) {
      if (std::isnan(x)) return false;
    }
    return true;
  }
};

inline constexpr double kPi = 3.14159265358979323846;

namespace detail {
// All angles live in a mathematical frame: x to the right, y upward. Raw
// screen y grows downward, so the y delta is flipped (and negative zero
// normalized so straight-left comes out as +pi, keeping angles in (-pi, pi]).
inline double flipped_dy(double dy_screen) {
  return dy_screen == 0.0 ? 0.0 : -dy_screen;
}

inline double segment_angle(double dx, double dy_screen) {
  return std::atan2(flipped_dy(dy_screen), dx);
}

inline double into_half_open_pi(double angle) {
  return angle == -kPi ? kPi : angle;
}
}  // namespace detail

// Speeds of consecutive sample pairs, in screen-fractions per second.
// Pairs with zero time delta are skipped.
inline std::vector<double> pairwise_velocities(const Stroke& s) {
  if (s.samples.size() < 2) throw std::invalid_argument("pairwise_velocities: need at least 2 samples");
  std::vector<double> out;
  out.reserve(s.samples.size() - 1);
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const auto& a = s.samples[i];
    const auto& b = s.samples[i + 1];
    const double dt_s = static_cast<double>(b.t - a.t) / 1000.0;
    if (dt_s <= 0.0) continue;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    out.push_back(std::sqrt(dx * dx + dy * dy) / dt_s);
  }
  if (out.empty()) throw std::invalid_argument("pairwise_velocities: degenerate stroke (no positive time delta)");
  return out;
}

// Signed differences of consecutive pair speeds divided by the time between
// pair midpoints. Returns an empty list when fewer than two speeds exist.
inline std::vector<double> pairwise_accelerations(const Stroke& s) {
  if (s.samples.size() < 2) throw std::invalid_argument("pairwise_accelerations: need at least 2 samples");
  std::vector<double> speeds;
  std::vector<double> midpoints_ms;
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const auto& a = s.samples[i];
    const auto& b = s.samples[i + 1];
    const double dt_s = static_cast<double>(b.t - a.t) / 1000.0;
    if (dt_s <= 0.0) continue;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    speeds.push_back(std::sqrt(dx * dx + dy * dy) / dt_s);
    midpoints_ms.push_back(0.5 * (static_cast<double>(a.t) + static_cast<double>(b.t)));
  }
  std::vector<double> out;
  if (speeds.size() < 2) return out;
  out.reserve(speeds.size() - 1);
  for (std::size_t i = 0; i + 1 < speeds.size(); ++i) {
    const double dm_s = (midpoints_ms[i + 1] - midpoints_ms[i]) / 1000.0;
    out.push_back((speeds[i + 1] - speeds[i]) / dm_s);
  }
  return out;
}

namespace detail {
struct AngleSum {
  double sum_cos = 0.0;
  double sum_sin = 0.0;
  std::size_t count = 0;
};

// Unit-vector sum over segments with nonzero displacement.
inline AngleSum angle_sum(const Stroke& s) {
  AngleSum acc;
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const double dx = s.samples[i + 1].x - s.samples[i].x;
    const double dy = s.samples[i + 1].y - s.samples[i].y;
    if (dx == 0.0 && dy == 0.0) continue;
    const double phi = segment_angle(dx, dy);
    acc.sum_cos += std::cos(phi);
    acc.sum_sin += std::sin(phi);
    ++acc.count;
  }
  return acc;
}
}  // namespace detail

// R = |sum of segment unit vectors| / segment count, in [0, 1]: 1 for a
// straight monotone stroke, near 0 for uniformly random segment angles.
inline double mean_resultant_length(const Stroke& s) {
  if (s.samples.size() < 2) throw std::invalid_argument("mean_resultant_length: need at least 2 samples");
  const auto acc = detail::angle_sum(s);
  if (acc.count == 0) {
    throw std::invalid_argument("mean_resultant_length: no segment with nonzero displacement");
  }
  return std::hypot(acc.sum_cos, acc.sum_sin) / static_cast<double>(acc.count);
}

// Argument of the segment unit-vector sum; absent when the sum vanishes.
inline std::optional<double> mean_direction(const Stroke& s) {
  if (s.samples.size() < 2) throw std::invalid_argument("mean_direction: need at least 2 samples");
  const auto acc = detail::angle_sum(s);
  if (acc.count == 0) {
    throw std::invalid_argument("mean_direction: no segment with nonzero displacement");
  }
  if (acc.sum_cos == 0.0 && acc.sum_sin == 0.0) return std::nullopt;
  return detail::into_half_open_pi(std::atan2(acc.sum_sin, acc.sum_cos));
}

// Signed perpendicular distance of each interior sample to the start-to-end
// line. The perpendicular direction is the end-to-end unit vector rotated 90
// degrees counterclockwise (in the y-up frame), so left of travel is positive.
inline std::vector<double> perpendicular_deviations(const Stroke& s) {
  if (s.samples.size() < 2) throw std::invalid_argument("perpendicular_deviations: need at least 2 samples");
  const auto& first = s.samples.front();
  const auto& last = s.samples.back();
  const double ex = last.x - first.x;
  const double ey = detail::flipped_dy(last.y - first.y);
  const double len = std::sqrt(ex * ex + ey * ey);
  if (len == 0.0) throw std::invalid_argument("perpendicular_deviations: zero end-to-end distance");
  const double px = -ey / len;
  const double py = ex / len;
  std::vector<double> out;
  if (s.samples.size() > 2) out.reserve(s.samples.size() - 2);
  for (std::size_t i = 1; i + 1 < s.samples.size(); ++i) {
    const double rx = s.samples[i].x - first.x;
    const double ry = detail::flipped_dy(s.samples[i].y - first.y);
    out.push_back(rx * px + ry * py);
  }
  return out;
}

struct ExtractOptions {
  // "median velocity at last 3 points" window; uses fewer when fewer exist.
  std::size_t vel_tail_window = 3;
  // "median acceleration at first 5 points" window; same shrink rule.
  std::size_t acc_head_window = 5;
};

// Computes the full 31-value vector for one normalized, click-filtered
// stroke. Features whose defining quantity does not exist for the stroke
// (first-stroke inter-stroke time, direction of a zero-displacement stroke,
// accelerations of a 2-sample stroke) stay NaN; such vectors are excluded
// from classifier data by default.
inline FeatureVector extract_features(const Stroke& s, const ExtractOptions& opt = {}) {
  const std::size_t n = s.samples.size();
  if (n < 2) throw std::invalid_argument("extract_features: need at least 2 samples");
  const auto& first = s.samples.front();
  const auto& last = s.samples.back();
  const std::int64_t duration_ms = last.t - first.t;
  if (duration_ms <= 0) throw std::invalid_argument("extract_features: non-positive stroke duration");

  FeatureVector f;
  f.user_id = s.user_id;
  f.doc_id = s.doc_id;
  f.phone_id = s.phone_id;

  f.v[feat::start_x] = first.x;
  f.v[feat::start_y] = first.y;
  f.v[feat::stop_x] = last.x;
  f.v[feat::stop_y] = last.y;
  f.v[feat::duration] = static_cast<double>(duration_ms);

  const double dx = last.x - first.x;
  const double dy = last.y - first.y;
  const double e2e = std::sqrt(dx * dx + dy * dy);
  f.v[feat::end_to_end_dist] = e2e;

  double traj = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double sx = s.samples[i + 1].x - s.samples[i].x;
    const double sy = s.samples[i + 1].y - s.samples[i].y;
    traj += std::sqrt(sx * sx + sy * sy);
  }
  f.v[feat::trajectory_length] = traj;
  if (traj > 0.0 && e2e > 0.0) f.v[feat::ratio_dist_traj] = e2e / traj;

  const double duration_s = static_cast<double>(duration_ms) / 1000.0;
  f.v[feat::avg_velocity] = e2e / duration_s;

  const std::vector<double> vels = pairwise_velocities(s);
  f.v[feat::vel_p20] = percentile(vels, 20.0);
  f.v[feat::vel_p50] = percentile(vels, 50.0);
  f.v[feat::vel_p80] = percentile(vels, 80.0);
  {
    const std::size_t w = std::min(opt.vel_tail_window, vels.size());
    std::vector<double> tail(vels.end() - static_cast<std::ptrdiff_t>(w), vels.end());
    f.v[feat::median_vel_last3] = median(tail);
  }

  const std::vector<double> accs = pairwise_accelerations(s);
  if (!accs.empty()) {
    f.v[feat::acc_p20] = percentile(accs, 20.0);
    f.v[feat::acc_p50] = percentile(accs, 50.0);
    f.v[feat::acc_p80] = percentile(accs, 80.0);
    const std::size_t w = std::min(opt.acc_head_window, accs.size());
    std::vector<double> head(accs.begin(), accs.begin() + static_cast<std::ptrdiff_t>(w));
    f.v[feat::median_acc_first5] = median(head);
  }

  {
    const auto acc = detail::angle_sum(s);
    if (acc.count > 0) {
      f.v[feat::mean_resultant_length] =
          std::hypot(acc.sum_cos, acc.sum_sin) / static_cast<double>(acc.count);
      if (!(acc.sum_cos == 0.0 && acc.sum_sin == 0.0)) {
        f.v[feat::avg_direction] = detail::into_half_open_pi(std::atan2(acc.sum_sin, acc.sum_cos));
      }
    }
  }

  if (e2e > 0.0) {
    f.v[feat::end_to_end_direction] = detail::into_half_open_pi(detail::segment_angle(dx, dy));
    const std::vector<double> devs = perpendicular_deviations(s);
    if (devs.empty()) {
      // 2-sample stroke: the trajectory is the end-to-end line itself.
      f.v[feat::max_deviation] = 0.0;
      f.v[feat::dev_p20] = 0.0;
      f.v[feat::dev_p50] = 0.0;
      f.v[feat::dev_p80] = 0.0;
    } else {
      double max_dev = devs[0];
      std::vector<double> abs_devs;
      abs_devs.reserve(devs.size());
      for (double d : devs) {
        if (std::abs(d) > std::abs(max_dev)) max_dev = d;
        abs_devs.push_back(std::abs(d));
      }
      f.v[feat::max_deviation] = max_dev;
      f.v[feat::dev_p20] = percentile(abs_devs, 20.0);
      f.v[feat::dev_p50] = percentile(abs_devs, 50.0);
      f.v[feat::dev_p80] = percentile(abs_devs, 80.0);
    }
    // Dominant displacement component, ties broken toward horizontal. Up
    // means toward the top of the screen (decreasing raw y).
    const double fy = detail::flipped_dy(dy);
    if (std::abs(dx) >= std::abs(fy)) {
      f.direction_class = dx > 0.0 ? DirectionClass::right : DirectionClass::left;
    } else {
      f.direction_class = fy > 0.0 ? DirectionClass::up : DirectionClass::down;
    }
    f.v[feat::direction_flag] = static_cast<double>(static_cast<int>(f.direction_class));
  }

  if (s.prev_stroke_end_t) {
    const std::int64_t inter = first.t - *s.prev_stroke_end_t;
    if (inter >= 0) f.v[feat::inter_stroke_time] = static_cast<double>(inter);
  }

  const std::size_t mid = (n + 1) / 2 - 1;  // 1-based ceil(N/2)
  f.v[feat::mid_stroke_pressure] = s.samples[mid].pressure;
  f.v[feat::mid_stroke_area] = s.samples[mid].area;
  f.v[feat::mid_stroke_finger_orientation] = s.samples[mid].finger_orientation;
  f.v[feat::finger_orientation_change] = last.finger_orientation - first.finger_orientation;
  f.v[feat::phone_orientation] = static_cast<double>(static_cast<int>(first.phone_orientation));

  return f;
}

// Extracts features for a stroke list, numbering strokes per session in
// input order.
inline std::vector<FeatureVector> extract_all(std::span<const Stroke> strokes,
                                              const ExtractOptions& opt = {}) {
  std::vector<FeatureVector> out;
  out.reserve(strokes.size());
  std::map<std::pair<std::string, std::string>, std::size_t> counters;
  for (const Stroke& s : strokes) {
    FeatureVector f = extract_features(s, opt);
    f.stroke_index_in_session = counters[{s.user_id, s.doc_id}]++;
    out.push_back(std::move(f));
  }
  return out;
}

// --- feature CSV (31 canonical columns + provenance) ---

inline std::string feature_csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (i) h += ',';
    h += std::string(kFeatureNames[i]);
  }
  h += ",user_id,doc_id,phone_id,direction_class";
  return h;
}

inline std::string to_csv(std::span<const FeatureVector> features) {
  std::string out = feature_csv_header();
  out += '\n';
  for (const FeatureVector& f : features) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (i) out += ',';
      out += format_double(f.v[i]);
    }
    out += ',';
    out += f.user_id;
    out += ',';
    out += f.doc_id;
    out += ',';
    out += f.phone_id;
    out += ',';
    if (f.has(feat::direction_flag)) out += std::string(direction_class_name(f.direction_class));
    out += '\n';
  }
  return out;
}

// Parses a feature CSV written by to_csv. stroke_index_in_session is
// reconstructed from row order within each (user_id, doc_id).
inline std::vector<FeatureVector> features_from_csv(std::string_view text) {
  std::vector<FeatureVector> out;
  bool header_seen = false;
  std::vector<std::string_view> fields;
  std::map<std::pair<std::string, std::string>, std::size_t> counters;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_seen) {
      split_csv_line(line, fields);
      if (fields.size() != kFeatureCount + 4 || fields[0] != kFeatureNames[0]) {
        throw ParseError("feature csv: unreadable header");
      }
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (fields[i] != kFeatureNames[i]) {
          throw ParseError("feature csv: unexpected column '" + std::string(fields[i]) + "'");
        }
      }
      header_seen = true;
      return;
    }
    if (line.empty()) return;
    split_csv_line(line, fields);
    if (fields.size() != kFeatureCount + 4) {
      throw ParseError("feature csv: bad field count at line " + std::to_string(line_no));
    }
    FeatureVector f;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = parse_double(fields[i]);
      if (!v) throw ParseError("feature csv: bad number at line " + std::to_string(line_no));
      f.v[i] = *v;
    }
    f.user_id = std::string(fields[kFeatureCount]);
    f.doc_id = std::string(fields[kFeatureCount + 1]);
    f.phone_id = std::string(fields[kFeatureCount + 2]);
    if (const auto d = parse_direction_class(fields[kFeatureCount + 3])) f.direction_class = *d;
    f.stroke_index_in_session = counters[{f.user_id, f.doc_id}]++;
    out.push_back(std::move(f));
  });
  if (!header_seen) throw ParseError("feature csv: empty file");
  return out;
}

}  // namespace touchauth
