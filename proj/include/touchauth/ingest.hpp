#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "touchauth/csv.hpp"
#include "touchauth/types.hpp"

namespace touchauth {

inline constexpr std::string_view kLogHeader =
    "phone_id,user_id,doc_id,time_ms,action,phone_orientation,x,y,pressure,area,finger_orientation";
inline constexpr std::string_view kScreenSpecHeader = "phone_id,width_px,height_px";

// Screen-spec file: CSV `phone_id,width_px,height_px`, header required.
inline ScreenSpecMap parse_screen_specs(std::string_view csv_text) {
  ScreenSpecMap specs;
  bool header_seen = false;
  std::vector<std::string_view> fields;
  for_each_line(csv_text, [&](std::size_t line_no, std::string_view line) {
    if (!header_seen) {
      split_csv_line(line, fields);
      if (fields.size() != 3 || fields[0] != "phone_id") {
        throw ParseError("screen specs: unreadable header");
      }
      header_seen = true;
      return;
    }
    if (line.empty()) return;
    split_csv_line(line, fields);
    if (fields.size() != 3) throw ParseError("screen specs: bad field count at line " + std::to_string(line_no));
    const auto w = parse_double(fields[1]);
    const auto h = parse_double(fields[2]);
    if (!w || !h || *w <= 0.0 || *h <= 0.0) {
      throw ParseError("screen specs: invalid dimensions at line " + std::to_string(line_no));
    }
    ScreenSpec s;
    s.phone_id = std::string(fields[0]);
    s.width_px = *w;
    s.height_px = *h;
    specs[s.phone_id] = s;
  });
  if (!header_seen) throw ParseError("screen specs: empty file");
  return specs;
}

struct ParseResult {
  std::vector<TouchEvent> events;
  std::vector<Diagnostic> diagnostics;
};

// Parses the canonical 11-column log CSV. Well-formed rows become events;
// malformed rows become diagnostics and are skipped. When `specs` is
// non-empty every event is bounds-checked against its phone (on-bounds
// accepted, beyond rejected) and an unknown phone_id is fatal. The result is
// stably sorted by (user_id, doc_id, t).
inline ParseResult parse_log(std::string_view csv_text, const ScreenSpecMap& specs) {
  ParseResult result;
  bool header_seen = false;
  std::vector<std::string_view> fields;
  for_each_line(csv_text, [&](std::size_t line_no, std::string_view line) {
    if (!header_seen) {
      split_csv_line(line, fields);
      if (fields.size() != 11 || fields[0] != "phone_id" || fields[3] != "time_ms") {
        throw ParseError("log: unreadable header");
      }
      header_seen = true;
      return;
    }
    if (line.empty()) return;
    split_csv_line(line, fields);
    auto reject = [&](std::string reason) {
      result.diagnostics.push_back({line_no, std::string(line.substr(0, 80)), std::move(reason)});
    };
    if (fields.size() != 11) {
      reject("expected 11 fields, got " + std::to_string(fields.size()));
      return;
    }
    TouchEvent e;
    e.phone_id = std::string(fields[0]);
    e.user_id = std::string(fields[1]);
    e.doc_id = std::string(fields[2]);
    if (e.phone_id.empty() || e.user_id.empty() || e.doc_id.empty()) {
      reject("empty id field");
      return;
    }
    const auto t = parse_i64(fields[3]);
    if (!t) {
      reject("non-numeric time_ms");
      return;
    }
    if (*t < 0) {
      reject("negative time_ms");
      return;
    }
    e.t = *t;
    const auto action = parse_i64(fields[4]);
    if (!action || *action < 0 || *action > 3) {
      reject("invalid action code");
      return;
    }
    e.action = static_cast<Action>(*action);
    const auto orient = parse_i64(fields[5]);
    if (!orient || (*orient != 0 && *orient != 1)) {
      reject("invalid phone_orientation");
      return;
    }
    e.phone_orientation = static_cast<PhoneOrientation>(*orient);
    const char* names[] = {"x", "y", "pressure", "area", "finger_orientation"};
    double* slots[] = {&e.x, &e.y, &e.pressure, &e.area, &e.finger_orientation};
    for (int i = 0; i < 5; ++i) {
      const auto v = parse_double(fields[6 + i]);
      if (!v || std::isnan(*v)) {
        reject(std::string("non-numeric ") + names[i]);
        return;
      }
      *slots[i] = *v;
    }
    if (!specs.empty()) {
      const auto it = specs.find(e.phone_id);
      if (it == specs.end()) {
        throw ParseError("log: unknown phone_id '" + e.phone_id + "' at line " + std::to_string(line_no));
      }
      if (e.x < 0.0 || e.x > it->second.width_px || e.y < 0.0 || e.y > it->second.height_px) {
        reject("position outside screen bounds");
        return;
      }
    }
    result.events.push_back(std::move(e));
  });
  if (!header_seen) throw ParseError("log: empty file");
  std::stable_sort(result.events.begin(), result.events.end(),
                   [](const TouchEvent& a, const TouchEvent& b) {
                     return std::tie(a.user_id, a.doc_id, a.t) < std::tie(b.user_id, b.doc_id, b.t);
                   });
  return result;
}

struct SegmentResult {
  std::vector<Stroke> strokes;
  std::vector<Diagnostic> diagnostics;
};

// Segments one session's event run (single user_id/doc_id, sorted by t) into
// strokes. Each maximal down..up run becomes one stroke. Orphan move/up
// events are dropped; a down during an open stroke discards the open run and
// starts fresh; multitouch aborts the open stroke.
inline SegmentResult segment_strokes(std::span<const TouchEvent> events) {
  SegmentResult result;
  std::vector<TouchEvent> open;
  bool stroke_open = false;
  std::optional<std::int64_t> last_end_t;

  auto drop_open = [&](const TouchEvent& at, const char* why) {
    if (stroke_open) {
      result.diagnostics.push_back({0, at.user_id + "/" + at.doc_id + " t=" + std::to_string(at.t), why});
      open.clear();
      stroke_open = false;
    }
  };

  for (const TouchEvent& e : events) {
    switch (e.action) {
      case Action::down:
        drop_open(e, "open stroke discarded: new down before up");
        open.push_back(e);
        stroke_open = true;
        break;
      case Action::move:
        if (!stroke_open) {
          result.diagnostics.push_back({0, e.user_id + "/" + e.doc_id + " t=" + std::to_string(e.t),
                                        "move event with no open stroke"});
        } else {
          open.push_back(e);
        }
        break;
      case Action::up:
        if (!stroke_open) {
          result.diagnostics.push_back({0, e.user_id + "/" + e.doc_id + " t=" + std::to_string(e.t),
                                        "up event with no open stroke"});
        } else {
          open.push_back(e);
          Stroke s;
          s.samples = std::move(open);
          s.user_id = s.samples.front().user_id;
          s.doc_id = s.samples.front().doc_id;
          s.phone_id = s.samples.front().phone_id;
          // Pathological sampling gaps are kept, not dropped; note them so a
          // human can audit the corpus.
          for (std::size_t i = 1; i < s.samples.size(); ++i) {
            const std::int64_t gap = s.samples[i].t - s.samples[i - 1].t;
            if (gap > 1000) {
              result.diagnostics.push_back({0, s.user_id + "/" + s.doc_id + " t=" + std::to_string(s.samples[i].t),
                                            "stroke kept despite " + std::to_string(gap) + " ms sampling gap"});
            }
          }
          s.prev_stroke_end_t = last_end_t;
          last_end_t = s.samples.back().t;
          result.strokes.push_back(std::move(s));
          open.clear();
          stroke_open = false;
        }
        break;
      case Action::multitouch:
        drop_open(e, "open stroke aborted by multitouch event");
        break;
    }
  }
  if (stroke_open) {
    result.diagnostics.push_back({0, open.front().user_id + "/" + open.front().doc_id,
                                  "trailing stroke never closed by up"});
  }
  return result;
}

// Segments a whole sorted event list, session by session.
inline SegmentResult segment_log(std::span<const TouchEvent> events) {
  SegmentResult result;
  std::size_t start = 0;
  while (start < events.size()) {
    std::size_t end = start;
    while (end < events.size() && events[end].user_id == events[start].user_id &&
           events[end].doc_id == events[start].doc_id) {
      ++end;
    }
    SegmentResult part = segment_strokes(events.subspan(start, end - start));
    for (auto& s : part.strokes) result.strokes.push_back(std::move(s));
    for (auto& d : part.diagnostics) result.diagnostics.push_back(std::move(d));
    start = end;
  }
  return result;
}

// End-to-end displacement as a fraction of the screen diagonal; coordinates
// must already be normalized to [0,1]^2, whose diagonal is sqrt(2).
inline double displacement_fraction(const Stroke& s) {
  const auto& a = s.samples.front();
  const auto& b = s.samples.back();
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return std::sqrt(dx * dx + dy * dy) / std::sqrt(2.0);
}

// Drops click-like strokes: keeps exactly those with displacement fraction
// >= min_displacement_frac. prev_stroke_end_t is not recomputed, so
// inter-stroke time keeps measuring real elapsed time.
inline std::vector<Stroke> filter_clicks(std::vector<Stroke> strokes, double min_displacement_frac) {
  std::vector<Stroke> kept;
  kept.reserve(strokes.size());
  for (auto& s : strokes) {
    if (displacement_fraction(s) >= min_displacement_frac) kept.push_back(std::move(s));
  }
  return kept;
}

// Maps pixel coordinates into [0,1]^2. Everything else is unchanged.
inline Stroke normalize(Stroke stroke, const ScreenSpec& spec) {
  if (stroke.phone_id != spec.phone_id) {
    throw std::invalid_argument("normalize: screen spec for '" + spec.phone_id +
                                "' does not match stroke phone '" + stroke.phone_id + "'");
  }
  for (auto& e : stroke.samples) {
    e.x /= spec.width_px;
    e.y /= spec.height_px;
  }
  return stroke;
}

}  // namespace touchauth
