#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace touchauth {

enum class Action : int { down = 0, up = 1, move = 2, multitouch = 3 };

enum class PhoneOrientation : int { portrait = 0, landscape = 1 };

// One raw sample from a device log.
struct TouchEvent {
  std::string phone_id;
  std::string user_id;
  std::string doc_id;
  std::int64_t t = 0;  // milliseconds
  Action action = Action::down;
  PhoneOrientation phone_orientation = PhoneOrientation::portrait;
  double x = 0.0;
  double y = 0.0;
  double pressure = 0.0;
  double area = 0.0;
  double finger_orientation = 0.0;
};

struct ScreenSpec {
  std::string phone_id;
  double width_px = 0.0;
  double height_px = 0.0;
};

using ScreenSpecMap = std::map<std::string, ScreenSpec>;

// A down -> move... -> up sample run; the unit of behavior.
struct Stroke {
  std::vector<TouchEvent> samples;
  std::string user_id;
  std::string doc_id;
  std::string phone_id;
  // Up-timestamp of the previous completed stroke in the same session;
  // absent for the first stroke.
  std::optional<std::int64_t> prev_stroke_end_t;
};

// Non-fatal ingestion finding: a skipped row, a dropped event, an aborted
// stroke. `row` is 1-based within the source file; 0 when not row-bound.
struct Diagnostic {
  std::size_t row = 0;
  std::string context;
  std::string reason;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace touchauth
