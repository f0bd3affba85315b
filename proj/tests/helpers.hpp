#pragma once

// Shared builders for test fixtures.

#include <cstdint>
#include <string>
#include <vector>

#include "touchauth/csv.hpp"
#include "touchauth/types.hpp"

namespace helpers {

struct Sample {
  std::int64_t t;
  double x;
  double y;
  double pressure = 0.5;
  double area = 0.4;
  double fo = 0.0;
};

inline touchauth::Stroke make_stroke(const std::vector<Sample>& samples,
                                     const std::string& user = "u1",
                                     const std::string& doc = "d1",
                                     const std::string& phone = "p1") {
  touchauth::Stroke s;
  s.user_id = user;
  s.doc_id = doc;
  s.phone_id = phone;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    touchauth::TouchEvent e;
    e.phone_id = phone;
    e.user_id = user;
    e.doc_id = doc;
    e.t = samples[i].t;
    e.action = i == 0 ? touchauth::Action::down
                      : (i + 1 == samples.size() ? touchauth::Action::up : touchauth::Action::move);
    e.x = samples[i].x;
    e.y = samples[i].y;
    e.pressure = samples[i].pressure;
    e.area = samples[i].area;
    e.finger_orientation = samples[i].fo;
    s.samples.push_back(e);
  }
  return s;
}

inline std::string log_row(const std::string& phone, const std::string& user,
                           const std::string& doc, std::int64_t t, int action, int orient,
                           double x, double y, double pressure = 0.5, double area = 0.4,
                           double fo = 0.0) {
  auto f = [](double v) { return touchauth::format_double(v); };
  return phone + "," + user + "," + doc + "," + std::to_string(t) + "," +
         std::to_string(action) + "," + std::to_string(orient) + "," + f(x) + "," + f(y) + "," +
         f(pressure) + "," + f(area) + "," + f(fo) + "\n";
}

}  // namespace helpers
