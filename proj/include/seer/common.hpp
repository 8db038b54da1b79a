#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace seer {

// Reserved tokens. kNullToken marks a missing handover endpoint (device joined
// or left the system); kStartToken pads Markov histories shorter than the
// chain order. No access point may use either as its bssid.
inline constexpr const char* kNullToken = "null";
inline constexpr const char* kStartToken = "^";

inline constexpr int64_t kSecondsPerDay = 86400;
inline constexpr int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

inline bool is_reserved_token(const std::string& s) {
  return s == kNullToken || s == kStartToken;
}

// Position in the local planar city frame, meters.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(const Point& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }

  Point clamp(const Point& p) const {
    return {std::min(std::max(p.x, min_x), max_x),
            std::min(std::max(p.y, min_y), max_y)};
  }
};

inline int day_index(int64_t timestamp) {
  return static_cast<int>(timestamp / kSecondsPerDay);
}

// Simulation epoch is Monday 00:00, so weekday 0..4, weekend 5..6.
inline int day_of_week(int64_t timestamp) { return day_index(timestamp) % 7; }

} // namespace seer
