#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seer/common.hpp"
#include "seer/errors.hpp"
#include "seer/raw_event.hpp"

namespace seer {

enum class PoiCategory { employer, food, health, recreation };

inline const char* to_string(PoiCategory c) {
  switch (c) {
  case PoiCategory::employer: return "employer";
  case PoiCategory::food: return "food";
  case PoiCategory::health: return "health";
  case PoiCategory::recreation: return "recreation";
  }
  return "?";
}

inline std::optional<PoiCategory> parse_category(const std::string& s) {
  if (s == "employer") return PoiCategory::employer;
  if (s == "food") return PoiCategory::food;
  if (s == "health") return PoiCategory::health;
  if (s == "recreation") return PoiCategory::recreation;
  return std::nullopt;
}

// Point of interest anchoring the commercial-zone density.
struct Poi {
  std::string id;
  PoiCategory category = PoiCategory::employer;
  Point position;
  double weight = 1.0; // relative attraction, > 0
};

struct AccessPoint {
  std::string bssid;
  Point position;
  double radius = 0.0; // association range, meters
};

// Synthetic inhabitant: fixed personal locations and walking speed.
struct Citizen {
  std::string mac;
  Point home;
  Point job;
  Point gym;
  Point club;
  double speed = 1.0; // meters per second
};

// 2D probability density over the city, normalized to integrate to 1.
struct DensityGrid {
  Point origin;
  double cell_size = 50.0;
  size_t nx = 0;
  size_t ny = 0;
  std::vector<double> values; // row-major, values[iy * nx + ix]

  double& at(size_t ix, size_t iy) { return values[iy * nx + ix]; }
  double at(size_t ix, size_t iy) const { return values[iy * nx + ix]; }
  double cell_area() const { return cell_size * cell_size; }
  Point cell_center(size_t ix, size_t iy) const {
    return {origin.x + (static_cast<double>(ix) + 0.5) * cell_size,
            origin.y + (static_cast<double>(iy) + 0.5) * cell_size};
  }
};

struct GridSpec {
  Point origin;
  double cell_size = 50.0;
  size_t nx = 0;
  size_t ny = 0;
};

// --- POI / AP files (JSON lines) -------------------------------------------

inline std::vector<Poi> load_pois(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<Poi> pois;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      fail(ex.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("category") ||
        !j.contains("x") || !j.contains("y") || !j.contains("weight"))
      fail("expected keys id/category/x/y/weight");
    if (!j["id"].is_string() || !j["category"].is_string() ||
        !j["x"].is_number() || !j["y"].is_number() || !j["weight"].is_number())
      fail("wrong field type");
    Poi p;
    p.id = j["id"].get<std::string>();
    auto cat = parse_category(j["category"].get<std::string>());
    if (!cat) fail("unknown category: " + j["category"].get<std::string>());
    p.category = *cat;
    p.position = {j["x"].get<double>(), j["y"].get<double>()};
    p.weight = j["weight"].get<double>();
    if (p.weight <= 0) fail("weight must be positive");
    pois.push_back(std::move(p));
  }
  return pois;
}

inline void write_pois(const std::string& path, const std::vector<Poi>& pois) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& p : pois) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["category"] = to_string(p.category);
    j["x"] = p.position.x;
    j["y"] = p.position.y;
    j["weight"] = p.weight;
    out << j.dump() << "\n";
  }
}

inline std::vector<AccessPoint> load_aps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<AccessPoint> aps;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      fail(ex.what());
    }
    if (!j.is_object() || !j.contains("bssid") || !j.contains("x") ||
        !j.contains("y") || !j.contains("radius") || !j["bssid"].is_string() ||
        !j["x"].is_number() || !j["y"].is_number() || !j["radius"].is_number())
      fail("expected keys bssid/x/y/radius");
    AccessPoint ap;
    ap.bssid = j["bssid"].get<std::string>();
    ap.position = {j["x"].get<double>(), j["y"].get<double>()};
    ap.radius = j["radius"].get<double>();
    if (ap.radius <= 0) fail("radius must be positive");
    if (is_reserved_token(ap.bssid)) fail("bssid uses a reserved token");
    for (const auto& other : aps)
      if (other.bssid == ap.bssid) fail("duplicate bssid: " + ap.bssid);
    aps.push_back(std::move(ap));
  }
  return aps;
}

inline void write_aps(const std::string& path,
                      const std::vector<AccessPoint>& aps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& ap : aps) {
    nlohmann::ordered_json j;
    j["bssid"] = ap.bssid;
    j["x"] = ap.position.x;
    j["y"] = ap.position.y;
    j["radius"] = ap.radius;
    out << j.dump() << "\n";
  }
}

// --- kernel density ----------------------------------------------------------

// value(cell) proportional to sum_i weight_i * exp(-|cell - poi_i|^2 / 2h^2),
// then normalized so the grid integrates to 1.
inline DensityGrid build_density(const std::vector<Poi>& pois, double bandwidth,
                                 const GridSpec& spec) {
  if (pois.empty()) throw EmptyInput("no POIs for density estimation");
  if (bandwidth <= 0) throw std::invalid_argument("bandwidth must be positive");
  DensityGrid grid;
  grid.origin = spec.origin;
  grid.cell_size = spec.cell_size;
  grid.nx = spec.nx;
  grid.ny = spec.ny;
  grid.values.assign(spec.nx * spec.ny, 0.0);
  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  for (size_t iy = 0; iy < grid.ny; ++iy) {
    for (size_t ix = 0; ix < grid.nx; ++ix) {
      Point c = grid.cell_center(ix, iy);
      double v = 0.0;
      for (const auto& p : pois) {
        double dx = c.x - p.position.x;
        double dy = c.y - p.position.y;
        v += p.weight * std::exp(-(dx * dx + dy * dy) * inv2h2);
      }
      grid.at(ix, iy) = v;
    }
  }
  double total = 0.0;
  for (double v : grid.values) total += v;
  if (total <= 0.0)
    throw ConfigError("density mass on the grid is zero; POIs outside grid?");
  const double norm = 1.0 / (total * grid.cell_area());
  for (double& v : grid.values) v *= norm;
  return grid;
}

inline void write_density_csv(const std::string& path, const DensityGrid& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (size_t iy = 0; iy < g.ny; ++iy) {
    for (size_t ix = 0; ix < g.nx; ++ix) {
      if (ix) out << ',';
      out << g.at(ix, iy);
    }
    out << '\n';
  }
}

// Draws from the kernel mixture: pick POI i with probability weight_i / sum,
// add an isotropic Gaussian offset with std = bandwidth, clamp to the box.
inline Point sample_point(const std::vector<Poi>& pois, double bandwidth,
                          const BoundingBox& box, std::mt19937& rng) {
  if (pois.empty()) throw EmptyInput("no POIs to sample from");
  double total = 0.0;
  for (const auto& p : pois) total += p.weight;
  double pick = std::uniform_real_distribution<double>(0.0, total)(rng);
  size_t i = 0;
  for (; i + 1 < pois.size(); ++i) {
    pick -= pois[i].weight;
    if (pick < 0.0) break;
  }
  std::normal_distribution<double> offset(0.0, bandwidth);
  Point raw{pois[i].position.x + offset(rng), pois[i].position.y + offset(rng)};
  return box.clamp(raw);
}

inline std::string synthetic_mac(uint32_t n) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "02:00:00:%02x:%02x:%02x", (n >> 16) & 0xff,
                (n >> 8) & 0xff, n & 0xff);
  return buf;
}

inline std::vector<Citizen>
generate_citizens(size_t n, const std::vector<Poi>& pois, double bandwidth,
                  const BoundingBox& box, std::mt19937& rng, double speed_min,
                  double speed_max) {
  std::vector<Citizen> citizens;
  citizens.reserve(n);
  std::uniform_real_distribution<double> speed(speed_min, speed_max);
  for (size_t i = 0; i < n; ++i) {
    Citizen c;
    c.mac = synthetic_mac(static_cast<uint32_t>(i));
    c.home = sample_point(pois, bandwidth, box, rng);
    c.job = sample_point(pois, bandwidth, box, rng);
    c.gym = sample_point(pois, bandwidth, box, rng);
    c.club = sample_point(pois, bandwidth, box, rng);
    c.speed = speed(rng);
    citizens.push_back(std::move(c));
  }
  return citizens;
}

// Nearest in-range AP, ties broken by lexicographically smallest bssid.
inline std::optional<std::string>
nearest_ap(const Point& position, const std::vector<AccessPoint>& aps) {
  const AccessPoint* best = nullptr;
  double best_dist = 0.0;
  for (const auto& ap : aps) {
    double d = distance(position, ap.position);
    if (d > ap.radius) continue;
    if (!best || d < best_dist || (d == best_dist && ap.bssid < best->bssid)) {
      best = &ap;
      best_dist = d;
    }
  }
  if (!best) return std::nullopt;
  return best->bssid;
}

namespace sched {

// Weekday anchors, seconds from midnight. The morning departure is drawn
// once per citizen in [07:00, 09:30].
inline constexpr int64_t kMorningEarliest = 7 * 3600;
inline constexpr int64_t kMorningLatest = 9 * 3600 + 30 * 60;
inline constexpr int64_t kLunchDeparture = 12 * 3600 + 30 * 60;
inline constexpr int64_t kLunchDwell = 30 * 60;
inline constexpr int64_t kEveningDeparture = 17 * 3600 + 30 * 60;
inline constexpr int64_t kEveningDwell = 90 * 60;
inline constexpr int64_t kWeekendDeparture = 10 * 3600;
inline constexpr int64_t kWeekendDwell = 4 * 3600;
inline constexpr double kLunchProbability = 0.5;
inline constexpr double kEveningOutProbability = 0.4;

struct Leg {
  int64_t sched = 0;     // earliest departure, absolute seconds
  int64_t min_dwell = 0; // required stay at the previous stop
  Point dest;
};

} // namespace sched

// Simulates every citizen over [start_epoch, start_epoch + duration): each
// follows the weekly schedule, moving along straight segments at constant
// speed on a 1 s tick. A RawEvent is emitted whenever the nearest in-range
// AP changes. Output is globally sorted by timestamp, then mac.
inline std::vector<RawEvent>
simulate(const std::vector<Citizen>& citizens,
         const std::vector<AccessPoint>& aps, const std::vector<Poi>& pois,
         int64_t start_epoch, int64_t duration, std::mt19937& rng) {
  if (aps.empty()) throw ConfigError("simulation requires at least one AP");
  if (duration <= 0) throw ConfigError("duration must be positive");

  std::vector<const Poi*> food, recreation;
  for (const auto& p : pois) {
    if (p.category == PoiCategory::food) food.push_back(&p);
    if (p.category == PoiCategory::recreation) recreation.push_back(&p);
  }
  double recreation_total = 0.0;
  for (const Poi* p : recreation) recreation_total += p->weight;

  // Citizens lunch near work: the food POI closest to the job.
  auto lunch_spot = [&](const Point& job) -> const Poi* {
    const Poi* best = nullptr;
    double best_d = 0.0;
    for (const Poi* p : food) {
      double d = distance(job, p->position);
      if (!best || d < best_d || (d == best_d && p->id < best->id)) {
        best = p;
        best_d = d;
      }
    }
    return best;
  };

  const int64_t end_epoch = start_epoch + duration;
  const int64_t first_day = start_epoch / kSecondsPerDay;
  const int64_t last_day = (end_epoch - 1) / kSecondsPerDay;

  std::vector<RawEvent> events;
  for (const auto& citizen : citizens) {
    std::mt19937 crng(rng());
    std::uniform_int_distribution<int64_t> morning(sched::kMorningEarliest,
                                                   sched::kMorningLatest);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const int64_t departure = morning(crng);
    const Poi* lunch = lunch_spot(citizen.job);

    std::vector<sched::Leg> legs;
    for (int64_t day = first_day; day <= last_day; ++day) {
      const int64_t midnight = day * kSecondsPerDay;
      const bool lunch_out = coin(crng) < sched::kLunchProbability;
      const bool evening_out = coin(crng) < sched::kEveningOutProbability;
      const bool gym_pick = coin(crng) < 0.5;
      double rec_pick = coin(crng) * recreation_total;
      if (day % 7 <= 4) {
        legs.push_back({midnight + departure, 0, citizen.job});
        if (lunch_out && lunch) {
          legs.push_back({midnight + sched::kLunchDeparture, 0, lunch->position});
          legs.push_back({0, sched::kLunchDwell, citizen.job});
        }
        if (evening_out) {
          legs.push_back({midnight + sched::kEveningDeparture, 0,
                          gym_pick ? citizen.gym : citizen.club});
          legs.push_back({0, sched::kEveningDwell, citizen.home});
        } else {
          legs.push_back({midnight + sched::kEveningDeparture, 0, citizen.home});
        }
      } else if (!recreation.empty()) {
        const Poi* spot = recreation.back();
        for (const Poi* p : recreation) {
          rec_pick -= p->weight;
          if (rec_pick < 0.0) {
            spot = p;
            break;
          }
        }
        legs.push_back({midnight + sched::kWeekendDeparture, 0, spot->position});
        legs.push_back({0, sched::kWeekendDwell, citizen.home});
      }
    }

    Point pos = citizen.home;
    std::optional<std::string> assoc = nearest_ap(pos, aps);
    if (assoc)
      events.push_back({citizen.mac, std::nullopt, assoc, start_epoch});
    int64_t arrival = start_epoch;
    for (const auto& leg : legs) {
      int64_t depart = std::max(leg.sched, arrival + leg.min_dwell);
      if (depart >= end_epoch) break;
      int64_t t = depart;
      while (pos != leg.dest) {
        if (++t >= end_epoch) break;
        double remaining = distance(pos, leg.dest);
        if (remaining <= citizen.speed) {
          pos = leg.dest;
        } else {
          double f = citizen.speed / remaining;
          pos = {pos.x + (leg.dest.x - pos.x) * f,
                 pos.y + (leg.dest.y - pos.y) * f};
        }
        auto now = nearest_ap(pos, aps);
        if (now != assoc) {
          events.push_back({citizen.mac, assoc, now, t});
          assoc = now;
        }
      }
      if (t >= end_epoch) break;
      arrival = t;
    }
  }
  std::sort(events.begin(), events.end(),
            [](const RawEvent& a, const RawEvent& b) {
              return a.ts != b.ts ? a.ts < b.ts : a.mac < b.mac;
            });
  return events;
}

// --- synthetic city ----------------------------------------------------------

// POIs scatter around a few anchor zones, giving the density its commercial
// hot spots. Category mix: 2 employer, 7 food, 3 health, 8 recreation per 20.
inline std::vector<Poi> generate_pois(size_t n, double extent,
                                      std::mt19937& rng) {
  std::uniform_real_distribution<double> anchor_coord(0.2 * extent, 0.8 * extent);
  std::vector<Point> anchors(3);
  for (auto& a : anchors) a = {anchor_coord(rng), anchor_coord(rng)};

  BoundingBox box{0, 0, extent, extent};
  std::uniform_int_distribution<size_t> anchor_pick(0, anchors.size() - 1);
  std::normal_distribution<double> scatter(0.0, 0.08 * extent);
  std::uniform_real_distribution<double> weight(0.5, 5.0);
  static constexpr PoiCategory kMix[20] = {
      PoiCategory::employer, PoiCategory::employer, PoiCategory::food,
      PoiCategory::food,     PoiCategory::food,     PoiCategory::food,
      PoiCategory::food,     PoiCategory::food,     PoiCategory::food,
      PoiCategory::health,   PoiCategory::health,   PoiCategory::health,
      PoiCategory::recreation, PoiCategory::recreation, PoiCategory::recreation,
      PoiCategory::recreation, PoiCategory::recreation, PoiCategory::recreation,
      PoiCategory::recreation, PoiCategory::recreation};

  std::vector<Poi> pois;
  pois.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Poi p;
    char buf[16];
    std::snprintf(buf, sizeof buf, "poi-%04zu", i);
    p.id = buf;
    p.category = kMix[i % 20];
    const Point& a = anchors[anchor_pick(rng)];
    p.position = box.clamp({a.x + scatter(rng), a.y + scatter(rng)});
    p.weight = weight(rng);
    pois.push_back(std::move(p));
  }
  return pois;
}

// APs are deployed where the commercial density is, so coverage clusters and
// overlaps around the busy zones.
inline std::vector<AccessPoint>
generate_aps(size_t n, const std::vector<Poi>& pois, double bandwidth,
             const BoundingBox& box, std::mt19937& rng, double radius) {
  std::vector<AccessPoint> aps;
  aps.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    AccessPoint ap;
    char buf[16];
    std::snprintf(buf, sizeof buf, "ap-%03zu", i);
    ap.bssid = buf;
    ap.position = sample_point(pois, bandwidth, box, rng);
    ap.radius = radius;
    aps.push_back(std::move(ap));
  }
  return aps;
}

} // namespace seer
