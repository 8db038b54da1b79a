#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seer/errors.hpp"
#include "seer/common.hpp"

namespace seer {

// Non-anonymized handover observation as emitted by the simulator. A missing
// endpoint means the device joined (no from) or left (no to) the Wi-Fi system.
struct RawEvent {
  std::string mac;
  std::optional<std::string> from;
  std::optional<std::string> to;
  int64_t ts = 0;

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

inline bool is_valid(const RawEvent& e) {
  if (!e.from && !e.to) return false;
  if (e.from && e.to && *e.from == *e.to) return false;
  return e.ts >= 0 && !e.mac.empty();
}

inline std::string encode_raw_event(const RawEvent& e) {
  nlohmann::ordered_json j;
  j["mac"] = e.mac;
  j["from"] = e.from ? *e.from : kNullToken;
  j["to"] = e.to ? *e.to : kNullToken;
  j["ts"] = e.ts;
  return j.dump() + "\n";
}

inline RawEvent decode_raw_event(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    throw DecodeError("raw event: " + std::string(ex.what()));
  }
  if (!j.is_object() || !j.contains("mac") || !j.contains("from") ||
      !j.contains("to") || !j.contains("ts") || j.size() != 4 ||
      !j["mac"].is_string() || !j["from"].is_string() || !j["to"].is_string() ||
      !j["ts"].is_number_integer()) {
    throw DecodeError("raw event: expected keys mac/from/to/ts");
  }
  RawEvent e;
  e.mac = j["mac"].get<std::string>();
  if (auto s = j["from"].get<std::string>(); s != kNullToken) e.from = s;
  if (auto s = j["to"].get<std::string>(); s != kNullToken) e.to = s;
  e.ts = j["ts"].get<int64_t>();
  return e;
}

inline void write_raw_events(const std::string& path,
                             const std::vector<RawEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& e : events) out << encode_raw_event(e);
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<RawEvent> read_raw_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<RawEvent> events;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      events.push_back(decode_raw_event(line));
    } catch (const DecodeError& ex) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return events;
}

} // namespace seer
