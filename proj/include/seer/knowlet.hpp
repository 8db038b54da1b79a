#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/params.h>

#include "seer/common.hpp"
#include "seer/errors.hpp"
#include "seer/raw_event.hpp"

namespace seer {

// The anonymized handover event (D1 knowlet): a 4-tuple of string values.
// "null" endpoints mark devices joining or leaving the Wi-Fi system.
struct HandoverEvent {
  std::string id;   // 32 lowercase hex chars
  std::string from; // bssid or "null"
  std::string to;   // bssid or "null"
  int64_t ts = 0;

  friend bool operator==(const HandoverEvent&, const HandoverEvent&) = default;
};

inline bool is_valid(const HandoverEvent& e) {
  if (e.from == kNullToken && e.to == kNullToken) return false;
  if (e.from == e.to) return false;
  return e.ts >= 0 && !e.id.empty() && !e.from.empty() && !e.to.empty();
}

// Per-day key material derived from the master key. Rotating the salt every
// simulation day unlinks a device's ids across days.
struct Salt {
  int day_index = 0;
  std::array<uint8_t, 32> key_material{};
};

namespace detail {

inline std::array<uint8_t, 32> hmac_sha256(std::span<const uint8_t> key,
                                           std::span<const uint8_t> msg) {
  static EVP_MAC* mac = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_new(mac);
  if (!ctx) throw std::runtime_error("EVP_MAC_CTX_new failed");
  char digest[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest, 0),
      OSSL_PARAM_construct_end()};
  std::array<uint8_t, 32> out{};
  size_t out_len = 0;
  int ok = EVP_MAC_init(ctx, key.data(), key.size(), params) &&
           EVP_MAC_update(ctx, msg.data(), msg.size()) &&
           EVP_MAC_final(ctx, out.data(), &out_len, out.size());
  EVP_MAC_CTX_free(ctx);
  if (!ok || out_len != out.size())
    throw std::runtime_error("HMAC-SHA256 computation failed");
  return out;
}

inline std::string to_hex(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0x0f]);
  }
  return s;
}

} // namespace detail

// key_material = HMAC-SHA256(master_key, day_index as 8-byte big-endian).
inline Salt salt_for_day(std::span<const uint8_t> master_key, int day_index) {
  if (master_key.empty()) throw EmptyKey("master key must not be empty");
  std::array<uint8_t, 8> msg{};
  auto day = static_cast<uint64_t>(day_index);
  for (int i = 0; i < 8; ++i)
    msg[i] = static_cast<uint8_t>(day >> (56 - 8 * i));
  return Salt{day_index, detail::hmac_sha256(master_key, msg)};
}

// id = HMAC-SHA256(salt, mac) truncated to 128 bits of lowercase hex.
inline std::string anonymize(const std::string& mac, const Salt& salt) {
  auto digest = detail::hmac_sha256(
      salt.key_material,
      {reinterpret_cast<const uint8_t*>(mac.data()), mac.size()});
  return detail::to_hex(std::span(digest).first(16));
}

struct AnonymizeResult {
  std::vector<HandoverEvent> events;
  uint64_t dropped = 0; // malformed raw events rejected
};

// Replaces each mac with its salted id. The salt is chosen by the event's
// simulation day, so the same device gets a fresh id every 24h.
inline AnonymizeResult anonymize_stream(const std::vector<RawEvent>& raw,
                                        std::span<const uint8_t> master_key) {
  AnonymizeResult result;
  result.events.reserve(raw.size());
  std::map<int, Salt> salts;
  for (const auto& r : raw) {
    if (!is_valid(r)) {
      ++result.dropped;
      continue;
    }
    int day = day_index(r.ts);
    auto it = salts.find(day);
    if (it == salts.end())
      it = salts.emplace(day, salt_for_day(master_key, day)).first;
    HandoverEvent e;
    e.id = anonymize(r.mac, it->second);
    e.from = r.from ? *r.from : kNullToken;
    e.to = r.to ? *r.to : kNullToken;
    e.ts = r.ts;
    result.events.push_back(std::move(e));
  }
  return result;
}

// Wire format: one event per line, keys id/from/to/ts in that order, compact
// JSON, LF terminator. "null" stays a literal string, never JSON null.
inline std::string encode_event(const HandoverEvent& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["from"] = e.from;
  j["to"] = e.to;
  j["ts"] = e.ts;
  return j.dump() + "\n";
}

inline HandoverEvent decode_event(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    // ex.what() carries the byte offset of the failure
    throw DecodeError(ex.what());
  }
  if (!j.is_object() || j.size() != 4 || !j.contains("id") ||
      !j.contains("from") || !j.contains("to") || !j.contains("ts") ||
      !j["id"].is_string() || !j["from"].is_string() || !j["to"].is_string() ||
      !j["ts"].is_number_integer()) {
    throw DecodeError("event at byte 0: expected keys id/from/to/ts");
  }
  HandoverEvent e;
  e.id = j["id"].get<std::string>();
  e.from = j["from"].get<std::string>();
  e.to = j["to"].get<std::string>();
  e.ts = j["ts"].get<int64_t>();
  if (!is_valid(e)) throw DecodeError("event at byte 0: invariant violation");
  return e;
}

inline void write_events(const std::string& path,
                         const std::vector<HandoverEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& e : events) out << encode_event(e);
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<HandoverEvent> read_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<HandoverEvent> events;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      events.push_back(decode_event(line));
    } catch (const DecodeError& ex) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return events;
}

// Hex-encoded master key from the CLI / config surface.
inline std::vector<uint8_t> parse_hex_key(const std::string& hex) {
  if (hex.empty() || hex.size() % 2 != 0)
    throw FormatError("master key must be non-empty even-length hex");
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw FormatError("master key contains non-hex character");
  };
  std::vector<uint8_t> key(hex.size() / 2);
  for (size_t i = 0; i < key.size(); ++i)
    key[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return key;
}

} // namespace seer
