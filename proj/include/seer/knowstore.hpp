#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <zlib.h>

#include "seer/errors.hpp"

namespace seer {

// A Markov state: (order-1) history bssids oldest first, then the current AP.
using StateKey = std::vector<std::string>;
using DestCounts = std::map<std::string, uint64_t>;

// Per-order transition count tables; the D2 knowlet. Counts are a pure
// summary of observed transitions, so models merge by elementwise addition.
struct MarkovModel {
  int max_order = 3;
  std::vector<std::map<StateKey, DestCounts>> tables; // tables[k-1] is order k

  explicit MarkovModel(int n = 3) : max_order(n), tables(static_cast<size_t>(n)) {}

  std::map<StateKey, DestCounts>& table(int order) {
    if (order < 1 || order > max_order)
      throw OrderOutOfRange("order " + std::to_string(order) +
                            " outside [1, " + std::to_string(max_order) + "]");
    return tables[static_cast<size_t>(order - 1)];
  }
  const std::map<StateKey, DestCounts>& table(int order) const {
    return const_cast<MarkovModel*>(this)->table(order);
  }

  // Number of base transitions ingested (sum of the order-1 table).
  uint64_t total_records() const {
    uint64_t n = 0;
    for (const auto& [state, dests] : tables[0])
      for (const auto& [to, c] : dests) n += c;
    return n;
  }

  friend bool operator==(const MarkovModel&, const MarkovModel&) = default;
};

struct DistributionEntry {
  std::string to;
  double probability = 0.0;
  uint64_t count = 0;
};

// Ranked next-AP distribution for one state. Entries are sorted by
// probability descending, bssid ascending on ties; empty iff state unseen.
struct Distribution {
  StateKey state;
  std::vector<DistributionEntry> entries;
  uint64_t support_count = 0;
};

inline Distribution transition_distribution(const MarkovModel& model,
                                            int order, const StateKey& state) {
  const auto& tbl = model.table(order);
  if (static_cast<int>(state.size()) != order)
    throw StateArityMismatch("state arity " + std::to_string(state.size()) +
                             " != order " + std::to_string(order));
  Distribution dist;
  dist.state = state;
  auto it = tbl.find(state);
  if (it == tbl.end()) return dist; // unseen state: empty, no smoothing
  for (const auto& [to, count] : it->second) {
    dist.support_count += count;
    dist.entries.push_back({to, 0.0, count});
  }
  for (auto& e : dist.entries)
    e.probability = static_cast<double>(e.count) /
                    static_cast<double>(dist.support_count);
  std::stable_sort(dist.entries.begin(), dist.entries.end(),
                   [](const DistributionEntry& a, const DistributionEntry& b) {
                     if (a.count != b.count) return a.count > b.count;
                     return a.to < b.to;
                   });
  return dist;
}

inline MarkovModel merge(const MarkovModel& a, const MarkovModel& b) {
  if (a.max_order != b.max_order)
    throw OrderMismatch("cannot merge models of order " +
                        std::to_string(a.max_order) + " and " +
                        std::to_string(b.max_order));
  MarkovModel out = a;
  for (int k = 1; k <= b.max_order; ++k) {
    auto& dst = out.table(k);
    for (const auto& [state, dests] : b.table(k))
      for (const auto& [to, count] : dests) dst[state][to] += count;
  }
  return out;
}

// --- snapshot format -------------------------------------------------------
//
//   magic "SEERSNAP" | version u8 | max_order u32
//   per order: state_count u64, then per state:
//     order strings (u32 len + bytes), dest_count u32,
//     per dest: u32 len + bytes, count u64
//   crc32 u32 over all preceding bytes
//
// All integers little-endian fixed width.

namespace snapshot {

inline constexpr char kMagic[8] = {'S', 'E', 'E', 'R', 'S', 'N', 'A', 'P'};
inline constexpr uint8_t kVersion = 1;

inline void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

inline void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

inline void put_str(std::string& buf, const std::string& s) {
  put_u32(buf, static_cast<uint32_t>(s.size()));
  buf.append(s);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw CorruptSnapshot("snapshot truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

} // namespace snapshot

inline std::string serialize(const MarkovModel& model) {
  std::string buf;
  buf.append(snapshot::kMagic, sizeof(snapshot::kMagic));
  buf.push_back(static_cast<char>(snapshot::kVersion));
  snapshot::put_u32(buf, static_cast<uint32_t>(model.max_order));
  for (int k = 1; k <= model.max_order; ++k) {
    const auto& tbl = model.table(k);
    snapshot::put_u64(buf, tbl.size());
    for (const auto& [state, dests] : tbl) {
      for (const auto& s : state) snapshot::put_str(buf, s);
      snapshot::put_u32(buf, static_cast<uint32_t>(dests.size()));
      for (const auto& [to, count] : dests) {
        snapshot::put_str(buf, to);
        snapshot::put_u64(buf, count);
      }
    }
  }
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
  snapshot::put_u32(buf, crc);
  return buf;
}

inline MarkovModel deserialize(const std::string& buf) {
  constexpr size_t kHeader = sizeof(snapshot::kMagic) + 1 + 4;
  if (buf.size() < kHeader + 4) throw CorruptSnapshot("snapshot truncated");
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size() - 4)));
  snapshot::Reader tail{buf, buf.size() - 4};
  if (tail.u32() != crc) throw CorruptSnapshot("checksum mismatch");
  if (std::memcmp(buf.data(), snapshot::kMagic, sizeof(snapshot::kMagic)) != 0)
    throw CorruptSnapshot("bad magic");
  snapshot::Reader r{buf, sizeof(snapshot::kMagic)};
  r.need(1);
  auto version = static_cast<uint8_t>(buf[r.pos++]);
  if (version != snapshot::kVersion)
    throw CorruptSnapshot("unsupported snapshot version " +
                          std::to_string(version));
  auto max_order = static_cast<int>(r.u32());
  if (max_order < 1 || max_order > 64)
    throw CorruptSnapshot("implausible max_order");
  MarkovModel model(max_order);
  for (int k = 1; k <= max_order; ++k) {
    uint64_t n_states = r.u64();
    auto& tbl = model.table(k);
    auto hint = tbl.end();
    for (uint64_t i = 0; i < n_states; ++i) {
      StateKey state(static_cast<size_t>(k));
      for (auto& s : state) s = r.str();
      DestCounts dests;
      uint32_t n_dests = r.u32();
      auto dhint = dests.end();
      for (uint32_t j = 0; j < n_dests; ++j) {
        std::string to = r.str();
        uint64_t count = r.u64();
        dhint = dests.emplace_hint(dhint, std::move(to), count);
      }
      hint = tbl.emplace_hint(hint, std::move(state), std::move(dests));
    }
  }
  if (r.pos != buf.size() - 4)
    throw CorruptSnapshot("trailing bytes in snapshot");
  return model;
}

// Writes to a temp file and renames, so a watcher never sees a partial file.
inline void persist(const MarkovModel& model, const std::string& path) {
  std::string bytes = serialize(model);
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename to " + path + " failed: " + ec.message());
}

inline MarkovModel restore(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return deserialize(buf);
}

} // namespace seer
