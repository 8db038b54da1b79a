#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seer/common.hpp"
#include "seer/errors.hpp"
#include "seer/knowstore.hpp"
#include "seer/pipeline.hpp"

namespace seer {

// Ranked next-AP prediction. History is the device's recent APs, most recent
// last; it is START-padded (or truncated) to fit the requested order. An
// unseen state falls back to the next lower order before giving up.
inline std::vector<std::string> predict(const MarkovModel& model,
                                        const std::string& current_ap,
                                        const std::vector<std::string>& history,
                                        int order, int top_k) {
  if (order < 1 || order > model.max_order)
    throw OrderOutOfRange("order " + std::to_string(order) + " outside [1, " +
                          std::to_string(model.max_order) + "]");
  const auto need = static_cast<size_t>(order - 1);
  StateKey state;
  if (history.size() >= need) {
    state.assign(history.end() - static_cast<long>(need), history.end());
  } else {
    state.assign(need - history.size(), kStartToken);
    state.insert(state.end(), history.begin(), history.end());
  }
  state.push_back(current_ap);

  Distribution dist = transition_distribution(model, order, state);
  if (dist.entries.empty() && order > 1)
    return predict(model, current_ap, history, order - 1, top_k);
  std::vector<std::string> out;
  for (const auto& e : dist.entries) {
    if (static_cast<int>(out.size()) >= top_k) break;
    out.push_back(e.to);
  }
  return out;
}

// Flow entries pre-installed at the switch behind each AP. Bounded per
// switch; inserting at capacity evicts the oldest entry. Entries go stale
// ttl seconds after insertion.
class SwitchTable {
public:
  SwitchTable(size_t capacity, int64_t ttl) : capacity_(capacity), ttl_(ttl) {}

  void preallocate(const std::vector<std::string>& predicted_aps,
                   const std::string& device, int64_t now) {
    for (const auto& ap : predicted_aps) insert(ap, device, now);
  }

  bool allocated(const std::string& ap, const std::string& device,
                 int64_t now) const {
    auto it = switches_.find(ap);
    if (it == switches_.end()) return false;
    auto e = it->second.find(device);
    return e != it->second.end() && now - e->second < ttl_;
  }

  size_t entries(const std::string& ap) const {
    auto it = switches_.find(ap);
    return it == switches_.end() ? 0 : it->second.size();
  }

private:
  void insert(const std::string& ap, const std::string& device, int64_t now) {
    auto& entries = switches_[ap];
    auto it = entries.find(device);
    if (it != entries.end()) {
      it->second = now; // refresh
      return;
    }
    if (entries.size() >= capacity_) {
      auto oldest = entries.begin();
      for (auto e = entries.begin(); e != entries.end(); ++e)
        if (e->second < oldest->second) oldest = e;
      entries.erase(oldest);
    }
    entries.emplace(device, now);
  }

  size_t capacity_;
  int64_t ttl_;
  std::map<std::string, std::map<std::string, int64_t>> switches_;
};

struct EvalConfig {
  int orders = 3;
  int top_k = 1;
  double l_hit_ms = 5.0;   // synthetic latency proxy, not measured
  double l_miss_ms = 50.0; // synthetic latency proxy, not measured
  int64_t ttl = 300;
  size_t capacity = 256;
  int64_t t_gap = 300;
};

struct EvalMetrics {
  uint64_t hits = 0;
  uint64_t misses = 0;
  uint64_t colds = 0;
  double hit_rate = 0.0;        // hits / (hits + misses)
  double mean_latency_ms = 0.0; // over all evaluated handovers

  uint64_t total() const { return hits + misses + colds; }
};

namespace detail {

struct ReplayStep {
  int64_t ts = 0;
  std::string device;
  uint64_t session = 0; // history resets at session boundaries
  uint64_t seq = 0;
  std::string from;
  std::string to;
};

// The test trace reduced to its modeling view, globally time-ordered.
inline std::vector<ReplayStep>
replay_steps(const std::vector<HandoverEvent>& events, int64_t t_gap) {
  std::map<std::string, std::vector<HandoverEvent>> per_device;
  for (const auto& e : events) per_device[e.id].push_back(e);
  std::vector<ReplayStep> steps;
  uint64_t session_id = 0;
  for (const auto& [id, stream] : per_device) {
    for (const auto& session : sessionize(stream, t_gap)) {
      Session collapsed = collapse_trivial(session);
      ++session_id;
      uint64_t seq = 0;
      for (const auto& t : collapsed.transitions)
        steps.push_back({t.ts, id, session_id, seq++, t.from, t.to});
    }
  }
  std::stable_sort(steps.begin(), steps.end(),
                   [](const ReplayStep& a, const ReplayStep& b) {
                     if (a.ts != b.ts) return a.ts < b.ts;
                     if (a.device != b.device) return a.device < b.device;
                     return a.seq < b.seq;
                   });
  return steps;
}

} // namespace detail

// Replays the test trace once per order. Each observed handover is scored
// against the pre-allocations made after the device's previous handover:
// hit if the target AP's switch holds a live entry for the device, cold if
// the device had no live prediction at all, miss otherwise. Prediction for
// the next hop happens after each handover, so the first transition of a
// session is always cold.
inline std::map<int, EvalMetrics>
evaluate(const MarkovModel& model, const std::vector<HandoverEvent>& test_events,
         const EvalConfig& cfg) {
  if (cfg.orders < 1 || cfg.orders > model.max_order)
    throw ConfigError("orders must be in [1, model max_order]");
  if (cfg.top_k < 1 || cfg.ttl <= 0 || cfg.capacity < 1 || cfg.t_gap <= 0)
    throw ConfigError("top_k, ttl, capacity and t_gap must be positive");

  const auto steps = detail::replay_steps(test_events, cfg.t_gap);

  std::map<int, EvalMetrics> result;
  for (int order = 1; order <= cfg.orders; ++order) {
    EvalMetrics m;
    SwitchTable table(cfg.capacity, cfg.ttl);
    struct DeviceState {
      uint64_t session = 0;
      std::vector<std::string> trail; // APs visited this session
      int64_t last_pred_ts = -1;
      bool predicted = false;
    };
    std::map<std::string, DeviceState> devices;
    for (const auto& step : steps) {
      auto& dev = devices[step.device];
      if (dev.session != step.session) {
        dev.session = step.session;
        dev.trail.clear();
      }
      if (!dev.predicted || step.ts - dev.last_pred_ts >= cfg.ttl)
        ++m.colds;
      else if (table.allocated(step.to, step.device, step.ts))
        ++m.hits;
      else
        ++m.misses;

      if (dev.trail.empty()) dev.trail.push_back(step.from);
      dev.trail.push_back(step.to);
      std::vector<std::string> history(dev.trail.begin(), dev.trail.end() - 1);
      auto predicted = predict(model, dev.trail.back(), history, order, cfg.top_k);
      if (!predicted.empty()) {
        table.preallocate(predicted, step.device, step.ts);
        dev.last_pred_ts = step.ts;
        dev.predicted = true;
      }
    }
    if (m.hits + m.misses > 0)
      m.hit_rate = static_cast<double>(m.hits) /
                   static_cast<double>(m.hits + m.misses);
    if (m.total() > 0)
      m.mean_latency_ms =
          (static_cast<double>(m.hits) * cfg.l_hit_ms +
           static_cast<double>(m.misses + m.colds) * cfg.l_miss_ms) /
          static_cast<double>(m.total());
    result[order] = m;
  }
  return result;
}

inline nlohmann::ordered_json metrics_to_json(const std::map<int, EvalMetrics>& metrics) {
  nlohmann::ordered_json j;
  for (const auto& [order, m] : metrics) {
    nlohmann::ordered_json o;
    o["hits"] = m.hits;
    o["misses"] = m.misses;
    o["colds"] = m.colds;
    o["hit_rate"] = m.hit_rate;
    o["mean_latency_ms"] = m.mean_latency_ms;
    j[std::to_string(order)] = o;
  }
  return j;
}

inline void write_metrics(const std::string& path,
                          const std::map<int, EvalMetrics>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << metrics_to_json(metrics).dump(2) << "\n";
}

} // namespace seer
