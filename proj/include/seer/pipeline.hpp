#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seer/common.hpp"
#include "seer/errors.hpp"
#include "seer/knowlet.hpp"
#include "seer/knowstore.hpp"

namespace seer {

struct Transition {
  std::string from; // bssid or "null"
  std::string to;   // bssid or "null"
  int64_t ts = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Gap-bounded run of one device's transitions: consecutive events are less
// than t_gap apart, timestamps strictly increasing.
struct Session {
  std::string device_id;
  std::vector<Transition> transitions;
  bool closed = false;

  friend bool operator==(const Session&, const Session&) = default;
};

// One training sample for the order-k chain: (order-1) history bssids oldest
// first (START-padded at session starts), then the handover itself.
struct TransitionRecord {
  int order = 1;
  std::vector<std::string> history;
  std::string from;
  std::string to;
  int64_t ts = 0;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

struct PipelineConfig {
  int64_t t_gap = 300;        // session gap threshold, seconds
  int max_order = 3;          // chains of order 1..max_order
  int64_t batch_interval = 1; // micro-batch width, seconds
};

// Batch k holds exactly the events with ts in [k*interval, (k+1)*interval);
// empty batches are emitted up to the batch of the final timestamp. Throws
// OutOfOrderError if an event regresses past the current batch boundary.
inline std::vector<std::vector<HandoverEvent>>
micro_batch(const std::vector<HandoverEvent>& events, int64_t interval) {
  if (interval <= 0) throw ConfigError("batch interval must be positive");
  std::vector<std::vector<HandoverEvent>> batches;
  for (const auto& e : events) {
    auto k = static_cast<size_t>(e.ts / interval);
    if (!batches.empty() && k + 1 < batches.size())
      throw OutOfOrderError("event at t=" + std::to_string(e.ts) +
                            " regresses past batch " +
                            std::to_string(batches.size() - 1));
    if (k >= batches.size()) batches.resize(k + 1);
    batches[k].push_back(e);
  }
  return batches;
}

// Splits one device's time-ordered events into sessions: events less than
// t_gap apart stay together, a gap of t_gap or more starts a new session.
inline std::vector<Session>
sessionize(const std::vector<HandoverEvent>& events, int64_t t_gap) {
  std::vector<Session> sessions;
  for (const auto& e : events) {
    if (sessions.empty() ||
        e.ts - sessions.back().transitions.back().ts >= t_gap) {
      sessions.push_back({e.id, {}, true});
    }
    sessions.back().transitions.push_back({e.from, e.to, e.ts});
  }
  return sessions;
}

// Removes the intermediate events of trivial cases. A leave (X, null)
// immediately followed by a re-join (null, Y) collapses to a single (X, Y)
// transition, or disappears entirely when X = Y. Applied to fixpoint, then
// the leading join and trailing leave are dropped from the modeling view.
inline Session collapse_trivial(const Session& session) {
  Session out = session;
  auto& t = out.transitions;
  for (size_t i = 0; i + 1 < t.size();) {
    if (t[i].to == kNullToken && t[i + 1].from == kNullToken) {
      if (t[i].from == t[i + 1].to) {
        t.erase(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i) + 2);
      } else {
        t[i] = {t[i].from, t[i + 1].to, t[i + 1].ts};
        t.erase(t.begin() + static_cast<long>(i) + 1);
      }
      if (i > 0) --i; // the merge may have created a new adjacent pair
    } else {
      ++i;
    }
  }
  if (!t.empty() && t.front().from == kNullToken) t.erase(t.begin());
  if (!t.empty() && t.back().to == kNullToken) t.pop_back();
  return out;
}

// Drops sessions whose modeling view is empty (join-then-leave without
// returning) and strips the device id from the survivors.
inline std::vector<Session> filter_transient(std::vector<Session> sessions) {
  std::vector<Session> out;
  for (auto& s : sessions) {
    if (s.transitions.empty()) continue;
    s.device_id.clear();
    out.push_back(std::move(s));
  }
  return out;
}

// Expands a collapsed session into its order 1..N variations: for every
// transition and every order, the history of the preceding handovers is
// attached, START-padded where the session has not seen enough of them.
// Emits exactly |transitions| * N records.
inline std::vector<TransitionRecord> expand_orders(const Session& session,
                                                   int max_order) {
  const auto& t = session.transitions;
  std::vector<TransitionRecord> records;
  records.reserve(t.size() * static_cast<size_t>(max_order));
  for (size_t j = 0; j < t.size(); ++j) {
    for (int k = 1; k <= max_order; ++k) {
      TransitionRecord rec;
      rec.order = k;
      rec.history.reserve(static_cast<size_t>(k - 1));
      for (int h = static_cast<int>(j) - k + 1; h < static_cast<int>(j); ++h)
        rec.history.push_back(h < 0 ? kStartToken : t[static_cast<size_t>(h)].from);
      rec.from = t[j].from;
      rec.to = t[j].to;
      rec.ts = t[j].ts;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

// count[order][(history ++ from)][to] += 1 per record. Pure counting, no
// dedup: applying the same records twice doubles the counts.
inline void update_model(MarkovModel& model,
                         const std::vector<TransitionRecord>& records) {
  for (const auto& rec : records) {
    auto& tbl = model.table(rec.order); // throws OrderOutOfRange
    StateKey state = rec.history;
    state.push_back(rec.from);
    tbl[state][rec.to] += 1;
  }
}

namespace detail {

inline void ingest_session(MarkovModel& model, const Session& session,
                           int max_order) {
  Session collapsed = collapse_trivial(session);
  if (collapsed.transitions.empty()) return;
  update_model(model, expand_orders(collapsed, max_order));
}

} // namespace detail

// Single-shot batch run over a full trace: group per device, sessionize,
// collapse, expand, count.
inline MarkovModel build_model_batch(const std::vector<HandoverEvent>& events,
                                     const PipelineConfig& cfg) {
  std::map<std::string, std::vector<HandoverEvent>> per_device;
  for (const auto& e : events) per_device[e.id].push_back(e);
  MarkovModel model(cfg.max_order);
  for (const auto& [id, stream] : per_device)
    for (const auto& session : sessionize(stream, cfg.t_gap))
      detail::ingest_session(model, session, cfg.max_order);
  return model;
}

// Micro-batch streaming ingestion. Events are collected into fixed-width
// batches; a batch is applied as a unit when the stream moves past it. A
// device's open session closes once the watermark (end of the last applied
// batch) exceeds its last event by more than t_gap, at which point the
// session's records are folded into the model. Late events, behind the
// current batch, are dropped and counted.
class StreamingAnalyzer {
public:
  explicit StreamingAnalyzer(PipelineConfig cfg)
      : cfg_(cfg), model_(cfg.max_order) {
    if (cfg.t_gap <= 0 || cfg.max_order < 1 || cfg.batch_interval <= 0)
      throw ConfigError("pipeline config values must be positive");
  }

  void push(const HandoverEvent& e) {
    int64_t k = e.ts / cfg_.batch_interval;
    if (started_ && k < current_batch_) {
      ++dropped_late_;
      return;
    }
    if (!started_) {
      started_ = true;
      current_batch_ = k;
    } else if (k > current_batch_) {
      apply_pending();
      advance_watermark(k * cfg_.batch_interval);
      current_batch_ = k;
    }
    pending_.push_back(e);
  }

  // End of stream: apply the open batch and flush every open session.
  MarkovModel finish() {
    apply_pending();
    for (auto& [id, buf] : open_)
      detail::ingest_session(model_, {id, std::move(buf.transitions), true},
                             cfg_.max_order);
    open_.clear();
    return std::move(model_);
  }

  uint64_t dropped_late() const { return dropped_late_; }

private:
  struct Buffer {
    std::vector<Transition> transitions;
    int64_t last_ts = 0;
  };

  void apply_pending() {
    for (const auto& e : pending_) {
      auto [it, inserted] = open_.try_emplace(e.id);
      auto& buf = it->second;
      if (!inserted && e.ts - buf.last_ts >= cfg_.t_gap) {
        detail::ingest_session(model_, {e.id, std::move(buf.transitions), true},
                               cfg_.max_order);
        buf.transitions.clear();
      }
      buf.transitions.push_back({e.from, e.to, e.ts});
      buf.last_ts = e.ts;
    }
    pending_.clear();
  }

  void advance_watermark(int64_t watermark) {
    for (auto it = open_.begin(); it != open_.end();) {
      if (watermark > it->second.last_ts + cfg_.t_gap) {
        detail::ingest_session(
            model_, {it->first, std::move(it->second.transitions), true},
            cfg_.max_order);
        it = open_.erase(it);
      } else {
        ++it;
      }
    }
  }

  PipelineConfig cfg_;
  MarkovModel model_;
  std::map<std::string, Buffer> open_;
  std::vector<HandoverEvent> pending_;
  int64_t current_batch_ = 0;
  bool started_ = false;
  uint64_t dropped_late_ = 0;
};

// Convenience wrapper: run the full trace through the streaming path.
inline MarkovModel build_model_streaming(const std::vector<HandoverEvent>& events,
                                         const PipelineConfig& cfg) {
  StreamingAnalyzer analyzer(cfg);
  for (const auto& e : events) analyzer.push(e);
  return analyzer.finish();
}

} // namespace seer
