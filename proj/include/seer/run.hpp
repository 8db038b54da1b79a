#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "seer/citysim.hpp"
#include "seer/common.hpp"
#include "seer/control.hpp"
#include "seer/errors.hpp"
#include "seer/knowlet.hpp"
#include "seer/knowstore.hpp"
#include "seer/pipeline.hpp"

namespace seer {

struct RunConfig {
  // city
  std::string pois_path;
  std::string aps_path;
  std::string out_dir = "out";
  // simulate
  int citizens = 100;
  int weeks = 2; // last week is held out for evaluation
  uint32_t seed = 1;
  double bandwidth = 400.0;
  double speed_min = 1.0;
  double speed_max = 2.0;
  // anonymize
  std::string master_key_hex = "736565722d64656d6f2d6b6579";
  // analyze
  int64_t t_gap = 300;
  int orders = 3;
  int64_t batch = 1;
  // evaluate
  int top_k = 1;
  double l_hit_ms = 5.0;
  double l_miss_ms = 50.0;
  int64_t ttl = 300;
  size_t capacity = 256;
  // serve
  int port = 8080;
};

struct RunArtifacts {
  std::filesystem::path raw_events;
  std::filesystem::path events;
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path snapshot;
  std::filesystem::path metrics;
  uint64_t raw_count = 0;
  uint64_t event_count = 0;
  uint64_t train_count = 0;
  uint64_t test_count = 0;
  uint64_t dropped_invalid = 0;
  uint64_t dropped_late = 0;
  std::map<int, size_t> state_counts; // per-order model size
  std::map<int, EvalMetrics> eval;
};

// Citizen anchors may fall anywhere POI mass reaches; two bandwidths of
// margin covers the sampling offset's bulk.
inline BoundingBox derive_box(const std::vector<Poi>& pois,
                              const std::vector<AccessPoint>& aps,
                              double margin) {
  if (pois.empty() && aps.empty()) throw EmptyInput("no POIs or APs");
  BoundingBox box{1e300, 1e300, -1e300, -1e300};
  auto grow = [&](const Point& p) {
    box.min_x = std::min(box.min_x, p.x);
    box.min_y = std::min(box.min_y, p.y);
    box.max_x = std::max(box.max_x, p.x);
    box.max_y = std::max(box.max_y, p.y);
  };
  for (const auto& p : pois) grow(p.position);
  for (const auto& a : aps) grow(a.position);
  box.min_x -= margin;
  box.min_y -= margin;
  box.max_x += margin;
  box.max_y += margin;
  return box;
}

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::string(name) + ": " + ex.what());
  }
}

} // namespace detail

// Full pipeline: simulate, anonymize, split off the last week, build the
// model on the rest, evaluate on the holdout. Every artifact lands in
// cfg.out_dir; a fixed seed makes the whole directory reproducible.
inline RunArtifacts run_all(const RunConfig& cfg, std::ostream& log) {
  if (cfg.citizens < 1) throw ConfigError("citizens must be at least 1");
  if (cfg.weeks < 2)
    throw ConfigError("weeks must be at least 2 (last week is the holdout)");
  if (cfg.bandwidth <= 0) throw ConfigError("bandwidth must be positive");
  if (cfg.speed_min <= 0 || cfg.speed_max < cfg.speed_min)
    throw ConfigError("speed range must be positive and ordered");

  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  RunArtifacts art;
  art.raw_events = out / "raw_events.jsonl";
  art.events = out / "events.jsonl";
  art.train = out / "events_train.jsonl";
  art.test = out / "events_test.jsonl";
  art.snapshot = out / "model.snapshot";
  art.metrics = out / "metrics.json";

  auto pois = detail::stage("load-city", [&] { return load_pois(cfg.pois_path); });
  auto aps = detail::stage("load-city", [&] { return load_aps(cfg.aps_path); });
  log << "load-city: " << pois.size() << " POIs, " << aps.size() << " APs\n";

  auto raw = detail::stage("simulate", [&] {
    std::mt19937 rng(cfg.seed);
    auto box = derive_box(pois, aps, 2.0 * cfg.bandwidth);
    auto citizens =
        generate_citizens(static_cast<size_t>(cfg.citizens), pois,
                          cfg.bandwidth, box, rng, cfg.speed_min, cfg.speed_max);
    auto events = simulate(citizens, aps, pois, 0,
                           int64_t{cfg.weeks} * kSecondsPerWeek, rng);
    write_raw_events(art.raw_events.string(), events);
    return events;
  });
  art.raw_count = raw.size();
  log << "simulate: " << cfg.citizens << " citizens, " << cfg.weeks
      << " weeks, " << raw.size() << " raw events\n";

  auto events = detail::stage("anonymize", [&] {
    auto key = parse_hex_key(cfg.master_key_hex);
    auto result = anonymize_stream(raw, key);
    art.dropped_invalid = result.dropped;
    write_events(art.events.string(), result.events);
    return std::move(result.events);
  });
  art.event_count = events.size();
  raw.clear();
  log << "anonymize: " << events.size() << " events, " << art.dropped_invalid
      << " dropped\n";

  const int64_t holdout_start = int64_t{cfg.weeks - 1} * kSecondsPerWeek;
  std::vector<HandoverEvent> train, test;
  for (auto& e : events)
    (e.ts < holdout_start ? train : test).push_back(std::move(e));
  events.clear();
  detail::stage("split", [&] {
    write_events(art.train.string(), train);
    write_events(art.test.string(), test);
    return 0;
  });
  art.train_count = train.size();
  art.test_count = test.size();
  log << "split: " << train.size() << " train, " << test.size()
      << " test (holdout from t=" << holdout_start << ")\n";

  auto model = detail::stage("analyze", [&] {
    StreamingAnalyzer analyzer({cfg.t_gap, cfg.orders, cfg.batch});
    for (const auto& e : train) analyzer.push(e);
    art.dropped_late = analyzer.dropped_late();
    auto m = analyzer.finish();
    persist(m, art.snapshot.string());
    return m;
  });
  for (int k = 1; k <= model.max_order; ++k)
    art.state_counts[k] = model.table(k).size();
  log << "analyze: " << model.total_records() << " transitions, "
      << art.dropped_late << " late\n";

  art.eval = detail::stage("evaluate", [&] {
    EvalConfig ecfg;
    ecfg.orders = cfg.orders;
    ecfg.top_k = cfg.top_k;
    ecfg.l_hit_ms = cfg.l_hit_ms;
    ecfg.l_miss_ms = cfg.l_miss_ms;
    ecfg.ttl = cfg.ttl;
    ecfg.capacity = cfg.capacity;
    ecfg.t_gap = cfg.t_gap;
    auto metrics = evaluate(model, test, ecfg);
    write_metrics(art.metrics.string(), metrics);
    return metrics;
  });
  return art;
}

inline void print_summary(std::ostream& out, const RunArtifacts& art) {
  out << "order  states  hits    misses  colds   hit_rate  latency_ms\n";
  for (const auto& [order, m] : art.eval) {
    size_t states = 0;
    if (auto it = art.state_counts.find(order); it != art.state_counts.end())
      states = it->second;
    out << std::left << std::setw(7) << order << std::setw(8) << states
        << std::setw(8) << m.hits << std::setw(8) << m.misses << std::setw(8)
        << m.colds << std::setw(10) << std::fixed << std::setprecision(4)
        << m.hit_rate << std::setprecision(2) << m.mean_latency_ms << "\n";
  }
  out.unsetf(std::ios::fixed);
}

} // namespace seer
