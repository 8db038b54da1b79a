#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "seer/common.hpp"
#include "seer/errors.hpp"
#include "seer/knowstore.hpp"

namespace seer {

struct PredictionQuery {
  std::string ap;
  std::vector<std::string> history; // most recent last
  std::optional<int> order;         // defaults to 1 + |history|
  bool raw = false;                 // include exact counts
};

// Handler outcome before it is put on the wire.
struct HttpReply {
  int status = 200;
  nlohmann::ordered_json body;
};

inline double round6(double p) { return std::round(p * 1e6) / 1e6; }

// Next-AP distribution for the queried state. History shorter than order-1
// is START-padded; history longer than order-1 is a client error. Unseen
// states answer 200 with empty predictions.
inline HttpReply handle_next(const MarkovModel* model,
                             const PredictionQuery& query) {
  if (!model) return {503, {{"error", "model not loaded"}}};
  if (query.ap.empty()) return {400, {{"error", "missing required param: ap"}}};
  const int order = query.order ? *query.order
                                : 1 + static_cast<int>(query.history.size());
  if (order < 1 || order > model->max_order)
    return {400,
            {{"error", "order " + std::to_string(order) + " outside [1, " +
                           std::to_string(model->max_order) + "]"}}};
  if (query.history.size() > static_cast<size_t>(order - 1))
    return {400,
            {{"error", "state arity " +
                           std::to_string(query.history.size() + 1) +
                           " exceeds order " + std::to_string(order)}}};
  StateKey state(static_cast<size_t>(order - 1) - query.history.size(),
                 kStartToken);
  state.insert(state.end(), query.history.begin(), query.history.end());
  state.push_back(query.ap);

  Distribution dist = transition_distribution(*model, order, state);
  HttpReply reply;
  reply.body["order"] = order;
  reply.body["state"] = state;
  auto& predictions = reply.body["predictions"] = nlohmann::ordered_json::array();
  for (const auto& e : dist.entries) {
    nlohmann::ordered_json p;
    p["to"] = e.to;
    p["probability"] = round6(e.probability);
    predictions.push_back(std::move(p));
  }
  reply.body["support"] = dist.support_count;
  if (query.raw) {
    auto& counts = reply.body["counts"] = nlohmann::ordered_json::object();
    for (const auto& e : dist.entries) counts[e.to] = e.count;
  }
  return reply;
}

inline HttpReply handle_meta(const MarkovModel* model) {
  HttpReply reply;
  reply.body["loaded"] = model != nullptr;
  reply.body["max_order"] = model ? model->max_order : 0;
  auto& counts = reply.body["state_counts"] = nlohmann::ordered_json::object();
  if (model)
    for (int k = 1; k <= model->max_order; ++k)
      counts[std::to_string(k)] = model->table(k).size();
  reply.body["total_records"] = model ? model->total_records() : 0;
  reply.body["snapshot_version"] = snapshot::kVersion;
  return reply;
}

inline HttpReply handle_health(const MarkovModel* model) {
  return {200, {{"status", model ? "ok" : "degraded"}}};
}

// Read-only HTTP face of the knowstore. Requests run concurrently against an
// immutable snapshot; a reload swaps the snapshot atomically, so each
// in-flight request keeps the model it started with.
class KnowledgeService {
public:
  KnowledgeService() { register_routes(); }

  ~KnowledgeService() { stop(); }

  void load(MarkovModel model) {
    auto fresh = std::make_shared<const MarkovModel>(std::move(model));
    std::lock_guard lock(mutex_);
    model_ = std::move(fresh);
  }

  std::shared_ptr<const MarkovModel> snapshot() const {
    std::lock_guard lock(mutex_);
    return model_;
  }

  // Polls the snapshot file and swaps the model when it changes. A snapshot
  // that fails to restore (mid-write, corrupt) is skipped and retried.
  void watch(const std::string& path, std::chrono::milliseconds poll) {
    watch_stop_ = false;
    watcher_ = std::thread([this, path, poll] {
      std::filesystem::file_time_type last{};
      while (!watch_stop_) {
        std::error_code ec;
        auto mtime = std::filesystem::last_write_time(path, ec);
        if (!ec && mtime != last) {
          try {
            load(restore(path));
            last = mtime;
          } catch (const std::exception&) {
            // partial or corrupt file; retry on next poll
          }
        }
        std::this_thread::sleep_for(poll);
      }
    });
  }

  bool serve(const std::string& host, int port) {
    return server_.listen(host, port);
  }

  // Binds an ephemeral port and serves on a background thread (tests).
  int serve_async(const std::string& host) {
    int port = server_.bind_to_any_port(host);
    if (port < 0) return port;
    server_thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  void stop() {
    server_.stop();
    if (server_thread_.joinable()) server_thread_.join();
    watch_stop_ = true;
    if (watcher_.joinable()) watcher_.join();
  }

private:
  static std::optional<PredictionQuery> parse_query(const httplib::Request& req,
                                                    std::string& error) {
    PredictionQuery q;
    for (const auto& [key, value] : req.params) {
      if (key == "ap") {
        q.ap = value;
      } else if (key == "history") {
        if (value.empty()) continue;
        size_t start = 0;
        while (true) {
          size_t comma = value.find(',', start);
          q.history.push_back(value.substr(start, comma - start));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
      } else if (key == "order") {
        try {
          size_t used = 0;
          q.order = std::stoi(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
          error = "order must be an integer";
          return std::nullopt;
        }
      } else if (key == "raw") {
        q.raw = value == "1" || value == "true";
      } else {
        error = "unknown param: " + key;
        return std::nullopt;
      }
    }
    return q;
  }

  void register_routes() {
    server_.Get("/knowledge/next",
                [this](const httplib::Request& req, httplib::Response& res) {
                  auto model = snapshot();
                  std::string error;
                  auto query = parse_query(req, error);
                  HttpReply reply = query ? handle_next(model.get(), *query)
                                          : HttpReply{400, {{"error", error}}};
                  res.status = reply.status;
                  res.set_content(reply.body.dump(), "application/json");
                });
    server_.Get("/knowledge/meta",
                [this](const httplib::Request&, httplib::Response& res) {
                  auto model = snapshot();
                  HttpReply reply = handle_meta(model.get());
                  res.status = reply.status;
                  res.set_content(reply.body.dump(), "application/json");
                });
    server_.Get("/healthz",
                [this](const httplib::Request&, httplib::Response& res) {
                  auto model = snapshot();
                  HttpReply reply = handle_health(model.get());
                  res.status = reply.status;
                  res.set_content(reply.body.dump(), "application/json");
                });
  }

  mutable std::mutex mutex_;
  std::shared_ptr<const MarkovModel> model_;
  httplib::Server server_;
  std::thread server_thread_;
  std::thread watcher_;
  std::atomic<bool> watch_stop_ = false;
};

} // namespace seer
