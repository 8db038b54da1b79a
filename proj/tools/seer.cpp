#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "seer/disseminate.hpp"
#include "seer/run.hpp"

namespace {

// Line-oriented key = value with [section] headers; sections are purely
// organizational, keys match the run-all flag names ('_' and '-' are
// interchangeable). '#' and ';' start comments.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw seer::IoError("cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  size_t lineno = 0;
  auto trim = [](std::string s) {
    size_t b = s.find_first_not_of(" \t");
    size_t e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find_first_of("#;"); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw seer::ConfigError(path + ":" + std::to_string(lineno) +
                                ": unterminated section header");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw seer::ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    for (char& c : key)
      if (c == '_') c = '-';
    if (key.empty())
      throw seer::ConfigError(path + ":" + std::to_string(lineno) +
                              ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw seer::ConfigError(path + ":" + std::to_string(lineno) +
                              ": duplicate key " + key);
  }
  return kv;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out;
  in >> out;
  if (in.fail() || !in.eof())
    throw seer::ConfigError("config key " + key + ": bad value '" + value + "'");
  return out;
}

void apply_config(seer::RunConfig& cfg,
                  const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "pois") cfg.pois_path = value;
    else if (key == "aps") cfg.aps_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "citizens") cfg.citizens = parse_number<int>(key, value);
    else if (key == "weeks") cfg.weeks = parse_number<int>(key, value);
    else if (key == "seed") cfg.seed = parse_number<uint32_t>(key, value);
    else if (key == "bandwidth") cfg.bandwidth = parse_number<double>(key, value);
    else if (key == "speed-min") cfg.speed_min = parse_number<double>(key, value);
    else if (key == "speed-max") cfg.speed_max = parse_number<double>(key, value);
    else if (key == "key") cfg.master_key_hex = value;
    else if (key == "t-gap") cfg.t_gap = parse_number<int64_t>(key, value);
    else if (key == "orders") cfg.orders = parse_number<int>(key, value);
    else if (key == "batch") cfg.batch = parse_number<int64_t>(key, value);
    else if (key == "top-k") cfg.top_k = parse_number<int>(key, value);
    else if (key == "l-hit") cfg.l_hit_ms = parse_number<double>(key, value);
    else if (key == "l-miss") cfg.l_miss_ms = parse_number<double>(key, value);
    else if (key == "ttl") cfg.ttl = parse_number<int64_t>(key, value);
    else if (key == "capacity") cfg.capacity = parse_number<size_t>(key, value);
    else if (key == "port") cfg.port = parse_number<int>(key, value);
    else throw seer::ConfigError("config: unknown key " + key);
  }
}

int cmd_gen_city(size_t pois_n, size_t aps_n, uint32_t seed, double extent,
                 double bandwidth, double ap_radius,
                 const std::string& out_pois, const std::string& out_aps) {
  std::mt19937 rng(seed);
  auto pois = seer::generate_pois(pois_n, extent, rng);
  seer::BoundingBox box{0, 0, extent, extent};
  auto aps = seer::generate_aps(aps_n, pois, bandwidth, box, rng, ap_radius);
  seer::write_pois(out_pois, pois);
  seer::write_aps(out_aps, aps);
  std::cout << "wrote " << pois.size() << " POIs to " << out_pois << ", "
            << aps.size() << " APs to " << out_aps << "\n";
  return 0;
}

int cmd_simulate(const std::string& pois_path, const std::string& aps_path,
                 int citizens, int days, uint32_t seed, double bandwidth,
                 double speed_min, double speed_max, int64_t start_epoch,
                 const std::string& out) {
  auto pois = seer::load_pois(pois_path);
  auto aps = seer::load_aps(aps_path);
  std::mt19937 rng(seed);
  auto box = seer::derive_box(pois, aps, 2.0 * bandwidth);
  auto people = seer::generate_citizens(static_cast<size_t>(citizens), pois,
                                        bandwidth, box, rng, speed_min,
                                        speed_max);
  auto events = seer::simulate(people, aps, pois, start_epoch,
                               int64_t{days} * seer::kSecondsPerDay, rng);
  seer::write_raw_events(out, events);
  std::cout << "wrote " << events.size() << " raw events to " << out << "\n";
  return 0;
}

int cmd_anonymize(const std::string& in, const std::string& key_hex,
                  const std::string& out) {
  auto key = seer::parse_hex_key(key_hex);
  auto raw = seer::read_raw_events(in);
  auto result = seer::anonymize_stream(raw, key);
  seer::write_events(out, result.events);
  std::cout << "wrote " << result.events.size() << " events to " << out << " ("
            << result.dropped << " dropped)\n";
  return 0;
}

int cmd_analyze(const std::string& in, int64_t t_gap, int orders, int64_t batch,
                const std::string& out) {
  auto events = seer::read_events(in);
  seer::StreamingAnalyzer analyzer({t_gap, orders, batch});
  for (const auto& e : events) analyzer.push(e);
  uint64_t late = analyzer.dropped_late();
  auto model = analyzer.finish();
  seer::persist(model, out);
  std::cout << "wrote model (" << model.total_records() << " transitions, "
            << late << " late events dropped) to " << out << "\n";
  return 0;
}

int cmd_serve(const std::string& snapshot_path, const std::string& host,
              int port, int poll_ms) {
  seer::KnowledgeService service;
  if (std::filesystem::exists(snapshot_path)) {
    try {
      service.load(seer::restore(snapshot_path));
    } catch (const std::exception& ex) {
      std::cerr << "warning: " << snapshot_path << ": " << ex.what()
                << " (serving degraded until a valid snapshot appears)\n";
    }
  } else {
    std::cerr << "warning: " << snapshot_path
              << " does not exist yet (serving degraded)\n";
  }
  service.watch(snapshot_path, std::chrono::milliseconds(poll_ms));
  std::cout << "listening on http://" << host << ":" << port << "\n";
  if (!service.serve(host, port)) {
    std::cerr << "error: cannot bind " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

int cmd_evaluate(const std::string& snapshot_path, const std::string& test_path,
                 const seer::EvalConfig& cfg, const std::string& out) {
  auto model = seer::restore(snapshot_path);
  auto test = seer::read_events(test_path);
  auto metrics = seer::evaluate(model, test, cfg);
  seer::write_metrics(out, metrics);
  std::cout << seer::metrics_to_json(metrics).dump(2) << "\n";
  return 0;
}

int cmd_density(const std::string& pois_path, double bandwidth, double cell,
                const std::string& out) {
  auto pois = seer::load_pois(pois_path);
  auto box = seer::derive_box(pois, {}, 2.0 * bandwidth);
  seer::GridSpec spec;
  spec.origin = {box.min_x, box.min_y};
  spec.cell_size = cell;
  spec.nx = static_cast<size_t>(std::ceil((box.max_x - box.min_x) / cell));
  spec.ny = static_cast<size_t>(std::ceil((box.max_y - box.min_y) / cell));
  auto grid = seer::build_density(pois, bandwidth, spec);
  seer::write_density_csv(out, grid);
  std::cout << "wrote " << grid.nx << "x" << grid.ny << " grid to " << out
            << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seer: knowledge-centric Wi-Fi mobility pipeline"};
  app.require_subcommand(1);

  // gen-city
  auto* gen = app.add_subcommand("gen-city", "Generate synthetic POI/AP files");
  size_t gen_pois = 60, gen_aps = 40;
  uint32_t gen_seed = 1;
  double gen_extent = 10000, gen_bandwidth = 400, gen_radius = 120;
  std::string gen_out_pois = "pois.jsonl", gen_out_aps = "aps.jsonl";
  gen->add_option("--pois", gen_pois, "Number of POIs");
  gen->add_option("--aps", gen_aps, "Number of APs");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--extent", gen_extent, "City side length, meters");
  gen->add_option("--bandwidth", gen_bandwidth, "Density bandwidth, meters");
  gen->add_option("--ap-radius", gen_radius, "AP coverage radius, meters");
  gen->add_option("--out-pois", gen_out_pois, "POI output path");
  gen->add_option("--out-aps", gen_out_aps, "AP output path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate citizen mobility");
  std::string sim_pois, sim_aps, sim_out = "raw_events.jsonl";
  int sim_citizens = 100, sim_days = 7;
  uint32_t sim_seed = 1;
  double sim_bandwidth = 400, sim_speed_min = 1.0, sim_speed_max = 2.0;
  int64_t sim_epoch = 0;
  sim->add_option("--pois", sim_pois, "POI file")->required();
  sim->add_option("--aps", sim_aps, "AP file")->required();
  sim->add_option("--citizens", sim_citizens, "Number of citizens");
  sim->add_option("--days", sim_days, "Days to simulate");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--bandwidth", sim_bandwidth, "Anchor sampling bandwidth");
  sim->add_option("--speed-min", sim_speed_min, "Minimum walking speed, m/s");
  sim->add_option("--speed-max", sim_speed_max, "Maximum walking speed, m/s");
  sim->add_option("--start-epoch", sim_epoch, "Simulation start, epoch seconds");
  sim->add_option("--out", sim_out, "Raw event output path");

  // anonymize
  auto* anon = app.add_subcommand("anonymize", "Replace macs with salted ids");
  std::string anon_in, anon_key, anon_out = "events.jsonl";
  anon->add_option("--in", anon_in, "Raw event file")->required();
  anon->add_option("--key", anon_key, "Master key, hex")->required();
  anon->add_option("--out", anon_out, "Event output path");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Build the mobility model");
  std::string ana_in, ana_out = "model.snapshot";
  int64_t ana_t_gap = 300, ana_batch = 1;
  int ana_orders = 3;
  ana->add_option("--in", ana_in, "Event file")->required();
  ana->add_option("--t-gap", ana_t_gap, "Session gap threshold, seconds");
  ana->add_option("--orders", ana_orders, "Maximum chain order");
  ana->add_option("--batch", ana_batch, "Micro-batch width, seconds");
  ana->add_option("--out", ana_out, "Snapshot output path");

  // serve
  auto* srv = app.add_subcommand("serve", "Serve the model over HTTP");
  std::string srv_snapshot, srv_host = "127.0.0.1";
  int srv_port = 8080, srv_poll = 500;
  srv->add_option("--snapshot", srv_snapshot, "Snapshot path")->required();
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--port", srv_port, "Bind port");
  srv->add_option("--poll-ms", srv_poll, "Snapshot reload poll interval");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score predictions on a test trace");
  std::string ev_snapshot, ev_test, ev_out = "metrics.json";
  seer::EvalConfig ev_cfg;
  ev->add_option("--snapshot", ev_snapshot, "Snapshot path")->required();
  ev->add_option("--test", ev_test, "Test event file")->required();
  ev->add_option("--orders", ev_cfg.orders, "Orders to evaluate, 1..N");
  ev->add_option("--top-k", ev_cfg.top_k, "Pre-allocations per prediction");
  ev->add_option("--t-gap", ev_cfg.t_gap, "Session gap threshold, seconds");
  ev->add_option("--ttl", ev_cfg.ttl, "Pre-allocation lifetime, seconds");
  ev->add_option("--capacity", ev_cfg.capacity, "Per-switch table capacity");
  ev->add_option("--l-hit", ev_cfg.l_hit_ms, "Synthetic hit latency, ms");
  ev->add_option("--l-miss", ev_cfg.l_miss_ms, "Synthetic miss latency, ms");
  ev->add_option("--out", ev_out, "Metrics output path");

  // run-all
  auto* run = app.add_subcommand("run-all", "Full pipeline from one config");
  std::string run_config_path;
  run->add_option("--config", run_config_path, "Config file (key = value)");
  std::optional<std::string> o_pois, o_aps, o_out, o_key;
  std::optional<int> o_citizens, o_weeks, o_orders, o_top_k, o_port;
  std::optional<uint32_t> o_seed;
  std::optional<double> o_bandwidth, o_speed_min, o_speed_max, o_l_hit, o_l_miss;
  std::optional<int64_t> o_t_gap, o_batch, o_ttl;
  std::optional<size_t> o_capacity;
  run->add_option("--pois", o_pois, "POI file");
  run->add_option("--aps", o_aps, "AP file");
  run->add_option("--out", o_out, "Output directory");
  run->add_option("--citizens", o_citizens, "Number of citizens");
  run->add_option("--weeks", o_weeks, "Weeks to simulate (last is holdout)");
  run->add_option("--seed", o_seed, "RNG seed");
  run->add_option("--bandwidth", o_bandwidth, "Anchor sampling bandwidth");
  run->add_option("--speed-min", o_speed_min, "Minimum walking speed, m/s");
  run->add_option("--speed-max", o_speed_max, "Maximum walking speed, m/s");
  run->add_option("--key", o_key, "Master key, hex");
  run->add_option("--t-gap", o_t_gap, "Session gap threshold, seconds");
  run->add_option("--orders", o_orders, "Maximum chain order");
  run->add_option("--batch", o_batch, "Micro-batch width, seconds");
  run->add_option("--top-k", o_top_k, "Pre-allocations per prediction");
  run->add_option("--l-hit", o_l_hit, "Synthetic hit latency, ms");
  run->add_option("--l-miss", o_l_miss, "Synthetic miss latency, ms");
  run->add_option("--ttl", o_ttl, "Pre-allocation lifetime, seconds");
  run->add_option("--capacity", o_capacity, "Per-switch table capacity");
  run->add_option("--port", o_port, "Serve port (config passthrough)");

  // density
  auto* den = app.add_subcommand("density", "Export the POI density grid");
  std::string den_pois, den_out = "density.csv";
  double den_bandwidth = 400, den_cell = 50;
  den->add_option("--pois", den_pois, "POI file")->required();
  den->add_option("--bandwidth", den_bandwidth, "Kernel bandwidth, meters");
  den->add_option("--cell", den_cell, "Grid cell size, meters");
  den->add_option("--out", den_out, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_city(gen_pois, gen_aps, gen_seed, gen_extent,
                          gen_bandwidth, gen_radius, gen_out_pois, gen_out_aps);
    if (sim->parsed())
      return cmd_simulate(sim_pois, sim_aps, sim_citizens, sim_days, sim_seed,
                          sim_bandwidth, sim_speed_min, sim_speed_max,
                          sim_epoch, sim_out);
    if (anon->parsed()) return cmd_anonymize(anon_in, anon_key, anon_out);
    if (ana->parsed())
      return cmd_analyze(ana_in, ana_t_gap, ana_orders, ana_batch, ana_out);
    if (srv->parsed()) return cmd_serve(srv_snapshot, srv_host, srv_port, srv_poll);
    if (ev->parsed()) return cmd_evaluate(ev_snapshot, ev_test, ev_cfg, ev_out);
    if (den->parsed()) return cmd_density(den_pois, den_bandwidth, den_cell, den_out);
    if (run->parsed()) {
      seer::RunConfig cfg;
      if (!run_config_path.empty())
        apply_config(cfg, read_config_file(run_config_path));
      if (o_pois) cfg.pois_path = *o_pois;
      if (o_aps) cfg.aps_path = *o_aps;
      if (o_out) cfg.out_dir = *o_out;
      if (o_citizens) cfg.citizens = *o_citizens;
      if (o_weeks) cfg.weeks = *o_weeks;
      if (o_seed) cfg.seed = *o_seed;
      if (o_bandwidth) cfg.bandwidth = *o_bandwidth;
      if (o_speed_min) cfg.speed_min = *o_speed_min;
      if (o_speed_max) cfg.speed_max = *o_speed_max;
      if (o_key) cfg.master_key_hex = *o_key;
      if (o_t_gap) cfg.t_gap = *o_t_gap;
      if (o_orders) cfg.orders = *o_orders;
      if (o_batch) cfg.batch = *o_batch;
      if (o_top_k) cfg.top_k = *o_top_k;
      if (o_l_hit) cfg.l_hit_ms = *o_l_hit;
      if (o_l_miss) cfg.l_miss_ms = *o_l_miss;
      if (o_ttl) cfg.ttl = *o_ttl;
      if (o_capacity) cfg.capacity = *o_capacity;
      if (o_port) cfg.port = *o_port;
      if (cfg.pois_path.empty() || cfg.aps_path.empty())
        throw seer::ConfigError("run-all needs pois and aps (flag or config)");
      if (!std::filesystem::exists(cfg.pois_path))
        throw seer::ConfigError("pois file does not exist: " + cfg.pois_path);
      if (!std::filesystem::exists(cfg.aps_path))
        throw seer::ConfigError("aps file does not exist: " + cfg.aps_path);
      auto art = seer::run_all(cfg, std::cout);
      seer::print_summary(std::cout, art);
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
