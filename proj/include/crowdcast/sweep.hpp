#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdcast/config.hpp"
#include "crowdcast/csv.hpp"
#include "crowdcast/log.hpp"
#include "crowdcast/router.hpp"
#include "crowdcast/trace.hpp"

namespace crowdcast {

inline Trace load_trace_for_run(const RunConfig& cfg) {
  if (!cfg.trace.empty()) {
    std::ifstream in(cfg.trace);
    if (!in) throw std::runtime_error("cannot open trace file: " + cfg.trace);
    try {
      return parse_trace(in, cfg.trace_format);
    } catch (const ParseError& e) {
      throw std::runtime_error(cfg.trace + ":" + std::to_string(e.line_number) + ": " + e.what());
    }
  }
  return generate_synthetic_trace(load_synthetic_config_file(cfg.synthetic));
}

namespace detail {

inline std::uint64_t fnv1a64(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_str(std::uint64_t h, const std::string& s) {
  return fnv1a64(h, s.data(), s.size());
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

// Hash over every field that defines the workload; equal across protocols
// within one (seed, TTL) cell by construction, recorded so the fairness
// claim is checkable from the CSVs alone.
inline std::uint64_t workload_hash(const std::vector<Message>& msgs) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& m : msgs) {
    h = detail::fnv1a64(h, &m.id, sizeof(m.id));
    h = detail::fnv1a64_str(h, m.source);
    h = detail::fnv1a64_str(h, m.destination);
    h = detail::fnv1a64(h, &m.t_s, sizeof(m.t_s));
    h = detail::fnv1a64(h, &m.t_v, sizeof(m.t_v));
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

struct AggregateRow {
  std::string protocol;
  Seconds ttl = 0;
  double mean_delivery_ratio = 0.0;
  double median_delivery_ratio = 0.0;
  double mean_overhead = 0.0;
  double median_overhead = 0.0;
};

inline std::vector<AggregateRow> aggregate_reports(const std::vector<SimReport>& reports,
                                                   const std::vector<std::string>& protocol_order,
                                                   const std::vector<Seconds>& ttl_order) {
  std::vector<AggregateRow> rows;
  for (const auto& protocol : protocol_order) {
    for (Seconds ttl : ttl_order) {
      std::vector<double> ratios, overheads;
      for (const auto& r : reports) {
        if (r.protocol != protocol || r.ttl != ttl) continue;
        ratios.push_back(r.delivery_ratio);
        overheads.push_back(static_cast<double>(r.overhead));
      }
      if (ratios.empty()) continue;
      AggregateRow row;
      row.protocol = protocol;
      row.ttl = ttl;
      row.mean_delivery_ratio = detail::mean(ratios);
      row.median_delivery_ratio = detail::median(ratios);
      row.mean_overhead = detail::mean(overheads);
      row.median_overhead = detail::median(overheads);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_reports_csv(const std::vector<SimReport>& reports, const std::string& path) {
  auto out = open_output_file(path);
  CsvWriter w(out, {"protocol", "seed", "ttl_s", "generated", "delivered", "delivery_ratio",
                     "overhead"});
  for (const auto& r : reports) {
    w.cell(r.protocol);
    w.cell(static_cast<std::int64_t>(r.seed));
    w.cell(r.ttl);
    w.cell(static_cast<std::int64_t>(r.generated));
    w.cell(static_cast<std::int64_t>(r.delivered));
    w.cell(r.delivery_ratio);
    w.cell(static_cast<std::int64_t>(r.overhead));
    w.end_row();
  }
}

inline void write_messages_csv(const SimReport& report, const std::string& path) {
  auto out = open_output_file(path);
  CsvWriter w(out, {"msg_id", "src", "dst", "t_s", "t_v", "delivered_at", "copies_created"});
  for (const auto& m : report.messages) {
    w.cell(static_cast<std::int64_t>(m.id));
    w.cell(m.source);
    w.cell(m.destination);
    w.cell(m.t_s);
    w.cell(m.t_v);
    if (m.delivered_at)
      w.cell(*m.delivered_at);
    else
      w.cell(std::string());
    w.cell(static_cast<std::int64_t>(m.copies_created));
    w.end_row();
  }
}

inline void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
  auto out = open_output_file(path);
  CsvWriter w(out, {"protocol", "ttl_s", "mean_delivery_ratio", "median_delivery_ratio",
                     "mean_overhead", "median_overhead"});
  for (const auto& r : rows) {
    w.cell(r.protocol);
    w.cell(r.ttl);
    w.cell(r.mean_delivery_ratio);
    w.cell(r.median_delivery_ratio);
    w.cell(r.mean_overhead);
    w.cell(r.median_overhead);
    w.end_row();
  }
}

// Plot-ready long format: one (protocol, ttl, seed, metric) observation per row.
inline void write_long_csv(const std::vector<SimReport>& reports, const std::string& path) {
  auto out = open_output_file(path);
  CsvWriter w(out, {"protocol", "ttl_s", "seed", "metric", "value"});
  for (const auto& r : reports) {
    w.cell(r.protocol);
    w.cell(r.ttl);
    w.cell(static_cast<std::int64_t>(r.seed));
    w.cell(std::string("delivery_ratio"));
    w.cell(r.delivery_ratio);
    w.end_row();
    w.cell(r.protocol);
    w.cell(r.ttl);
    w.cell(static_cast<std::int64_t>(r.seed));
    w.cell(std::string("overhead"));
    w.cell(static_cast<double>(r.overhead));
    w.end_row();
  }
}

struct SweepResult {
  std::vector<SimReport> reports;
  std::vector<AggregateRow> aggregate;
};

inline std::unique_ptr<ProtocolDecision> make_protocol(const std::string& name,
                                                       const Trace& trace,
                                                       const RunConfig& cfg) {
  if (name == "epidemic") return epidemic_protocol();
  if (name == "tcd") return tcd_protocol();
  if (name == "bubblerap")
    return bubblerap_protocol(
        build_bubblerap_state(trace, cfg.bubble_edge_threshold_s, cfg.bubble_k));
  throw std::runtime_error("unknown protocol: " + name);
}

inline SimConfig sim_config_for(const RunConfig& cfg, std::uint64_t seed, Seconds ttl) {
  SimConfig sc;
  sc.params.x = cfg.x_seconds;
  sc.warmup_fraction = cfg.warmup_fraction;
  sc.quad.n = cfg.quadrature_n;
  sc.quad.combine_rule = cfg.combine_rule;
  sc.quad.max_relays = cfg.max_relays;
  sc.min_ict_samples = cfg.min_ict_samples;
  sc.seed = seed;
  sc.ttl = ttl;
  return sc;
}

/// The workload's active window: explicit config bounds when given, else the
// post-warm-up stretch with the full TTL still inside the trace.
inline std::pair<Seconds, Seconds> workload_window(const Trace& trace, const RunConfig& cfg,
                                                   Seconds ttl) {
  const Seconds cutoff = warmup_cutoff(trace, cfg.warmup_fraction);
  Seconds start = cfg.active_start_s.value_or(cutoff);
  Seconds end = cfg.active_end_s.value_or(std::max(cutoff, trace.end_time - ttl));
  start = std::clamp(start, trace.epoch, trace.end_time);
  end = std::clamp(end, start, trace.end_time);
  return {start, end};
}

// Runs the full (protocol x TTL x seed) grid on one trace. Workloads depend
// on (seed, TTL) only; every protocol in a cell replays the identical
// message set. Writes reports.csv, workloads.csv, aggregate.csv, long.csv
// and per-run message CSVs under out_dir.
inline SweepResult run_sweep(const RunConfig& cfg, const Trace& trace) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  fs::create_directories(cfg.out_dir + "/messages");

  const SimConfig base = sim_config_for(cfg, 0, 0);
  const TrainedModels models = train_models(trace, base);
  log_info("trained models: ", models.ict.models.size(), " pair ICT fits, cutoff ",
           models.cutoff);

  SweepResult result;
  auto workload_out = open_output_file(cfg.out_dir + "/workloads.csv");
  CsvWriter wl(workload_out, {"protocol", "seed", "ttl_s", "workload_hash"});

  for (const auto& protocol_name : cfg.protocols) {
    auto protocol = make_protocol(protocol_name, trace, cfg);
    for (Seconds ttl : cfg.ttl_seconds) {
      const auto [win_start, win_end] = workload_window(trace, cfg, ttl);
      for (std::uint64_t seed : cfg.seeds) {
        auto workload = generate_workload(trace, cfg.messages, ttl, win_start, win_end, seed);
        const std::uint64_t hash = workload_hash(workload);
        wl.cell(protocol_name);
        wl.cell(static_cast<std::int64_t>(seed));
        wl.cell(ttl);
        wl.cell(hash_hex(hash));
        wl.end_row();

        SimConfig sc = sim_config_for(cfg, seed, ttl);
        SimReport report = run_simulation(trace, *protocol, std::move(workload), sc, models);
        log_debug("run ", protocol_name, " seed=", seed, " ttl=", ttl,
                  " delivered=", report.delivered, "/", report.generated,
                  " overhead=", report.overhead);

        std::ostringstream name;
        name << cfg.out_dir << "/messages/" << protocol_name << "_seed" << seed << "_ttl" << ttl
             << ".csv";
        write_messages_csv(report, name.str());
        result.reports.push_back(std::move(report));
      }
    }
  }

  write_reports_csv(result.reports, cfg.out_dir + "/reports.csv");
  result.aggregate = aggregate_reports(result.reports, cfg.protocols, cfg.ttl_seconds);
  write_aggregate_csv(result.aggregate, cfg.out_dir + "/aggregate.csv");
  write_long_csv(result.reports, cfg.out_dir + "/long.csv");
  return result;
}

// Reads a reports.csv produced by run_sweep back into memory (for the
// `report` subcommand and post-hoc aggregation).
inline std::vector<SimReport> read_reports_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reports file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (line != "protocol,seed,ttl_s,generated,delivered,delivery_ratio,overhead")
    throw std::runtime_error(path + ": unexpected header: " + line);

  std::vector<SimReport> reports;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::istringstream is(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw ParseError(line_no, "expected 7 fields, got " + std::to_string(fields.size()));
    SimReport r;
    r.protocol = fields[0];
    r.seed = std::stoull(fields[1]);
    r.ttl = std::stoll(fields[2]);
    r.generated = std::stoull(fields[3]);
    r.delivered = std::stoull(fields[4]);
    r.delivery_ratio = std::stod(fields[5]);
    r.overhead = std::stoull(fields[6]);
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace crowdcast
