// crowdcast: trace-driven simulator and analysis CLI for TTL-constrained
// opportunistic forwarding. Subcommands: simulate, clusters, fit-ict,
// gen-trace, metric, report.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crowdcast/clusters.hpp"
#include "crowdcast/community.hpp"
#include "crowdcast/config.hpp"
#include "crowdcast/csv.hpp"
#include "crowdcast/ict.hpp"
#include "crowdcast/log.hpp"
#include "crowdcast/metric.hpp"
#include "crowdcast/router.hpp"
#include "crowdcast/sweep.hpp"
#include "crowdcast/trace.hpp"

namespace {

using namespace crowdcast;

struct TraceArgs {
  std::string path;
  std::string format = "csv";
};

void add_trace_options(CLI::App* cmd, TraceArgs& args) {
  cmd->add_option("--trace", args.path, "contact trace file")->required();
  cmd->add_option("--format", args.format, "trace format: csv | whitespace")
      ->check(CLI::IsMember({"csv", "ws", "whitespace", "crawdad"}));
}

Trace load_trace(const TraceArgs& args) {
  std::ifstream in(args.path);
  if (!in) throw std::runtime_error("cannot open trace file: " + args.path);
  try {
    return parse_trace(in, parse_format_tag(args.format));
  } catch (const ParseError& e) {
    throw std::runtime_error(args.path + ":" + std::to_string(e.line_number) + ": " + e.what());
  }
}

int cmd_simulate(const std::string& config_path) {
  const RunConfig cfg = load_run_config_file(config_path);
  const Trace trace = load_trace_for_run(cfg);
  log_info("trace: ", trace.nodes.size(), " nodes, ", trace.events.size(), " contacts");
  const SweepResult result = run_sweep(cfg, trace);
  std::cout << "wrote " << result.reports.size() << " runs to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_clusters(const TraceArgs& targs, Seconds x, Seconds interval, const std::string& node,
                 const std::string& out_dir) {
  const Trace trace = load_trace(targs);
  ClusterParams params{x};
  const ClusterStats stats = cluster_stats(trace, params, interval, node);

  std::filesystem::create_directories(out_dir);
  {
    auto out = open_output_file(out_dir + "/cluster_samples.csv");
    CsvWriter w(out, {"t", "node", "cluster_size", "two_hop_size"});
    for (const auto& s : stats.samples) {
      w.cell(s.t);
      w.cell(s.node);
      w.cell(static_cast<std::int64_t>(s.cluster_size));
      w.cell(static_cast<std::int64_t>(s.two_hop_size));
      w.end_row();
    }
  }
  {
    auto out = open_output_file(out_dir + "/cluster_summary.csv");
    CsvWriter w(out, {"metric", "value"});
    w.cell("mean_cluster_size").cell(stats.mean_size).end_row();
    w.cell("max_cluster_size").cell(static_cast<std::int64_t>(stats.max_size)).end_row();
    w.cell("mean_two_hop_size").cell(stats.mean_two_hop_size).end_row();
  }
  std::cout << "mean_cluster_size " << format_double(stats.mean_size) << "\n"
            << "max_cluster_size " << stats.max_size << "\n"
            << "mean_two_hop_size " << format_double(stats.mean_two_hop_size) << "\n";
  return 0;
}

int cmd_fit_ict(const TraceArgs& targs, std::size_t min_samples, const std::string& out_path) {
  const Trace trace = load_trace(targs);
  const IctTable table = build_ict_table(trace, min_samples);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file = open_output_file(out_path);
    out = &file;
  }
  CsvWriter w(*out, {"node_a", "node_b", "family", "param1", "param2", "sample_count", "aic_exp",
                     "aic_pareto", "aic_lognormal"});
  for (const auto& [pair, model] : table.models) {
    w.cell(pair.first);
    w.cell(pair.second);
    w.cell(family_name(model.family));
    w.cell(model.param1);
    w.cell(model.param2);
    w.cell(static_cast<std::int64_t>(model.sample_count));
    auto rep = table.reports.find(pair);
    if (rep != table.reports.end()) {
      w.cell(rep->second.aic_exponential);
      w.cell(rep->second.aic_pareto);
      w.cell(rep->second.aic_lognormal);
    } else {  // aggregate fallback: no per-pair fit to report
      w.cell(std::string()).cell(std::string()).cell(std::string());
    }
    w.end_row();
  }
  return 0;
}

int cmd_gen_trace(const std::string& config_path, const std::string& out_path) {
  const SyntheticTraceConfig cfg = load_synthetic_config_file(config_path);
  const Trace trace = generate_synthetic_trace(cfg);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file = open_output_file(out_path);
    out = &file;
  }
  serialize_trace(trace, *out);
  if (!out_path.empty())
    std::cerr << "wrote " << trace.events.size() << " contacts, " << trace.nodes.size()
              << " nodes to " << out_path << "\n";
  return 0;
}

struct MetricArgs {
  TraceArgs trace;
  std::string node;
  std::string dest;
  Seconds t_e = 0;
  Seconds t_v = 0;
  std::optional<Seconds> t_s;
  Seconds x = 3600;
  int quadrature_n = 256;
  std::string combine_rule = "noisy-or";
  int max_relays = 8;
  std::size_t min_ict_samples = kDefaultMinIctSamples;
  std::string out_path;
};

int cmd_metric(const MetricArgs& args) {
  const Trace trace = load_trace(args.trace);
  if (!trace.has_node(args.node)) throw std::runtime_error("unknown node: " + args.node);
  if (!trace.has_node(args.dest)) throw std::runtime_error("unknown node: " + args.dest);

  const ClusterParams params{args.x};
  const IctTable ict = build_ict_table(trace, args.min_ict_samples);
  const DurationTable durations = build_duration_table(trace, params);

  ClusterField clusters(trace, params);
  std::map<NodePair, Seconds> pair_last_end;
  for (const auto& ev : trace.events) {
    if (ev.start > args.t_e) break;
    clusters.observe(ev);
    auto [it, inserted] = pair_last_end.try_emplace(ev.pair(), ev.end);
    if (!inserted) it->second = std::max(it->second, ev.end);
  }

  MetricContext ctx;
  ctx.encounter_time = args.t_e;
  ctx.valid_until = args.t_v;
  ctx.generation_time = args.t_s.value_or(args.t_e);
  ctx.node = args.node;
  ctx.destination = args.dest;
  ctx.cluster = &clusters.state(args.node);
  ctx.cluster_params = &params;
  ctx.ict = &ict;
  ctx.durations = &durations;
  ctx.pair_last_end = &pair_last_end;
  ctx.quad.n = args.quadrature_n;
  ctx.quad.combine_rule = parse_combine_rule(args.combine_rule);
  ctx.quad.max_relays = args.max_relays;
  ctx.quad.validate();

  const MetricResult result = forwarding_metric(ctx);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!args.out_path.empty()) {
    file = open_output_file(args.out_path);
    out = &file;
  }
  CsvWriter w(*out, {"i", "d", "t_e", "t_v", "case", "probability"});
  w.cell(args.node);
  w.cell(args.dest);
  w.cell(args.t_e);
  w.cell(args.t_v);
  w.cell(metric_case_name(result.which));
  w.cell(result.probability);
  w.end_row();
  return 0;
}

int cmd_report(const std::string& reports_path, const std::string& out_path) {
  const std::vector<SimReport> reports = read_reports_csv(reports_path);
  std::vector<std::string> protocols;
  std::vector<Seconds> ttls;
  for (const auto& r : reports) {
    if (std::find(protocols.begin(), protocols.end(), r.protocol) == protocols.end())
      protocols.push_back(r.protocol);
    if (std::find(ttls.begin(), ttls.end(), r.ttl) == ttls.end()) ttls.push_back(r.ttl);
  }
  std::sort(ttls.begin(), ttls.end());
  const auto rows = aggregate_reports(reports, protocols, ttls);
  if (!out_path.empty()) write_aggregate_csv(rows, out_path);
  for (const auto& row : rows) {
    std::cout << row.protocol << " ttl=" << row.ttl
              << " mean_dr=" << format_double(row.mean_delivery_ratio)
              << " median_dr=" << format_double(row.median_delivery_ratio)
              << " mean_overhead=" << format_double(row.mean_overhead)
              << " median_overhead=" << format_double(row.median_overhead) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-driven simulator for TTL-constrained opportunistic forwarding"};
  app.require_subcommand(1);

  std::string sim_config;
  auto* simulate = app.add_subcommand("simulate", "run the configured protocol/TTL/seed sweep");
  simulate->add_option("--config", sim_config, "run config file")->required();

  TraceArgs cluster_trace;
  Seconds cluster_x = 3600, cluster_interval = 600;
  std::string cluster_node, cluster_out = "out";
  auto* clusters = app.add_subcommand("clusters", "transient cluster statistics over a trace");
  add_trace_options(clusters, cluster_trace);
  clusters->add_option("--x", cluster_x, "membership threshold x in seconds");
  clusters->add_option("--interval", cluster_interval, "sampling interval in seconds");
  clusters->add_option("--node", cluster_node, "node whose size series is reported");
  clusters->add_option("--out", cluster_out, "output directory");

  TraceArgs fit_trace;
  std::size_t fit_min_samples = kDefaultMinIctSamples;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit-ict", "fit per-pair inter-contact time distributions");
  add_trace_options(fit, fit_trace);
  fit->add_option("--min-samples", fit_min_samples, "per-pair sample floor before fallback");
  fit->add_option("--out", fit_out, "output CSV (default stdout)");

  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic contact trace");
  gen->add_option("--config", gen_config, "synthetic trace config file")->required();
  gen->add_option("--out", gen_out, "output trace CSV (default stdout)");

  MetricArgs margs;
  auto* metric = app.add_subcommand("metric", "evaluate the forwarding metric at an encounter");
  add_trace_options(metric, margs.trace);
  metric->add_option("--node", margs.node, "evaluated node i")->required();
  metric->add_option("--dest", margs.dest, "destination d")->required();
  metric->add_option("--t-e", margs.t_e, "encounter time")->required();
  metric->add_option("--t-v", margs.t_v, "validity end")->required();
  Seconds metric_t_s = -1;
  metric->add_option("--t-s", metric_t_s, "generation time (default t_e)");
  metric->add_option("--x", margs.x, "membership threshold x in seconds");
  metric->add_option("--quadrature-n", margs.quadrature_n, "Simpson subintervals");
  metric->add_option("--combine-rule", margs.combine_rule, "noisy-or | clamped-sum");
  metric->add_option("--max-relays", margs.max_relays, "relay set truncation");
  metric->add_option("--min-ict-samples", margs.min_ict_samples, "per-pair sample floor");
  metric->add_option("--out", margs.out_path, "output CSV (default stdout)");

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "aggregate a reports.csv from a sweep");
  report->add_option("--reports", report_in, "reports.csv path")->required();
  report->add_option("--out", report_out, "aggregate CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(sim_config);
    if (*clusters)
      return cmd_clusters(cluster_trace, cluster_x, cluster_interval, cluster_node, cluster_out);
    if (*fit) return cmd_fit_ict(fit_trace, fit_min_samples, fit_out);
    if (*gen) return cmd_gen_trace(gen_config, gen_out);
    if (*metric) {
      if (metric_t_s >= 0) margs.t_s = metric_t_s;
      return cmd_metric(margs);
    }
    if (*report) return cmd_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
