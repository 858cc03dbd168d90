#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdcast/community.hpp"
#include "crowdcast/ict.hpp"
#include "crowdcast/metric.hpp"
#include "crowdcast/trace.hpp"

namespace crowdcast {

// Flat `key = value` lines, `#` starts a comment, blank lines ignored.
// Duplicate keys are an error (silent override hides config mistakes).
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line_no, "expected key = value");
    const std::string key(detail::trim(trimmed.substr(0, eq)));
    const std::string value(detail::trim(trimmed.substr(eq + 1)));
    if (key.empty()) throw ParseError(line_no, "empty key");
    if (!out.emplace(key, value).second) throw ParseError(line_no, "duplicate key: " + key);
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    const std::string_view t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// Typed accessors over a parsed key map that track which keys were used so
// typos surface as "unknown key" errors.
class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  std::optional<std::string> get(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& def) {
    return get(key).value_or(def);
  }

  template <typename T>
  T get_num(const std::string& key, T def) {
    auto v = get(key);
    if (!v) return def;
    std::istringstream is(*v);
    T out;
    if (!(is >> out) || !(is >> std::ws).eof())
      throw std::runtime_error("config: bad value for " + key + ": " + *v);
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : kv_)
      if (!used_.count(key)) throw std::runtime_error("config: unknown key: " + key);
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

}  // namespace detail

// One experiment: trace source, cluster threshold, protocol list, TTL sweep,
// workload size, seed batch, and numerics.
struct RunConfig {
  std::string trace;  // contact trace path; empty when synthetic
  TraceFormat trace_format = TraceFormat::csv;
  std::string synthetic;  // synthetic generator config path; empty when trace
  Seconds x_seconds = 3600;
  std::vector<std::string> protocols{"epidemic", "tcd", "bubblerap"};
  std::vector<Seconds> ttl_seconds;
  std::size_t messages = 50;
  std::vector<std::uint64_t> seeds{1};
  double warmup_fraction = 0.2;
  CombineRule combine_rule = CombineRule::noisy_or;
  int quadrature_n = 256;
  std::string out_dir = "out";

  // extensions beyond the pinned keys
  int max_relays = 8;
  std::size_t min_ict_samples = kDefaultMinIctSamples;
  int bubble_k = kDefaultCliqueK;
  Seconds bubble_edge_threshold_s = kDefaultEdgeThreshold;
  std::optional<Seconds> active_start_s;
  std::optional<Seconds> active_end_s;

  void validate() const {
    if (trace.empty() == synthetic.empty())
      throw std::runtime_error("config: exactly one of `trace` or `synthetic` is required");
    if (x_seconds <= 0) throw std::runtime_error("config: x_seconds must be positive");
    if (protocols.empty()) throw std::runtime_error("config: protocols must be non-empty");
    for (const auto& p : protocols)
      if (p != "epidemic" && p != "tcd" && p != "bubblerap")
        throw std::runtime_error("config: unknown protocol: " + p);
    if (ttl_seconds.empty()) throw std::runtime_error("config: ttl_seconds must be non-empty");
    for (auto t : ttl_seconds)
      if (t <= 0) throw std::runtime_error("config: TTL values must be positive");
    if (messages == 0) throw std::runtime_error("config: messages must be positive");
    if (seeds.empty()) throw std::runtime_error("config: seeds must be non-empty");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
      throw std::runtime_error("config: warmup_fraction must be in [0, 1)");
    if (quadrature_n < 16) throw std::runtime_error("config: quadrature_n must be >= 16");
    if (max_relays < 1) throw std::runtime_error("config: max_relays must be >= 1");
    if (out_dir.empty()) throw std::runtime_error("config: out_dir must be non-empty");
  }
};

inline RunConfig load_run_config(std::istream& in) {
  detail::ConfigReader r(parse_key_values(in));
  RunConfig cfg;
  cfg.trace = r.get_or("trace", "");
  if (auto v = r.get("trace_format")) cfg.trace_format = parse_format_tag(*v);
  cfg.synthetic = r.get_or("synthetic", "");
  cfg.x_seconds = r.get_num<Seconds>("x_seconds", cfg.x_seconds);
  if (auto v = r.get("protocols")) cfg.protocols = detail::split_list(*v);
  if (auto v = r.get("ttl_seconds")) {
    cfg.ttl_seconds.clear();
    for (const auto& item : detail::split_list(*v))
      cfg.ttl_seconds.push_back(detail::parse_seconds(item, 0));
  }
  cfg.messages = r.get_num<std::size_t>("messages", cfg.messages);
  if (auto v = r.get("seeds")) {
    cfg.seeds.clear();
    for (const auto& item : detail::split_list(*v)) {
      std::istringstream is(item);
      std::uint64_t s = 0;
      if (!(is >> s) || !(is >> std::ws).eof())
        throw std::runtime_error("config: bad seed: " + item);
      cfg.seeds.push_back(s);
    }
  }
  cfg.warmup_fraction = r.get_num<double>("warmup_fraction", cfg.warmup_fraction);
  if (auto v = r.get("combine_rule")) cfg.combine_rule = parse_combine_rule(*v);
  cfg.quadrature_n = r.get_num<int>("quadrature_n", cfg.quadrature_n);
  cfg.out_dir = r.get_or("out_dir", cfg.out_dir);
  cfg.max_relays = r.get_num<int>("max_relays", cfg.max_relays);
  cfg.min_ict_samples = r.get_num<std::size_t>("min_ict_samples", cfg.min_ict_samples);
  cfg.bubble_k = r.get_num<int>("bubble_k", cfg.bubble_k);
  cfg.bubble_edge_threshold_s =
      r.get_num<Seconds>("bubble_edge_threshold_s", cfg.bubble_edge_threshold_s);
  if (auto v = r.get("active_start_s")) cfg.active_start_s = detail::parse_seconds(*v, 0);
  if (auto v = r.get("active_end_s")) cfg.active_end_s = detail::parse_seconds(*v, 0);
  r.finish();
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  try {
    return load_run_config(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ":" + std::to_string(e.line_number) + ": " + e.what());
  }
}

inline SyntheticTraceConfig load_synthetic_config(std::istream& in) {
  detail::ConfigReader r(parse_key_values(in));
  SyntheticTraceConfig cfg;
  if (auto v = r.get("communities")) {
    for (const auto& item : detail::split_list(*v)) {
      std::istringstream is(item);
      std::size_t s = 0;
      if (!(is >> s) || !(is >> std::ws).eof())
        throw std::runtime_error("synthetic config: bad community size: " + item);
      cfg.communities.push_back(s);
    }
  }
  cfg.intra_rate = r.get_num<double>("intra_rate", cfg.intra_rate);
  cfg.inter_rate = r.get_num<double>("inter_rate", cfg.inter_rate);
  if (auto v = r.get("intra_family")) cfg.intra_family = FamilySpec::parse(*v);
  if (auto v = r.get("inter_family")) cfg.inter_family = FamilySpec::parse(*v);
  cfg.contact_duration_mean = r.get_num<double>("contact_duration_mean", cfg.contact_duration_mean);
  cfg.contact_duration_std = r.get_num<double>("contact_duration_std", cfg.contact_duration_std);
  cfg.horizon = r.get_num<Seconds>("horizon", cfg.horizon);
  cfg.membership_switch_period =
      r.get_num<Seconds>("membership_switch_period", cfg.membership_switch_period);
  cfg.seed = r.get_num<std::uint64_t>("seed", cfg.seed);
  r.finish();
  cfg.validate();
  return cfg;
}

inline SyntheticTraceConfig load_synthetic_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synthetic config file: " + path);
  try {
    return load_synthetic_config(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ":" + std::to_string(e.line_number) + ": " + e.what());
  }
}

}  // namespace crowdcast
