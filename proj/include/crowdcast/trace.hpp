#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crowdcast/rng.hpp"

namespace crowdcast {

using Seconds = std::int64_t;
using NodeId = std::string;
using NodePair = std::pair<NodeId, NodeId>;  // always canonical: first < second

inline NodePair make_pair_canonical(NodeId a, NodeId b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

// One pairwise encounter interval. Pairs are stored lexicographically ordered.
struct ContactEvent {
  NodeId node_a;
  NodeId node_b;
  Seconds start = 0;
  Seconds end = 0;

  NodePair pair() const { return {node_a, node_b}; }
  bool operator==(const ContactEvent&) const = default;
};

inline bool event_order(const ContactEvent& lhs, const ContactEvent& rhs) {
  return std::tie(lhs.start, lhs.node_a, lhs.node_b, lhs.end) <
         std::tie(rhs.start, rhs.node_a, rhs.node_b, rhs.end);
}

// Normalized contact trace: canonical pairs, events sorted by
// (start, node_a, node_b), same-pair intervals merged so they never overlap.
// Immutable after construction; safe to share across concurrent runs.
struct Trace {
  std::vector<ContactEvent> events;
  std::vector<NodeId> nodes;  // sorted, unique

  Seconds epoch = 0;     // min event start (0 when empty)
  Seconds end_time = 0;  // max event end (0 when empty)

  Seconds span() const { return end_time - epoch; }
  bool has_node(const NodeId& n) const {
    return std::binary_search(nodes.begin(), nodes.end(), n);
  }
  bool operator==(const Trace&) const = default;
};

enum class TraceFormat { csv, whitespace };

inline TraceFormat parse_format_tag(const std::string& tag) {
  if (tag == "csv") return TraceFormat::csv;
  if (tag == "ws" || tag == "whitespace" || tag == "crawdad") return TraceFormat::whitespace;
  throw std::runtime_error("unknown trace format tag: " + tag);
}

struct ParseError : std::runtime_error {
  explicit ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline Seconds parse_seconds(std::string_view field, std::size_t line) {
  field = trim(field);
  Seconds value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError(line, "not an integer timestamp: '" + std::string(field) + "'");
  if (value < 0) throw ParseError(line, "negative timestamp");
  return value;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return fields;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

}  // namespace detail

// Sorts, canonicalizes and merges a raw event list into a Trace. Same-pair
// intervals that overlap or touch become their union, so per-pair ICT
// samples are always strictly positive.
inline Trace normalize_events(std::vector<ContactEvent> raw) {
  for (auto& ev : raw) {
    if (ev.node_b < ev.node_a) std::swap(ev.node_a, ev.node_b);
  }
  std::sort(raw.begin(), raw.end(), [](const ContactEvent& l, const ContactEvent& r) {
    return std::tie(l.node_a, l.node_b, l.start, l.end) <
           std::tie(r.node_a, r.node_b, r.start, r.end);
  });

  Trace t;
  t.events.reserve(raw.size());
  for (auto& ev : raw) {
    if (!t.events.empty()) {
      ContactEvent& prev = t.events.back();
      if (prev.node_a == ev.node_a && prev.node_b == ev.node_b && ev.start <= prev.end) {
        prev.end = std::max(prev.end, ev.end);
        continue;
      }
    }
    t.events.push_back(std::move(ev));
  }

  std::sort(t.events.begin(), t.events.end(), event_order);

  for (const auto& ev : t.events) {
    t.nodes.push_back(ev.node_a);
    t.nodes.push_back(ev.node_b);
  }
  std::sort(t.nodes.begin(), t.nodes.end());
  t.nodes.erase(std::unique(t.nodes.begin(), t.nodes.end()), t.nodes.end());

  if (!t.events.empty()) {
    t.epoch = std::min_element(t.events.begin(), t.events.end(),
                               [](const auto& l, const auto& r) { return l.start < r.start; })
                  ->start;
    t.end_time = std::max_element(t.events.begin(), t.events.end(),
                                  [](const auto& l, const auto& r) { return l.end < r.end; })
                     ->end;
  }
  return t;
}

// Parses a contact trace. csv: header `node_a,node_b,start,end`;
// whitespace: bare `node_a node_b start end` rows (CRAWDAD style).
// Empty input yields an empty trace.
inline Trace parse_trace(std::istream& in, TraceFormat format = TraceFormat::csv) {
  std::vector<ContactEvent> raw;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    if (format == TraceFormat::csv && !saw_header) {
      saw_header = true;
      std::string squeezed;
      for (char c : sv)
        if (!std::isspace(static_cast<unsigned char>(c))) squeezed.push_back(c);
      if (squeezed != "node_a,node_b,start,end")
        throw ParseError(line_no, "expected header 'node_a,node_b,start,end'");
      continue;
    }
    const auto fields =
        format == TraceFormat::csv ? detail::split_csv(sv) : detail::split_ws(sv);
    if (fields.size() != 4)
      throw ParseError(line_no, "expected 4 fields, got " + std::to_string(fields.size()));

    ContactEvent ev;
    ev.node_a = std::string(detail::trim(fields[0]));
    ev.node_b = std::string(detail::trim(fields[1]));
    ev.start = detail::parse_seconds(fields[2], line_no);
    ev.end = detail::parse_seconds(fields[3], line_no);
    if (ev.node_a.empty() || ev.node_b.empty()) throw ParseError(line_no, "empty node identifier");
    if (ev.node_a == ev.node_b) throw ParseError(line_no, "self-contact: " + ev.node_a);
    if (ev.start >= ev.end)
      throw ParseError(line_no, "contact start must precede end (" +
                                    std::to_string(ev.start) + " >= " + std::to_string(ev.end) + ")");
    raw.push_back(std::move(ev));
  }
  return normalize_events(std::move(raw));
}

inline Trace parse_trace(const std::string& text, TraceFormat format = TraceFormat::csv) {
  std::istringstream in(text);
  return parse_trace(in, format);
}

inline void serialize_trace(const Trace& t, std::ostream& out) {
  out << "node_a,node_b,start,end\n";
  for (const auto& ev : t.events)
    out << ev.node_a << ',' << ev.node_b << ',' << ev.start << ',' << ev.end << '\n';
}

inline std::string serialize_trace(const Trace& t) {
  std::ostringstream out;
  serialize_trace(t, out);
  return out.str();
}

struct TraceSummary {
  std::size_t node_count = 0;
  std::size_t event_count = 0;
  double duration_days = 0.0;
  std::map<NodePair, std::size_t> pair_contact_counts;
};

inline TraceSummary trace_summary(const Trace& t) {
  TraceSummary s;
  s.node_count = t.nodes.size();
  s.event_count = t.events.size();
  s.duration_days = static_cast<double>(t.span()) / 86400.0;
  for (const auto& ev : t.events) ++s.pair_contact_counts[ev.pair()];
  return s;
}

// k merged contacts of a pair yield k-1 gap samples (next start - prev end).
inline std::vector<Seconds> extract_pair_ict_samples(const Trace& t, const NodePair& pair) {
  std::vector<Seconds> samples;
  Seconds prev_end = -1;
  for (const auto& ev : t.events) {
    if (ev.node_a != pair.first || ev.node_b != pair.second) continue;
    if (prev_end >= 0) samples.push_back(ev.start - prev_end);
    prev_end = ev.end;
  }
  return samples;
}

// Single pass over the whole trace; pairs with fewer than two contacts map
// to empty sample lists and are omitted.
inline std::map<NodePair, std::vector<Seconds>> all_pair_ict_samples(const Trace& t) {
  std::map<NodePair, Seconds> last_end;
  std::map<NodePair, std::vector<Seconds>> samples;
  for (const auto& ev : t.events) {
    const NodePair p = ev.pair();
    auto it = last_end.find(p);
    if (it != last_end.end()) samples[p].push_back(ev.start - it->second);
    last_end[p] = ev.end;
  }
  return samples;
}

enum class Family { exponential, pareto, lognormal };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::exponential: return "exponential";
    case Family::pareto: return "pareto";
    case Family::lognormal: return "lognormal";
  }
  return "?";
}

// Family tag with an optional shape parameter: "exponential", "pareto[:shape]",
// "lognormal[:log_std]". The pair contact rate fixes the mean ICT (1/rate);
// the tag fixes the shape around that mean.
struct FamilySpec {
  Family family = Family::exponential;
  double shape = 0.0;  // pareto shape (>1) or lognormal log-std (>0); unused for exponential

  static FamilySpec parse(const std::string& tag) {
    FamilySpec spec;
    std::string name = tag;
    const auto colon = tag.find(':');
    if (colon != std::string::npos) {
      name = tag.substr(0, colon);
      spec.shape = std::stod(tag.substr(colon + 1));
    }
    if (name == "exponential") {
      spec.family = Family::exponential;
    } else if (name == "pareto") {
      spec.family = Family::pareto;
      if (colon == std::string::npos) spec.shape = 1.5;
      if (spec.shape <= 1.0) throw std::runtime_error("pareto shape must exceed 1 (finite mean)");
    } else if (name == "lognormal") {
      spec.family = Family::lognormal;
      if (colon == std::string::npos) spec.shape = 0.75;
      if (spec.shape <= 0.0) throw std::runtime_error("lognormal log-std must be positive");
    } else {
      throw std::runtime_error("unknown ICT family tag: " + tag);
    }
    return spec;
  }

  std::string to_tag() const {
    if (family == Family::exponential) return "exponential";
    std::ostringstream os;
    os << family_name(family) << ':' << shape;
    return os.str();
  }
};

// Desk-scale stand-in for real encounter datasets: community-structured
// renewal contact processes with configurable per-pair ICT families.
struct SyntheticTraceConfig {
  std::vector<std::size_t> communities;  // node-group sizes
  double intra_rate = 0.0;               // contacts per second per intra-community pair
  double inter_rate = 0.0;
  FamilySpec intra_family;
  FamilySpec inter_family;
  double contact_duration_mean = 60.0;
  double contact_duration_std = 10.0;
  Seconds horizon = 0;
  Seconds membership_switch_period = 0;  // 0 = static communities
  std::uint64_t seed = 1;

  void validate() const {
    if (communities.empty()) throw std::runtime_error("synthetic config: no communities");
    for (auto s : communities)
      if (s < 1) throw std::runtime_error("synthetic config: community size must be >= 1");
    if (intra_rate < 0 || inter_rate < 0) throw std::runtime_error("synthetic config: negative rate");
    if (horizon <= 0) throw std::runtime_error("synthetic config: horizon must be positive");
    if (contact_duration_std < 0) throw std::runtime_error("synthetic config: negative duration std");
    if (contact_duration_mean <= 0)
      throw std::runtime_error("synthetic config: duration mean must be positive");
    if (membership_switch_period < 0)
      throw std::runtime_error("synthetic config: negative switch period");
  }
};

namespace detail {

// ICT draw with mean 1/rate and the configured shape.
inline double draw_ict(Rng& rng, const FamilySpec& spec, double rate) {
  const double mean = 1.0 / rate;
  switch (spec.family) {
    case Family::exponential: return rng.exponential(rate);
    case Family::pareto: {
      const double scale = mean * (spec.shape - 1.0) / spec.shape;
      return rng.pareto(spec.shape, scale);
    }
    case Family::lognormal: {
      const double mu = std::log(mean) - 0.5 * spec.shape * spec.shape;
      return rng.lognormal(mu, spec.shape);
    }
  }
  return 0.0;
}

}  // namespace detail

inline std::string synthetic_node_name(std::size_t index, std::size_t total) {
  std::size_t width = 1;
  for (std::size_t v = total > 0 ? total - 1 : 0; v >= 10; v /= 10) ++width;
  std::string digits = std::to_string(index);
  return "n" + std::string(width - digits.size(), '0') + digits;
}

// Deterministic given the seed: each pair owns an RNG stream derived from
// (seed, i, j). When membership_switch_period > 0, odd-indexed nodes advance
// one community per period while even-indexed nodes anchor, so community
// co-membership (and thus transient clusters) varies over time.
inline Trace generate_synthetic_trace(const SyntheticTraceConfig& cfg) {
  cfg.validate();

  std::vector<std::size_t> base_community;
  for (std::size_t c = 0; c < cfg.communities.size(); ++c)
    for (std::size_t k = 0; k < cfg.communities[c]; ++k) base_community.push_back(c);
  const std::size_t n = base_community.size();
  const std::size_t n_comm = cfg.communities.size();

  const auto community_at = [&](std::size_t node, Seconds t) -> std::size_t {
    if (cfg.membership_switch_period <= 0 || n_comm == 1) return base_community[node];
    if (node % 2 == 0) return base_community[node];
    const auto k = static_cast<std::size_t>(t / cfg.membership_switch_period);
    return (base_community[node] + k) % n_comm;
  };

  std::vector<ContactEvent> raw;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Rng rng(mix_seed(cfg.seed, i, j));
      Seconds t = 0;
      while (t < cfg.horizon) {
        const bool intra = community_at(i, t) == community_at(j, t);
        const double rate = intra ? cfg.intra_rate : cfg.inter_rate;
        if (rate <= 0.0) {
          if (cfg.membership_switch_period <= 0) break;
          t = (t / cfg.membership_switch_period + 1) * cfg.membership_switch_period;
          continue;
        }
        const FamilySpec& spec = intra ? cfg.intra_family : cfg.inter_family;
        const Seconds gap =
            std::max<Seconds>(1, std::llround(detail::draw_ict(rng, spec, rate)));
        const Seconds start = t + gap;
        if (start >= cfg.horizon) break;
        const Seconds duration = std::max<Seconds>(
            1, std::llround(rng.truncated_normal(cfg.contact_duration_mean,
                                                 cfg.contact_duration_std, 1.0)));
        const Seconds end = std::min<Seconds>(start + duration, cfg.horizon);
        raw.push_back(ContactEvent{synthetic_node_name(i, n), synthetic_node_name(j, n),
                                   start, end});
        t = end;
      }
    }
  }

  Trace t = normalize_events(std::move(raw));
  t.nodes.clear();
  for (std::size_t i = 0; i < n; ++i) t.nodes.push_back(synthetic_node_name(i, n));
  std::sort(t.nodes.begin(), t.nodes.end());
  return t;
}

}  // namespace crowdcast
