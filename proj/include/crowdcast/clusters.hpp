#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crowdcast/trace.hpp"

namespace crowdcast {

inline constexpr double kDurationStdFloor = 60.0;

struct ClusterParams {
  Seconds x = 3600;  // membership ICT threshold

  void validate() const {
    if (x <= 0) throw std::runtime_error("cluster threshold x must be positive");
  }
};

// A node's time-varying transient cluster. A peer is a member at time t iff
// it has contacted the owner at least once and t - last_contact_end <= x
// (boundary inclusive). Mutated only by the single replay thread.
class TransientClusterState {
 public:
  struct MemberRecord {
    Seconds last_end = 0;
    Seconds episode_enter = 0;  // open episode start (= establishing contact's end)
    std::vector<std::pair<Seconds, Seconds>> closed_episodes;
    std::set<NodeId> snapshot;  // peer's member set at last exchange
    Seconds snapshot_time = 0;
  };

  TransientClusterState() = default;
  explicit TransientClusterState(NodeId owner) : owner_(std::move(owner)) {}

  const NodeId& owner() const { return owner_; }

  bool is_member(const NodeId& m, Seconds t, const ClusterParams& p) const {
    auto it = members_.find(m);
    return it != members_.end() && t - it->second.last_end <= p.x;
  }

  std::set<NodeId> members_at(Seconds t, const ClusterParams& p) const {
    std::set<NodeId> out;
    for (const auto& [id, rec] : members_)
      if (t - rec.last_end <= p.x) out.insert(id);
    return out;
  }

  // Own members plus their last exchanged member sets, owner excluded.
  std::set<NodeId> two_hop_members_at(Seconds t, const ClusterParams& p) const {
    std::set<NodeId> out;
    for (const auto& [id, rec] : members_) {
      if (t - rec.last_end > p.x) continue;
      out.insert(id);
      out.insert(rec.snapshot.begin(), rec.snapshot.end());
    }
    out.erase(owner_);
    return out;
  }

  bool in_two_hop_view(const NodeId& d, Seconds t, const ClusterParams& p) const {
    if (d == owner_) return false;
    if (is_member(d, t, p)) return true;
    for (const auto& [id, rec] : members_)
      if (t - rec.last_end <= p.x && rec.snapshot.count(d)) return true;
    return false;
  }

  std::optional<Seconds> last_contact_end(const NodeId& m) const {
    auto it = members_.find(m);
    if (it == members_.end()) return std::nullopt;
    return it->second.last_end;
  }

  // Start of the membership episode that is open at time t.
  std::optional<Seconds> current_episode_start(const NodeId& m, Seconds t,
                                               const ClusterParams& p) const {
    auto it = members_.find(m);
    if (it == members_.end() || t - it->second.last_end > p.x) return std::nullopt;
    return it->second.episode_enter;
  }

  const std::set<NodeId>* snapshot_of(const NodeId& m) const {
    auto it = members_.find(m);
    return it == members_.end() ? nullptr : &it->second.snapshot;
  }

  const std::map<NodeId, MemberRecord>& records() const { return members_; }

  // Completed episodes; open ones close at last_end + x.
  std::vector<std::pair<Seconds, Seconds>> membership_log(const NodeId& m,
                                                          const ClusterParams& p) const {
    auto it = members_.find(m);
    if (it == members_.end()) return {};
    auto log = it->second.closed_episodes;
    log.emplace_back(it->second.episode_enter, it->second.last_end + p.x);
    return log;
  }

  void record_contact(const NodeId& peer, const ContactEvent& ev, const ClusterParams& p) {
    auto [it, inserted] = members_.try_emplace(peer);
    MemberRecord& rec = it->second;
    if (inserted) {
      rec.last_end = ev.end;
      rec.episode_enter = ev.end;
      return;
    }
    if (ev.start - rec.last_end > p.x) {
      rec.closed_episodes.emplace_back(rec.episode_enter, rec.last_end + p.x);
      rec.episode_enter = ev.end;
    }
    rec.last_end = std::max(rec.last_end, ev.end);
  }

  void store_snapshot(const NodeId& peer, std::set<NodeId> snap, Seconds t) {
    auto it = members_.find(peer);
    if (it == members_.end()) return;
    it->second.snapshot = std::move(snap);
    it->second.snapshot_time = t;
  }

 private:
  NodeId owner_;
  std::map<NodeId, MemberRecord> members_;
};

// Applies one contact to both endpoint states: membership bookkeeping first,
// then the mutual cluster-snapshot exchange, evaluated at the contact start.
inline void observe_contact(TransientClusterState& state_i, TransientClusterState& state_j,
                            const ContactEvent& ev, const ClusterParams& params) {
  const bool straight = state_i.owner() == ev.node_a && state_j.owner() == ev.node_b;
  const bool flipped = state_i.owner() == ev.node_b && state_j.owner() == ev.node_a;
  if (!straight && !flipped)
    throw std::runtime_error("observe_contact: event does not involve both owners");

  state_i.record_contact(state_j.owner(), ev, params);
  state_j.record_contact(state_i.owner(), ev, params);

  const Seconds t = ev.start;
  std::set<NodeId> snap_i = state_i.members_at(t, params);
  std::set<NodeId> snap_j = state_j.members_at(t, params);
  state_i.store_snapshot(state_j.owner(), std::move(snap_j), t);
  state_j.store_snapshot(state_i.owner(), std::move(snap_i), t);
}

// One state per node, fed events in trace order.
class ClusterField {
 public:
  ClusterField(const Trace& trace, ClusterParams params) : params_(params) {
    params_.validate();
    for (const auto& n : trace.nodes) states_.emplace(n, TransientClusterState(n));
  }

  void observe(const ContactEvent& ev) {
    observe_contact(state_mut(ev.node_a), state_mut(ev.node_b), ev, params_);
  }

  const TransientClusterState& state(const NodeId& n) const {
    auto it = states_.find(n);
    if (it == states_.end()) throw std::runtime_error("unknown node: " + n);
    return it->second;
  }

  const ClusterParams& params() const { return params_; }

 private:
  TransientClusterState& state_mut(const NodeId& n) {
    auto it = states_.find(n);
    if (it == states_.end()) it = states_.emplace(n, TransientClusterState(n)).first;
    return it->second;
  }

  ClusterParams params_;
  std::map<NodeId, TransientClusterState> states_;
};

// Maximal intervals during which i and d sit in each other's transient
// cluster: contacts chain while the gap stays within x; each episode runs
// from the establishing contact's end to the last contact's end + x.
inline std::vector<std::pair<Seconds, Seconds>> co_membership_intervals(
    const Trace& trace, const NodeId& i, const NodeId& d, const ClusterParams& params) {
  params.validate();
  const NodePair pair = make_pair_canonical(i, d);
  std::vector<std::pair<Seconds, Seconds>> intervals;
  Seconds enter = 0, last_end = -1;
  for (const auto& ev : trace.events) {
    if (ev.node_a != pair.first || ev.node_b != pair.second) continue;
    if (last_end < 0) {
      enter = ev.end;
    } else if (ev.start - last_end > params.x) {
      intervals.emplace_back(enter, last_end + params.x);
      enter = ev.end;
    }
    last_end = std::max(last_end, ev.end);
  }
  if (last_end >= 0) intervals.emplace_back(enter, last_end + params.x);
  return intervals;
}

// Normal model of co-membership episode duration (f_c).
struct ClusterDurationModel {
  double mean = 0.0;
  double std = 0.0;
  std::size_t sample_count = 0;
};

// n >= 5: per-pair fit. 1 <= n < 5 with a pooled fallback: the fallback.
// Without one the small-sample fit stands. Empty with no fallback: the
// documented default (mean x, std x/4).
inline ClusterDurationModel fit_cluster_duration_model(
    const std::vector<double>& samples, const std::optional<ClusterDurationModel>& fallback,
    const ClusterParams& params, double std_floor = kDurationStdFloor) {
  if (samples.size() < 5 && fallback) return *fallback;
  if (samples.empty()) {
    return ClusterDurationModel{static_cast<double>(params.x),
                                static_cast<double>(params.x) / 4.0, 0};
  }
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  if (samples.size() > 1) {
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(samples.size() - 1);
  }
  return ClusterDurationModel{mean, std::max(std::sqrt(var), std_floor), samples.size()};
}

// Per-pair duration models with a pooled global fallback.
struct DurationTable {
  std::map<NodePair, ClusterDurationModel> per_pair;
  ClusterDurationModel global;

  const ClusterDurationModel& lookup(const NodePair& pair) const {
    auto it = per_pair.find(pair);
    return it == per_pair.end() ? global : it->second;
  }
};

// Episode durations from events starting before cutoff (whole trace when
// cutoff < 0), fitted per pair and pooled.
inline DurationTable build_duration_table(const Trace& trace, const ClusterParams& params,
                                          Seconds cutoff = -1,
                                          double std_floor = kDurationStdFloor) {
  params.validate();
  std::map<NodePair, std::vector<double>> durations;
  std::map<NodePair, std::pair<Seconds, Seconds>> open;  // pair -> (enter, last_end)
  for (const auto& ev : trace.events) {
    if (cutoff >= 0 && ev.start >= cutoff) break;
    const NodePair p = ev.pair();
    auto it = open.find(p);
    if (it == open.end()) {
      open.emplace(p, std::make_pair(ev.end, ev.end));
      continue;
    }
    auto& [enter, last_end] = it->second;
    if (ev.start - last_end > params.x) {
      durations[p].push_back(static_cast<double>(last_end + params.x - enter));
      enter = ev.end;
    }
    last_end = std::max(last_end, ev.end);
  }
  for (const auto& [p, ep] : open)
    durations[p].push_back(static_cast<double>(ep.second + params.x - ep.first));

  std::vector<double> pooled;
  for (const auto& [p, ds] : durations) pooled.insert(pooled.end(), ds.begin(), ds.end());

  DurationTable table;
  table.global = fit_cluster_duration_model(pooled, std::nullopt, params, std_floor);
  for (const auto& [p, ds] : durations)
    table.per_pair[p] = fit_cluster_duration_model(ds, table.global, params, std_floor);
  return table;
}

struct ClusterSample {
  Seconds t = 0;
  NodeId node;
  std::size_t cluster_size = 0;
  std::size_t two_hop_size = 0;
};

struct ClusterStats {
  double mean_size = 0.0;
  std::size_t max_size = 0;
  double mean_two_hop_size = 0.0;
  NodeId designated;
  std::vector<ClusterSample> samples;
  std::vector<std::pair<Seconds, std::size_t>> designated_series;
};

// Replays the trace and samples every node's cluster each interval.
// `designated` picks the node whose size series is reported (defaults to the
// lexicographically smallest).
inline ClusterStats cluster_stats(const Trace& trace, const ClusterParams& params,
                                  Seconds sampling_interval, const NodeId& designated = {}) {
  params.validate();
  if (sampling_interval <= 0) throw std::runtime_error("sampling_interval must be positive");

  ClusterStats stats;
  if (trace.nodes.empty()) return stats;
  stats.designated = designated.empty() ? trace.nodes.front() : designated;
  if (!trace.has_node(stats.designated))
    throw std::runtime_error("designated node not in trace: " + stats.designated);

  ClusterField field(trace, params);
  std::size_t next_event = 0;
  double size_sum = 0.0, two_hop_sum = 0.0;
  std::size_t n_samples = 0;

  for (Seconds t = trace.epoch; t <= trace.end_time; t += sampling_interval) {
    while (next_event < trace.events.size() && trace.events[next_event].start <= t)
      field.observe(trace.events[next_event++]);
    for (const auto& node : trace.nodes) {
      const auto& st = field.state(node);
      const std::size_t size = st.members_at(t, params).size();
      const std::size_t two_hop = st.two_hop_members_at(t, params).size();
      stats.samples.push_back(ClusterSample{t, node, size, two_hop});
      size_sum += static_cast<double>(size);
      two_hop_sum += static_cast<double>(two_hop);
      stats.max_size = std::max(stats.max_size, size);
      ++n_samples;
      if (node == stats.designated) stats.designated_series.emplace_back(t, size);
    }
  }
  if (n_samples > 0) {
    stats.mean_size = size_sum / static_cast<double>(n_samples);
    stats.mean_two_hop_size = two_hop_sum / static_cast<double>(n_samples);
  }
  return stats;
}

}  // namespace crowdcast
