#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crowdcast/clusters.hpp"
#include "crowdcast/community.hpp"
#include "crowdcast/ict.hpp"
#include "crowdcast/log.hpp"
#include "crowdcast/metric.hpp"
#include "crowdcast/rng.hpp"
#include "crowdcast/trace.hpp"

namespace crowdcast {

struct Message {
  std::uint64_t id = 0;
  NodeId source;
  NodeId destination;
  Seconds t_s = 0;  // generation time
  Seconds t_v = 0;  // valid until (t_s + TTL)
  std::set<NodeId> holders;
  std::optional<Seconds> delivered_at;
  std::uint64_t copies_created = 0;  // replications up to and including first delivery
  std::uint64_t total_copies = 0;    // all replications (no ack purge)

  bool live_at(Seconds t) const { return t_s <= t && t <= t_v && !delivered_at; }
};

// Read-only view of the replay state handed to protocol decisions.
struct NetworkView {
  const ClusterField* clusters = nullptr;
  const std::map<NodePair, Seconds>* pair_last_end = nullptr;
  const IctTable* ict = nullptr;
  const DurationTable* durations = nullptr;
  ClusterParams params;
  QuadratureOptions quad;
};

// A forwarding policy: asked once per live carried message per contact
// direction whether `from` should replicate to `to`. Delivery to the
// destination is the engine's job and bypasses the policy.
class ProtocolDecision {
 public:
  virtual ~ProtocolDecision() = default;
  virtual const std::string& name() const = 0;
  virtual void begin_contact(const ContactEvent&) {}
  virtual bool should_replicate(const NodeId& from, const NodeId& to, const Message& msg,
                                Seconds t, const NetworkView& net) = 0;
};

class EpidemicProtocol final : public ProtocolDecision {
 public:
  const std::string& name() const override {
    static const std::string n = "epidemic";
    return n;
  }
  bool should_replicate(const NodeId&, const NodeId&, const Message&, Seconds,
                        const NetworkView&) override {
    return true;
  }
};

inline std::unique_ptr<ProtocolDecision> epidemic_protocol() {
  return std::make_unique<EpidemicProtocol>();
}

// Replicates iff the peer's forwarding metric strictly exceeds the
// holder's. Metric values are cached per (node, destination, t_v) within a
// contact; the peer is evaluated first so a failed possibility gate skips
// the holder's integral entirely.
class TcdProtocol final : public ProtocolDecision {
 public:
  TcdProtocol() = default;

  const std::string& name() const override {
    static const std::string n = "tcd";
    return n;
  }

  void begin_contact(const ContactEvent&) override { cache_.clear(); }

  bool should_replicate(const NodeId& from, const NodeId& to, const Message& msg, Seconds t,
                        const NetworkView& net) override {
    if (t >= msg.t_v) return false;  // zero remaining window: nothing to gain
    const double peer = metric_of(to, msg, t, net);
    if (peer <= 0.0) return false;
    const double holder = metric_of(from, msg, t, net);
    return peer > holder;
  }

 private:
  double metric_of(const NodeId& n, const Message& msg, Seconds t, const NetworkView& net) {
    const auto key = std::make_tuple(n, msg.destination, msg.t_v);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    MetricContext ctx;
    ctx.encounter_time = t;
    ctx.valid_until = msg.t_v;
    ctx.generation_time = msg.t_s;
    ctx.node = n;
    ctx.destination = msg.destination;
    ctx.cluster = &net.clusters->state(n);
    ctx.cluster_params = &net.params;
    ctx.ict = net.ict;
    ctx.durations = net.durations;
    ctx.pair_last_end = net.pair_last_end;
    ctx.quad = net.quad;
    const double value = forwarding_metric(ctx).probability;
    cache_.emplace(key, value);
    return value;
  }

  std::map<std::tuple<NodeId, NodeId, Seconds>, double> cache_;
};

inline std::unique_ptr<ProtocolDecision> tcd_protocol() { return std::make_unique<TcdProtocol>(); }

// Outside the destination's community: replicate toward it or up the global
// centrality gradient. Inside: climb local centrality among community
// members only.
class BubbleRapProtocol final : public ProtocolDecision {
 public:
  explicit BubbleRapProtocol(BubbleRapState state) : state_(std::move(state)) {}

  const std::string& name() const override {
    static const std::string n = "bubblerap";
    return n;
  }

  bool should_replicate(const NodeId& from, const NodeId& to, const Message& msg, Seconds,
                        const NetworkView&) override {
    const NodeId& d = msg.destination;
    if (state_.shares_community(from, d)) {
      return state_.shares_community(to, d) && state_.local_of(to, d) > state_.local_of(from, d);
    }
    if (state_.shares_community(to, d)) return true;
    return state_.global_of(to) > state_.global_of(from);
  }

 private:
  BubbleRapState state_;
};

inline std::unique_ptr<ProtocolDecision> bubblerap_protocol(BubbleRapState state) {
  return std::make_unique<BubbleRapProtocol>(std::move(state));
}

struct SimConfig {
  ClusterParams params;
  double warmup_fraction = 0.2;
  QuadratureOptions quad;
  std::size_t min_ict_samples = kDefaultMinIctSamples;
  std::uint64_t seed = 0;  // recorded only; the replay itself is deterministic
  Seconds ttl = 0;

  void validate() const {
    params.validate();
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
      throw std::runtime_error("warmup_fraction must be in [0, 1)");
  }
};

struct SimReport {
  std::string protocol;
  std::uint64_t seed = 0;
  Seconds ttl = 0;
  std::size_t generated = 0;
  std::size_t delivered = 0;
  double delivery_ratio = 0.0;
  std::uint64_t overhead = 0;      // sum of copies_created
  std::uint64_t total_copies = 0;  // including post-delivery replication
  std::vector<Message> messages;
};

inline Seconds warmup_cutoff(const Trace& trace, double fraction) {
  return trace.epoch + static_cast<Seconds>(static_cast<double>(trace.span()) * fraction);
}

// Pre-trained, protocol-independent model state; build once per trace and
// share across runs.
struct TrainedModels {
  IctTable ict;
  DurationTable durations;
  Seconds cutoff = 0;
};

inline TrainedModels train_models(const Trace& trace, const SimConfig& cfg) {
  TrainedModels m;
  m.cutoff = warmup_cutoff(trace, cfg.warmup_fraction);
  m.ict = build_ict_table(trace, cfg.min_ict_samples, m.cutoff);
  m.durations = build_duration_table(trace, cfg.params, m.cutoff);
  return m;
}

// Replays the trace once, applying the protocol at every contact start.
// Cluster states update before decisions; both directions of a contact are
// evaluated against the pre-contact holder sets, then all actions apply
// atomically. Deterministic: no randomness beyond the workload itself.
inline SimReport run_simulation(const Trace& trace, ProtocolDecision& protocol,
                                std::vector<Message> workload, const SimConfig& cfg,
                                const TrainedModels& models) {
  cfg.validate();
  for (const auto& msg : workload) {
    if (msg.t_s >= msg.t_v) throw std::runtime_error("workload: message with t_s >= t_v");
    if (msg.t_s < 0 || msg.t_s > trace.end_time)
      throw std::runtime_error("workload: generation time outside trace horizon");
    if (!msg.holders.count(msg.source))
      throw std::runtime_error("workload: source must hold its own message");
  }

  ClusterField clusters(trace, cfg.params);
  std::map<NodePair, Seconds> pair_last_end;

  NetworkView net;
  net.clusters = &clusters;
  net.pair_last_end = &pair_last_end;
  net.ict = &models.ict;
  net.durations = &models.durations;
  net.params = cfg.params;
  net.quad = cfg.quad;

  struct Action {
    std::size_t msg_index;
    NodeId to;
  };

  for (const auto& ev : trace.events) {
    clusters.observe(ev);
    auto [it, inserted] = pair_last_end.try_emplace(ev.pair(), ev.end);
    if (!inserted) it->second = std::max(it->second, ev.end);

    protocol.begin_contact(ev);
    const Seconds t = ev.start;
    std::vector<Action> actions;
    const std::pair<const NodeId*, const NodeId*> directions[2] = {{&ev.node_a, &ev.node_b},
                                                                   {&ev.node_b, &ev.node_a}};
    for (const auto& [from_ptr, to_ptr] : directions) {
      const NodeId& from = *from_ptr;
      const NodeId& to = *to_ptr;
      for (std::size_t m = 0; m < workload.size(); ++m) {
        Message& msg = workload[m];
        if (t < msg.t_s || t > msg.t_v) continue;
        if (!msg.holders.count(from) || msg.holders.count(to)) continue;
        if (to == msg.destination || protocol.should_replicate(from, to, msg, t, net))
          actions.push_back(Action{m, to});
      }
    }
    for (const auto& act : actions) {
      Message& msg = workload[act.msg_index];
      if (msg.holders.count(act.to)) continue;  // both directions may have queued it
      msg.holders.insert(act.to);
      msg.total_copies += 1;
      if (!msg.delivered_at) msg.copies_created += 1;
      if (act.to == msg.destination && !msg.delivered_at) msg.delivered_at = t;
    }
  }

  SimReport report;
  report.protocol = protocol.name();
  report.seed = cfg.seed;
  report.ttl = cfg.ttl;
  report.generated = workload.size();
  for (const auto& msg : workload) {
    if (msg.delivered_at) ++report.delivered;
    report.overhead += msg.copies_created;
    report.total_copies += msg.total_copies;
  }
  report.delivery_ratio = report.generated == 0 ? 0.0
                                                : static_cast<double>(report.delivered) /
                                                      static_cast<double>(report.generated);
  report.messages = std::move(workload);
  return report;
}

// True iff a chronologically ordered contact sequence within [t0, t_v]
// carries src's data to dst. Events are scanned in the replay's canonical
// order, so same-instant chains resolve exactly as the simulator does.
inline bool time_respecting_reachable(const Trace& trace, const NodeId& src, const NodeId& dst,
                                      Seconds t0, Seconds t_v) {
  if (t0 > t_v) throw std::runtime_error("time_respecting_reachable: t0 > t_v");
  if (src == dst) return true;
  std::set<NodeId> reached{src};
  for (const auto& ev : trace.events) {
    if (ev.start < t0) continue;
    if (ev.start > t_v) break;
    const bool has_a = reached.count(ev.node_a) > 0;
    const bool has_b = reached.count(ev.node_b) > 0;
    if (has_a == has_b) continue;
    reached.insert(has_a ? ev.node_b : ev.node_a);
    if (reached.count(dst)) return true;
  }
  return false;
}

// Uniform random (source, destination, t_s) tuples; t_v = t_s + ttl. The
// draw sequence depends only on (trace nodes, n, window, seed), so sweeps
// over TTL reuse identical endpoints and generation times.
inline std::vector<Message> generate_workload(const Trace& trace, std::size_t n_messages,
                                              Seconds ttl, Seconds active_start,
                                              Seconds active_end, std::uint64_t seed) {
  if (trace.nodes.size() < 2) throw std::runtime_error("generate_workload: need >= 2 nodes");
  if (ttl <= 0) throw std::runtime_error("generate_workload: ttl must be positive");
  if (active_start > active_end) throw std::runtime_error("generate_workload: empty window");

  Rng rng(mix_seed(seed, 0x776b6c64, 0x6d736773));
  const std::uint64_t n_nodes = trace.nodes.size();
  const std::uint64_t span = static_cast<std::uint64_t>(active_end - active_start) + 1;

  std::vector<Message> out;
  out.reserve(n_messages);
  for (std::size_t i = 0; i < n_messages; ++i) {
    const auto& src = trace.nodes[rng.uniform_int(n_nodes)];
    NodeId dst = src;
    while (dst == src) dst = trace.nodes[rng.uniform_int(n_nodes)];
    const Seconds t_s = active_start + static_cast<Seconds>(rng.uniform_int(span));
    Message msg;
    msg.id = i;
    msg.source = src;
    msg.destination = dst;
    msg.t_s = t_s;
    msg.t_v = t_s + ttl;
    msg.holders.insert(src);
    out.push_back(std::move(msg));
  }
  return out;
}

}  // namespace crowdcast
