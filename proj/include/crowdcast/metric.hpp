#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdcast/clusters.hpp"
#include "crowdcast/ict.hpp"
#include "crowdcast/trace.hpp"

namespace crowdcast {

enum class CombineRule { noisy_or, clamped_sum };

inline CombineRule parse_combine_rule(const std::string& s) {
  if (s == "noisy-or" || s == "noisy_or") return CombineRule::noisy_or;
  if (s == "clamped-sum" || s == "clamped_sum") return CombineRule::clamped_sum;
  throw std::runtime_error("unknown combine rule: " + s);
}

struct QuadratureOptions {
  int n = 256;  // Simpson subintervals
  CombineRule combine_rule = CombineRule::noisy_or;
  int max_relays = 8;

  void validate() const {
    if (n < 16) throw std::runtime_error("quadrature n must be >= 16");
    if (max_relays < 1) throw std::runtime_error("max_relays must be >= 1");
  }
};

// Composite Simpson on n subintervals (rounded up to even).
template <typename F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opts) {
  if (a > b) throw std::runtime_error("integrate: a > b");
  if (a == b) return 0.0;
  int n = opts.n;
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int k = 1; k < n; ++k) sum += f(a + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double normal_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * 3.14159265358979323846));
}

inline double normal_survival(double x, double mean, double std) {
  return 0.5 * std::erfc((x - mean) / (std * std::sqrt(2.0)));
}

// Probability that at least one relay path succeeds (noisy-or) or the
// literal clamped sum.
inline double combine_relays(const std::vector<double>& probs, CombineRule rule) {
  if (rule == CombineRule::noisy_or) {
    double q = 1.0;
    for (double p : probs) q *= 1.0 - std::clamp(p, 0.0, 1.0);
    return 1.0 - q;
  }
  double s = 0.0;
  for (double p : probs) s += std::clamp(p, 0.0, 1.0);
  return std::min(1.0, s);
}

// Everything a metric evaluation needs at one encounter: who evaluates, the
// destination, the data's window, the evaluator's cluster state and the
// fitted models. `pair_last_end` carries the replay's last-contact
// bookkeeping for residual conditioning. Pure with respect to all pointees.
struct MetricContext {
  Seconds encounter_time = 0;   // t_e
  Seconds valid_until = 0;      // t_v
  Seconds generation_time = 0;  // t_s
  NodeId node;                  // i, the node being evaluated
  NodeId destination;           // d

  const TransientClusterState* cluster = nullptr;
  const ClusterParams* cluster_params = nullptr;
  const IctTable* ict = nullptr;
  const DurationTable* durations = nullptr;
  const std::map<NodePair, Seconds>* pair_last_end = nullptr;
  QuadratureOptions quad;

  void validate() const {
    if (!(generation_time <= encounter_time && encounter_time < valid_until))
      throw std::runtime_error("metric context: need t_s <= t_e < t_v");
    if (!cluster || !cluster_params || !ict || !durations)
      throw std::runtime_error("metric context: missing state");
  }
};

namespace detail {

// A pair's residual distribution resolved at evaluation time t1.
struct Leg {
  const IctModel* model = nullptr;
  double elapsed = 0.0;
  bool overdue = false;

  explicit operator bool() const { return model != nullptr; }
};

inline Leg resolve_leg(const MetricContext& ctx, const NodeId& from, const NodeId& to,
                       Seconds t1) {
  Leg leg;
  const NodePair pair = make_pair_canonical(from, to);
  leg.model = ctx.ict->lookup(pair);
  if (!leg.model) return leg;
  if (ctx.pair_last_end) {
    auto it = ctx.pair_last_end->find(pair);
    if (it != ctx.pair_last_end->end())
      leg.elapsed = std::max<double>(0.0, static_cast<double>(t1 - it->second));
  }
  leg.overdue = ict_overdue(*leg.model, leg.elapsed);
  return leg;
}

inline double leg_window_prob(const Leg& leg, double window) {
  if (!leg.model || window <= 0.0) return 0.0;
  if (leg.overdue) return 1.0;
  return residual_window_prob(*leg.model, leg.elapsed, window);
}

// P(i meets j at some t0, then j meets d within what remains), both legs as
// residual distributions conditioned at t1; the j-d leg re-conditions on not
// having met by t0. An overdue i-j leg hands off immediately.
inline double relay_window_prob(const Leg& ij, const Leg& jd, Seconds t1, double window,
                                const QuadratureOptions& opts) {
  if (!ij || !jd || window <= 0.0) return 0.0;
  if (ij.overdue) return leg_window_prob(jd, window);
  if (jd.overdue) return leg_window_prob(ij, window);
  // starting at the support edge keeps Simpson off the Pareto density step
  const double lo = residual_support_start(*ij.model, ij.elapsed);
  if (lo >= window) return 0.0;
  const auto integrand = [&](double u) {  // u = t0 - t1
    return residual_density(*ij.model, ij.elapsed, u) *
           residual_window_prob(*jd.model, jd.elapsed + u, window - u);
  };
  return std::clamp(integrate(integrand, lo, window, opts), 0.0, 1.0);
}

struct RelayPath {
  NodeId via;
  Leg ij;
  Leg jd;
};

// Direct leg plus ranked relay paths over a common window start; reused
// across the f_c expectation so legs resolve once.
struct DeliveryEvaluator {
  Seconds t1 = 0;
  std::optional<Leg> direct;
  std::vector<RelayPath> relays;
  QuadratureOptions opts;

  double eval(double window_end) const {
    const double window = window_end - static_cast<double>(t1);
    if (window <= 0.0) return 0.0;
    std::vector<double> probs;
    probs.reserve(relays.size() + 1);
    if (direct) probs.push_back(leg_window_prob(*direct, window));
    for (const auto& r : relays) probs.push_back(relay_window_prob(r.ij, r.jd, t1, window, opts));
    return combine_relays(probs, opts.combine_rule);
  }
};

// Relay candidates ranked by the j-d direct probability over the ranking
// window (ties by node id for determinism), truncated to max_relays.
inline void rank_and_truncate(std::vector<RelayPath>& relays, Seconds t1, Seconds rank_end,
                              const QuadratureOptions& opts) {
  const double window = static_cast<double>(rank_end - t1);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(relays.size());
  for (std::size_t k = 0; k < relays.size(); ++k)
    scored.emplace_back(leg_window_prob(relays[k].jd, window), k);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  std::vector<RelayPath> kept;
  const std::size_t cap = std::min<std::size_t>(relays.size(), opts.max_relays);
  kept.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) kept.push_back(std::move(relays[scored[k].second]));
  relays = std::move(kept);
}

// Expectation over co-membership duration c ~ f_c, conditioned on the
// episode having already lasted t_e - t_cs. For c past t_v - t_cs the
// window is (t_e, t_v); shorter durations cut it to (t_e, t_cs + c).
inline double duration_expectation(const ClusterDurationModel& fc, Seconds t_cs,
                                   const MetricContext& ctx, const DeliveryEvaluator& ev) {
  const double mean = fc.mean, std = std::max(fc.std, 1e-9);
  const double a = std::max(0.0, static_cast<double>(ctx.encounter_time - t_cs));
  const double b = static_cast<double>(ctx.valid_until - t_cs);

  const double denom = normal_survival(a, mean, std);
  const double full_window = ev.eval(static_cast<double>(ctx.valid_until));
  if (denom < 1e-300) {
    // model says the episode should already be over; it is a point mass at a
    return a >= b ? full_window : ev.eval(static_cast<double>(t_cs) + a);
  }

  const double tail = std::min(1.0, normal_survival(b, mean, std) / denom);
  double total = tail * full_window;
  const double c_hi = std::min(b, std::max(a, mean + 6.0 * std));
  if (c_hi > a) {
    total += integrate(
        [&](double c) {
          return normal_pdf(c, mean, std) / denom * ev.eval(static_cast<double>(t_cs) + c);
        },
        a, c_hi, ctx.quad);
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace detail

// Direct contact probability of (from, to) over (t1, t2); zero when the
// pair has no fitted model.
inline double direct_prob(const MetricContext& ctx, const NodeId& from, const NodeId& to,
                          Seconds t1, Seconds t2) {
  if (t1 > t2) throw std::runtime_error("direct_prob: t1 > t2");
  const detail::Leg leg = detail::resolve_leg(ctx, from, to, t1);
  return detail::leg_window_prob(leg, static_cast<double>(t2 - t1));
}

// Probability that i reaches d through relay j within (t1, t2).
inline double relay_prob(const MetricContext& ctx, const NodeId& i, const NodeId& j,
                         const NodeId& d, Seconds t1, Seconds t2) {
  if (t1 > t2) throw std::runtime_error("relay_prob: t1 > t2");
  const detail::Leg ij = detail::resolve_leg(ctx, i, j, t1);
  const detail::Leg jd = detail::resolve_leg(ctx, j, d, t1);
  return detail::relay_window_prob(ij, jd, t1, static_cast<double>(t2 - t1), ctx.quad);
}

namespace detail {

// Members of T_i whose exchanged snapshot contains d; the in-cluster relay
// set D and the adjacent-cluster bridge set T share this definition.
inline std::vector<NodeId> snapshot_carriers(const MetricContext& ctx) {
  std::vector<NodeId> out;
  for (const auto& [member, rec] : ctx.cluster->records()) {
    if (ctx.encounter_time - rec.last_end > ctx.cluster_params->x) continue;
    if (member == ctx.destination || member == ctx.node) continue;
    if (rec.snapshot.count(ctx.destination)) out.push_back(member);
  }
  return out;
}

inline DeliveryEvaluator make_evaluator(const MetricContext& ctx, bool with_direct, Seconds t1,
                                        Seconds rank_end) {
  DeliveryEvaluator ev;
  ev.t1 = t1;
  ev.opts = ctx.quad;
  if (with_direct) ev.direct = resolve_leg(ctx, ctx.node, ctx.destination, t1);
  for (const NodeId& j : snapshot_carriers(ctx)) {
    Leg ij = resolve_leg(ctx, ctx.node, j, t1);
    Leg jd = resolve_leg(ctx, j, ctx.destination, t1);
    if (!ij || !jd) continue;
    ev.relays.push_back(RelayPath{j, ij, jd});
  }
  rank_and_truncate(ev.relays, t1, rank_end, ctx.quad);
  return ev;
}

}  // namespace detail

// Direct contact combined with the relay set D over (t1, t2).
inline double window_delivery_prob(const MetricContext& ctx, Seconds t1, Seconds t2) {
  if (t1 > t2) throw std::runtime_error("window_delivery_prob: t1 > t2");
  const auto ev = detail::make_evaluator(ctx, /*with_direct=*/true, t1, t2);
  return ev.eval(static_cast<double>(t2));
}

// Destination inside i's transient cluster: expectation of the window
// delivery probability over the remaining co-membership duration.
inline double expected_in_cluster_prob(const MetricContext& ctx) {
  ctx.validate();
  const auto ev =
      detail::make_evaluator(ctx, /*with_direct=*/true, ctx.encounter_time, ctx.valid_until);
  const auto episode = ctx.cluster->current_episode_start(ctx.destination, ctx.encounter_time,
                                                          *ctx.cluster_params);
  const Seconds t_cs = episode.value_or(ctx.encounter_time);
  const ClusterDurationModel& fc =
      ctx.durations->lookup(make_pair_canonical(ctx.node, ctx.destination));
  return detail::duration_expectation(fc, t_cs, ctx, ev);
}

// Destination only in an adjacent cluster: bridge nodes carry the data
// across, inside the same duration expectation. The bridge with the highest
// j-d direct probability supplies the episode start and duration model.
inline double adjacent_cluster_prob(const MetricContext& ctx) {
  ctx.validate();
  const auto ev =
      detail::make_evaluator(ctx, /*with_direct=*/false, ctx.encounter_time, ctx.valid_until);
  if (ev.relays.empty()) return 0.0;

  // relays come back rank-ordered; the strongest bridge anchors f_c and t_cs
  const NodeId& designated = ev.relays.front().via;
  const auto episode =
      ctx.cluster->current_episode_start(designated, ctx.encounter_time, *ctx.cluster_params);
  const Seconds t_cs = episode.value_or(ctx.encounter_time);
  const ClusterDurationModel& fc = ctx.durations->lookup(make_pair_canonical(ctx.node, designated));
  return detail::duration_expectation(fc, t_cs, ctx, ev);
}

enum class MetricCase { self, in_cluster, adjacent, no_possibility };

inline std::string metric_case_name(MetricCase c) {
  switch (c) {
    case MetricCase::self: return "self";
    case MetricCase::in_cluster: return "in-cluster";
    case MetricCase::adjacent: return "adjacent";
    case MetricCase::no_possibility: return "no-possibility";
  }
  return "?";
}

struct MetricResult {
  double probability = 0.0;
  MetricCase which = MetricCase::no_possibility;
};

// The node evaluation metric: possibility gate first (2-hop view), then the
// matching probability case.
inline MetricResult forwarding_metric(const MetricContext& ctx) {
  if (ctx.node == ctx.destination) return {1.0, MetricCase::self};
  ctx.validate();
  const Seconds t = ctx.encounter_time;
  if (ctx.cluster->is_member(ctx.destination, t, *ctx.cluster_params))
    return {expected_in_cluster_prob(ctx), MetricCase::in_cluster};
  if (ctx.cluster->in_two_hop_view(ctx.destination, t, *ctx.cluster_params))
    return {adjacent_cluster_prob(ctx), MetricCase::adjacent};
  return {0.0, MetricCase::no_possibility};
}

}  // namespace crowdcast
