#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "crowdcast/router.hpp"

using namespace crowdcast;

namespace {

Trace trace_from(std::vector<ContactEvent> evs) { return normalize_events(std::move(evs)); }

Message make_msg(const NodeId& src, const NodeId& dst, Seconds t_s, Seconds t_v) {
  Message m;
  m.source = src;
  m.destination = dst;
  m.t_s = t_s;
  m.t_v = t_v;
  m.holders.insert(src);
  return m;
}

SimConfig basic_cfg(Seconds ttl, double warmup = 0.2) {
  SimConfig cfg;
  cfg.warmup_fraction = warmup;
  cfg.ttl = ttl;
  return cfg;
}

SimReport run(const Trace& t, ProtocolDecision& p, std::vector<Message> w, const SimConfig& cfg) {
  return run_simulation(t, p, std::move(w), cfg, train_models(t, cfg));
}

}  // namespace

TEST_CASE("hand simulation: relay then delivery within validity") {
  const auto t = trace_from({{"A", "B", 10, 11}, {"B", "C", 20, 21}});
  auto p = epidemic_protocol();

  SECTION("ttl 30 delivers through B") {
    const auto r = run(t, *p, {make_msg("A", "C", 0, 30)}, basic_cfg(30));
    REQUIRE(r.messages.size() == 1);
    const auto& m = r.messages[0];
    REQUIRE(m.delivered_at.has_value());
    CHECK(*m.delivered_at == 20);
    CHECK(m.copies_created == 2);  // B, then C
    CHECK(r.delivered == 1);
    CHECK(r.delivery_ratio == 1.0);
    CHECK(r.overhead == 2);
  }
  SECTION("ttl 15 expires before the second hop") {
    const auto r = run(t, *p, {make_msg("A", "C", 0, 15)}, basic_cfg(15));
    CHECK(r.delivered == 0);
    CHECK_FALSE(r.messages[0].delivered_at.has_value());
    CHECK(r.messages[0].copies_created == 1);  // the copy at B still counts
  }
  SECTION("repeated runs are identical") {
    const auto r1 = run(t, *p, {make_msg("A", "C", 0, 30)}, basic_cfg(30));
    auto p2 = epidemic_protocol();
    const auto r2 = run(t, *p2, {make_msg("A", "C", 0, 30)}, basic_cfg(30));
    CHECK(r1.delivered == r2.delivered);
    CHECK(r1.overhead == r2.overhead);
    CHECK(r1.total_copies == r2.total_copies);
    CHECK(r1.messages[0].delivered_at == r2.messages[0].delivered_at);
  }
}

TEST_CASE("post-delivery replication counts only toward total_copies") {
  const auto t = trace_from({{"A", "C", 10, 11}, {"A", "B", 20, 21}});
  auto p = epidemic_protocol();
  const auto r = run(t, *p, {make_msg("A", "C", 0, 100)}, basic_cfg(100));
  const auto& m = r.messages[0];
  REQUIRE(m.delivered_at.has_value());
  CHECK(*m.delivered_at == 10);
  CHECK(m.copies_created == 1);
  CHECK(m.total_copies == 2);
  CHECK(r.overhead == 1);
  CHECK(r.total_copies == 2);
}

TEST_CASE("workload validation") {
  const auto t = trace_from({{"A", "B", 10, 11}});
  auto p = epidemic_protocol();
  const auto cfg = basic_cfg(10);

  auto bad_ttl = make_msg("A", "B", 5, 5);
  CHECK_THROWS(run(t, *p, {bad_ttl}, cfg));

  auto late = make_msg("A", "B", 500, 600);  // past the last event end
  CHECK_THROWS(run(t, *p, {late}, cfg));

  auto no_holder = make_msg("A", "B", 5, 15);
  no_holder.holders.clear();
  CHECK_THROWS(run(t, *p, {no_holder}, cfg));

  auto bad_cfg = cfg;
  bad_cfg.warmup_fraction = 1.0;
  CHECK_THROWS(run(t, *p, {make_msg("A", "B", 5, 15)}, bad_cfg));
}

TEST_CASE("delivery to the destination bypasses the protocol") {
  // no trained models at all and a zero metric everywhere; contact with the
  // destination must still deliver
  const auto t = trace_from({{"A", "D", 100, 110}});
  auto p = tcd_protocol();
  const auto r = run(t, *p, {make_msg("A", "D", 50, 250)}, basic_cfg(200));
  REQUIRE(r.delivered == 1);
  CHECK(*r.messages[0].delivered_at == 100);
  CHECK(r.messages[0].copies_created == 1);
  CHECK(r.protocol == "tcd");
}

TEST_CASE("tcd does not replicate when the peer has no delivery possibility") {
  const auto t = trace_from({{"A", "B", 100, 110}, {"A", "B", 200, 210}});
  auto p = tcd_protocol();
  const auto r = run(t, *p, {make_msg("A", "zz", 50, 1000)}, basic_cfg(950));
  CHECK(r.delivered == 0);
  CHECK(r.overhead == 0);
}

namespace {

// nodes a and b have interchangeable histories with destination d, so their
// metrics agree exactly; x-y contacts exist only to train the aggregate fit
Trace symmetric_trace() {
  std::vector<ContactEvent> evs{{"a", "d", 0, 10},    {"a", "d", 500, 510},
                                {"b", "d", 0, 10},    {"b", "d", 500, 510},
                                {"a", "b", 2000, 2010}};
  for (Seconds s : {0, 300, 550, 900, 1300, 1600, 2050, 2400})
    evs.push_back({"x", "y", s, s + 10});
  return trace_from(evs);
}

double replay_metric(const Trace& t, const SimConfig& cfg, const TrainedModels& models,
                     const NodeId& node, const NodeId& dest, Seconds t_now, Seconds t_s,
                     Seconds t_v) {
  ClusterField clusters(t, cfg.params);
  std::map<NodePair, Seconds> ple;
  for (const auto& ev : t.events) {
    if (ev.start > t_now) break;
    clusters.observe(ev);
    auto [it, ins] = ple.try_emplace(ev.pair(), ev.end);
    if (!ins) it->second = std::max(it->second, ev.end);
  }
  MetricContext ctx;
  ctx.encounter_time = t_now;
  ctx.valid_until = t_v;
  ctx.generation_time = t_s;
  ctx.node = node;
  ctx.destination = dest;
  ctx.cluster = &clusters.state(node);
  ctx.cluster_params = &cfg.params;
  ctx.ict = &models.ict;
  ctx.durations = &models.durations;
  ctx.pair_last_end = &ple;
  ctx.quad = cfg.quad;
  return forwarding_metric(ctx).probability;
}

}  // namespace

TEST_CASE("tcd strict inequality: equal positive metrics never replicate") {
  const auto t = symmetric_trace();
  const auto cfg = basic_cfg(2000, 0.8);
  const auto models = train_models(t, cfg);

  const double ma = replay_metric(t, cfg, models, "a", "d", 2000, 1000, 3000);
  const double mb = replay_metric(t, cfg, models, "b", "d", 2000, 1000, 3000);
  CHECK(ma > 0.1);       // genuinely positive, not a closed gate
  CHECK(ma == mb);       // bitwise equal by symmetry

  auto p = tcd_protocol();
  const auto r = run(t, *p, {make_msg("a", "d", 1000, 3000)}, cfg);
  CHECK(r.delivered == 0);
  CHECK(r.overhead == 0);
}

TEST_CASE("tcd replicates up the metric gradient and delivers") {
  // b is d's reliable neighbor; a has no leg toward d at all
  std::vector<ContactEvent> evs;
  for (Seconds s = 1000; s <= 5000; s += 500) evs.push_back({"b", "d", s, s + 10});
  evs.push_back({"a", "b", 6500, 6510});
  evs.push_back({"b", "d", 7000, 7010});
  const auto t = trace_from(evs);
  const auto cfg = basic_cfg(3500, 0.5);
  const auto models = train_models(t, cfg);

  // the a-b pair never appears before the training cutoff
  CHECK(models.ict.lookup(make_pair_canonical("a", "b")) == nullptr);
  REQUIRE(models.ict.lookup(make_pair_canonical("b", "d")) != nullptr);

  auto p = tcd_protocol();
  const auto r = run(t, *p, {make_msg("a", "d", 6000, 9500)}, cfg);
  REQUIRE(r.delivered == 1);
  CHECK(*r.messages[0].delivered_at == 7000);
  CHECK(r.messages[0].copies_created == 2);  // b, then d
}

TEST_CASE("bubble rap forwarding rules") {
  BubbleRapState st;
  st.communities = {{"a", "b", "c"}, {"x", "y", "z"}};
  st.global_centrality = {{"a", 5.0}, {"b", 1.0}, {"c", 0.5}, {"x", 2.0}, {"y", 1.0}, {"z", 0.0}};
  st.local_centrality = {{{"a", 3.0}, {"b", 1.0}, {"c", 0.0}},
                         {{"x", 1.0}, {"y", 2.0}, {"z", 0.0}}};
  BubbleRapProtocol p(st);
  const Message msg = make_msg("x", "c", 0, 100);  // destination community {a,b,c}
  const NetworkView net;

  // outside the destination community: into it, or up the global gradient
  CHECK(p.should_replicate("x", "b", msg, 1, net));        // peer inside
  CHECK_FALSE(p.should_replicate("x", "y", msg, 1, net));  // outside, lower global
  CHECK(p.should_replicate("z", "y", msg, 1, net));        // outside, higher global

  // inside: only community members with strictly higher local centrality
  CHECK(p.should_replicate("b", "a", msg, 1, net));
  CHECK_FALSE(p.should_replicate("a", "b", msg, 1, net));
  CHECK_FALSE(p.should_replicate("a", "x", msg, 1, net));  // leaving the community
  CHECK_FALSE(p.should_replicate("b", "b", msg, 1, net));  // ties lose
}

TEST_CASE("time-respecting reachability follows canonical event order") {
  SECTION("ordered chain") {
    const auto t = trace_from({{"A", "B", 10, 11}, {"B", "C", 20, 21}});
    CHECK(time_respecting_reachable(t, "A", "C", 0, 20));
    CHECK_FALSE(time_respecting_reachable(t, "A", "C", 0, 19));
    CHECK_FALSE(time_respecting_reachable(t, "A", "C", 11, 19));
  }
  SECTION("reversed chain never carries") {
    const auto t = trace_from({{"A", "B", 20, 21}, {"B", "C", 10, 11}});
    CHECK_FALSE(time_respecting_reachable(t, "A", "C", 0, 100));
    CHECK(time_respecting_reachable(t, "C", "A", 0, 100));
  }
  SECTION("same-instant chains resolve by canonical pair order") {
    const auto t = trace_from({{"a", "b", 10, 11}, {"b", "c", 10, 11}});
    CHECK(time_respecting_reachable(t, "a", "c", 0, 10));
    CHECK_FALSE(time_respecting_reachable(t, "c", "a", 0, 10));
  }
  SECTION("edge cases") {
    const auto t = trace_from({});
    CHECK(time_respecting_reachable(t, "A", "A", 0, 0));
    CHECK_FALSE(time_respecting_reachable(t, "A", "B", 0, 10));
    CHECK_THROWS(time_respecting_reachable(t, "A", "B", 10, 0));
  }
}

TEST_CASE("simulator agrees with the reachability oracle on same-instant chains") {
  const auto t = trace_from({{"a", "b", 10, 11}, {"b", "c", 10, 11}});
  auto p = epidemic_protocol();
  const auto cfg = basic_cfg(10);

  const auto fwd = run(t, *p, {make_msg("a", "c", 0, 10)}, cfg);
  CHECK(fwd.delivered == 1);

  auto p2 = epidemic_protocol();
  const auto bwd = run(t, *p2, {make_msg("c", "a", 0, 10)}, cfg);
  CHECK(bwd.delivered == 0);
}

TEST_CASE("workload generation") {
  std::vector<ContactEvent> evs;
  for (int i = 0; i < 6; ++i)
    evs.push_back({"n" + std::to_string(i), "n" + std::to_string(i + 1),
                   static_cast<Seconds>(100 * i), static_cast<Seconds>(100 * i + 10)});
  const auto t = trace_from(evs);

  const auto w = generate_workload(t, 50, 300, 100, 400, 42);
  REQUIRE(w.size() == 50);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& m = w[i];
    CHECK(m.id == i);
    CHECK(m.source != m.destination);
    CHECK(t.has_node(m.source));
    CHECK(t.has_node(m.destination));
    CHECK(m.t_s >= 100);
    CHECK(m.t_s <= 400);
    CHECK(m.t_v == m.t_s + 300);
    CHECK(m.holders == std::set<NodeId>{m.source});
  }

  SECTION("same seed reproduces the draw") {
    const auto w2 = generate_workload(t, 50, 300, 100, 400, 42);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i].source == w2[i].source);
      CHECK(w[i].destination == w2[i].destination);
      CHECK(w[i].t_s == w2[i].t_s);
    }
  }
  SECTION("different seeds move the draw") {
    const auto w2 = generate_workload(t, 50, 300, 100, 400, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < w.size(); ++i)
      any_diff = any_diff || w[i].source != w2[i].source || w[i].t_s != w2[i].t_s;
    CHECK(any_diff);
  }
  SECTION("ttl does not perturb sources, destinations, or times") {
    const auto w2 = generate_workload(t, 50, 7200, 100, 400, 42);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i].source == w2[i].source);
      CHECK(w[i].destination == w2[i].destination);
      CHECK(w[i].t_s == w2[i].t_s);
      CHECK(w2[i].t_v == w2[i].t_s + 7200);
    }
  }
  SECTION("degenerate window pins every generation time") {
    const auto w2 = generate_workload(t, 10, 300, 250, 250, 7);
    for (const auto& m : w2) CHECK(m.t_s == 250);
  }
  SECTION("argument validation") {
    CHECK_THROWS(generate_workload(trace_from({}), 5, 300, 0, 10, 1));
    CHECK_THROWS(generate_workload(t, 5, 0, 0, 10, 1));
    CHECK_THROWS(generate_workload(t, 5, 300, 10, 0, 1));
  }
}

TEST_CASE("warmup cutoff interpolates the trace horizon") {
  const auto t = trace_from({{"A", "B", 1000, 1010}, {"A", "B", 2000, 2010}});
  CHECK(warmup_cutoff(t, 0.0) == 1000);
  CHECK(warmup_cutoff(t, 0.2) == 1000 + 202);
  CHECK(warmup_cutoff(t, 0.5) == 1000 + 505);
}
