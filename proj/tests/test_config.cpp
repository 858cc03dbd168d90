#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "crowdcast/sweep.hpp"

using namespace crowdcast;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> parse_str(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

RunConfig load_str(const std::string& text) {
  std::istringstream in(text);
  return load_run_config(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("key-value parsing") {
  const auto kv = parse_str(
      "# header comment\n"
      "\n"
      "  alpha = 1  \n"
      "beta=two words # trailing comment\n"
      "gamma =\n");
  CHECK(kv.at("alpha") == "1");
  CHECK(kv.at("beta") == "two words");
  CHECK(kv.at("gamma") == "");
  CHECK(kv.size() == 3);

  SECTION("duplicate keys fail with the offending line") {
    try {
      parse_str("a = 1\nb = 2\na = 3\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line_number == 3);
    }
  }
  SECTION("missing separator fails") { CHECK_THROWS_AS(parse_str("not a pair\n"), ParseError); }
  SECTION("empty key fails") { CHECK_THROWS_AS(parse_str("= value\n"), ParseError); }
}

TEST_CASE("run config with every key") {
  const auto cfg = load_str(
      "trace = contacts.csv\n"
      "trace_format = whitespace\n"
      "x_seconds = 1800\n"
      "protocols = epidemic, tcd\n"
      "ttl_seconds = 600, 1200\n"
      "messages = 25\n"
      "seeds = 1, 2, 3\n"
      "warmup_fraction = 0.25\n"
      "combine_rule = clamped_sum\n"
      "quadrature_n = 64\n"
      "out_dir = results\n"
      "max_relays = 4\n"
      "min_ict_samples = 3\n"
      "bubble_k = 2\n"
      "bubble_edge_threshold_s = 500\n"
      "active_start_s = 100\n"
      "active_end_s = 900\n");
  CHECK(cfg.trace == "contacts.csv");
  CHECK(cfg.trace_format == TraceFormat::whitespace);
  CHECK(cfg.x_seconds == 1800);
  CHECK(cfg.protocols == std::vector<std::string>{"epidemic", "tcd"});
  CHECK(cfg.ttl_seconds == std::vector<Seconds>{600, 1200});
  CHECK(cfg.messages == 25);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.warmup_fraction == Catch::Approx(0.25));
  CHECK(cfg.combine_rule == CombineRule::clamped_sum);
  CHECK(cfg.quadrature_n == 64);
  CHECK(cfg.out_dir == "results");
  CHECK(cfg.max_relays == 4);
  CHECK(cfg.min_ict_samples == 3);
  CHECK(cfg.bubble_k == 2);
  CHECK(cfg.bubble_edge_threshold_s == 500);
  REQUIRE(cfg.active_start_s.has_value());
  CHECK(*cfg.active_start_s == 100);
  CHECK(*cfg.active_end_s == 900);
}

TEST_CASE("run config defaults") {
  const auto cfg = load_str("trace = t.csv\nttl_seconds = 600\n");
  CHECK(cfg.trace_format == TraceFormat::csv);
  CHECK(cfg.x_seconds == 3600);
  CHECK(cfg.protocols == std::vector<std::string>{"epidemic", "tcd", "bubblerap"});
  CHECK(cfg.messages == 50);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
  CHECK(cfg.warmup_fraction == Catch::Approx(0.2));
  CHECK(cfg.combine_rule == CombineRule::noisy_or);
  CHECK(cfg.quadrature_n == 256);
  CHECK(cfg.out_dir == "out");
  CHECK_FALSE(cfg.active_start_s.has_value());
}

TEST_CASE("run config rejections") {
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nbogus_key = 1\n"));
  CHECK_THROWS(load_str("trace = t.csv\nsynthetic = s.cfg\nttl_seconds = 600\n"));
  CHECK_THROWS(load_str("ttl_seconds = 600\n"));
  CHECK_THROWS(load_str("trace = t.csv\n"));  // no TTLs
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 0\n"));
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nquadrature_n = 8\n"));
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nwarmup_fraction = 1.0\n"));
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nprotocols = flooding\n"));
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nmessages = 0\n"));
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nseeds =\n"));
  CHECK_THROWS(load_str("trace = t.csv\nttl_seconds = 600\nmessages = many\n"));
}

TEST_CASE("synthetic config parsing") {
  std::istringstream in(
      "communities = 20, 20\n"
      "intra_rate = 0.002\n"
      "inter_rate = 0.0001\n"
      "intra_family = pareto:1.8\n"
      "inter_family = exponential\n"
      "contact_duration_mean = 45\n"
      "contact_duration_std = 5\n"
      "horizon = 86400\n"
      "membership_switch_period = 7200\n"
      "seed = 12\n");
  const auto cfg = load_synthetic_config(in);
  CHECK(cfg.communities == std::vector<std::size_t>{20, 20});
  CHECK(cfg.intra_rate == Catch::Approx(0.002));
  CHECK(cfg.intra_family.family == Family::pareto);
  CHECK(cfg.intra_family.shape == Catch::Approx(1.8));
  CHECK(cfg.inter_family.family == Family::exponential);
  CHECK(cfg.horizon == 86400);
  CHECK(cfg.membership_switch_period == 7200);
  CHECK(cfg.seed == 12);

  std::istringstream bad("communities = 5\nhorizon = 100\nwhat = 1\n");
  CHECK_THROWS(load_synthetic_config(bad));
  std::istringstream no_horizon("communities = 5\n");
  CHECK_THROWS(load_synthetic_config(no_horizon));
}

TEST_CASE("workload hashes pin the message set") {
  std::vector<ContactEvent> evs;
  for (int i = 0; i < 5; ++i)
    evs.push_back({"a" + std::to_string(i), "b", static_cast<Seconds>(i * 50),
                   static_cast<Seconds>(i * 50 + 10)});
  const auto t = normalize_events(std::move(evs));

  const auto w1 = generate_workload(t, 20, 100, 0, 200, 3);
  const auto w2 = generate_workload(t, 20, 100, 0, 200, 3);
  CHECK(workload_hash(w1) == workload_hash(w2));

  auto w3 = w1;
  w3[7].t_s += 1;
  CHECK(workload_hash(w3) != workload_hash(w1));

  const auto hex = hash_hex(workload_hash(w1));
  CHECK(hex.size() == 16);
  CHECK(hex.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("aggregation computes means and medians per cell") {
  const auto mk = [](std::string p, Seconds ttl, std::uint64_t seed, double ratio,
                     std::uint64_t ovh) {
    SimReport r;
    r.protocol = std::move(p);
    r.ttl = ttl;
    r.seed = seed;
    r.delivery_ratio = ratio;
    r.overhead = ovh;
    return r;
  };
  const std::vector<SimReport> reports{
      mk("epidemic", 100, 1, 0.2, 1), mk("epidemic", 100, 2, 0.9, 10),
      mk("epidemic", 100, 3, 0.4, 3), mk("tcd", 100, 1, 0.5, 2),
      mk("tcd", 100, 2, 0.7, 4),
  };
  const auto rows = aggregate_reports(reports, {"epidemic", "tcd"}, {100, 999});
  REQUIRE(rows.size() == 2);  // the ttl=999 cells are empty and skipped
  CHECK(rows[0].protocol == "epidemic");
  CHECK(rows[0].ttl == 100);
  CHECK(rows[0].mean_delivery_ratio == Catch::Approx(0.5));
  CHECK(rows[0].median_delivery_ratio == Catch::Approx(0.4));
  CHECK(rows[0].mean_overhead == Catch::Approx(14.0 / 3.0));
  CHECK(rows[0].median_overhead == Catch::Approx(3.0));
  CHECK(rows[1].protocol == "tcd");
  CHECK(rows[1].median_delivery_ratio == Catch::Approx(0.6));
  CHECK(rows[1].median_overhead == Catch::Approx(3.0));
}

TEST_CASE("reports csv round-trips") {
  const fs::path dir = fs::temp_directory_path() / "crowdcast_reports_rt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string path = (dir / "reports.csv").string();

  std::vector<SimReport> reports(2);
  reports[0].protocol = "epidemic";
  reports[0].seed = 7;
  reports[0].ttl = 600;
  reports[0].generated = 50;
  reports[0].delivered = 31;
  reports[0].delivery_ratio = 0.62;
  reports[0].overhead = 412;
  reports[1].protocol = "tcd";
  reports[1].seed = 8;
  reports[1].ttl = 1200;
  reports[1].generated = 50;
  reports[1].delivered = 29;
  reports[1].delivery_ratio = 0.58;
  reports[1].overhead = 77;
  write_reports_csv(reports, path);

  const auto back = read_reports_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].protocol == "epidemic");
  CHECK(back[0].seed == 7);
  CHECK(back[0].ttl == 600);
  CHECK(back[0].generated == 50);
  CHECK(back[0].delivered == 31);
  CHECK(back[0].delivery_ratio == Catch::Approx(0.62));
  CHECK(back[0].overhead == 412);
  CHECK(back[1].protocol == "tcd");

  std::ofstream(path, std::ios::app) << "tcd,1,2,3\n";
  CHECK_THROWS(read_reports_csv(path));
}

TEST_CASE("workload window") {
  std::vector<ContactEvent> evs{{"a", "b", 0, 10}, {"a", "b", 9990, 10000}};
  const auto t = normalize_events(std::move(evs));
  RunConfig cfg;
  cfg.trace = "x";
  cfg.ttl_seconds = {600};
  cfg.warmup_fraction = 0.2;

  SECTION("defaults to the post-warm-up stretch minus the ttl") {
    const auto [s, e] = workload_window(t, cfg, 600);
    CHECK(s == 2000);
    CHECK(e == 9400);
  }
  SECTION("a ttl longer than the remainder collapses to the cutoff") {
    const auto [s, e] = workload_window(t, cfg, 9000);
    CHECK(s == 2000);
    CHECK(e == 2000);
  }
  SECTION("explicit bounds win") {
    cfg.active_start_s = 100;
    cfg.active_end_s = 500;
    const auto [s, e] = workload_window(t, cfg, 600);
    CHECK(s == 100);
    CHECK(e == 500);
  }
}

TEST_CASE("sweep grid: counts, shared workloads, byte-identical reruns") {
  SyntheticTraceConfig syn;
  syn.communities = {4, 4};
  syn.intra_rate = 1.0 / 600.0;
  syn.inter_rate = 1.0 / 5000.0;
  syn.contact_duration_mean = 50.0;
  syn.contact_duration_std = 10.0;
  syn.horizon = 30000;
  syn.seed = 5;
  const Trace trace = generate_synthetic_trace(syn);
  REQUIRE(trace.events.size() > 100);

  const fs::path base = fs::temp_directory_path() / "crowdcast_sweep_test";
  fs::remove_all(base);

  RunConfig cfg;
  cfg.trace = "in-memory";  // run_sweep takes the trace directly
  cfg.x_seconds = 1800;
  cfg.protocols = {"epidemic", "tcd"};
  cfg.ttl_seconds = {1000, 2000, 4000};
  cfg.messages = 5;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.warmup_fraction = 0.25;
  cfg.quadrature_n = 16;
  cfg.out_dir = (base / "a").string();

  const auto result = run_sweep(cfg, trace);

  SECTION("grid size: 2 protocols x 3 ttls x 5 seeds") {
    CHECK(result.reports.size() == 30);
    CHECK(result.aggregate.size() == 6);
    CHECK(read_reports_csv((base / "a" / "reports.csv").string()).size() == 30);

    std::size_t message_files = 0;
    for (const auto& entry : fs::directory_iterator(base / "a" / "messages")) {
      CHECK(entry.path().extension() == ".csv");
      ++message_files;
    }
    CHECK(message_files == 30);
    CHECK(fs::exists(base / "a" / "aggregate.csv"));
    CHECK(fs::exists(base / "a" / "long.csv"));
  }

  SECTION("every protocol replays the identical workload per (seed, ttl)") {
    std::ifstream in(base / "a" / "workloads.csv");
    REQUIRE(in);
    std::string line;
    std::getline(in, line);
    CHECK(line == "protocol,seed,ttl_s,workload_hash");
    std::map<std::string, std::set<std::string>> hashes;  // (seed,ttl) -> hash set
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++rows;
      std::istringstream ls(line);
      std::string protocol, seed, ttl, hash;
      std::getline(ls, protocol, ',');
      std::getline(ls, seed, ',');
      std::getline(ls, ttl, ',');
      std::getline(ls, hash, ',');
      hashes[seed + ":" + ttl].insert(hash);
    }
    CHECK(rows == 30);
    REQUIRE(hashes.size() == 15);
    for (const auto& [cell, hs] : hashes) CHECK(hs.size() == 1);
  }

  SECTION("a rerun reproduces every artifact byte for byte") {
    RunConfig cfg_b = cfg;
    cfg_b.out_dir = (base / "b").string();
    const auto result_b = run_sweep(cfg_b, trace);
    CHECK(result_b.reports.size() == result.reports.size());
    for (const char* name : {"reports.csv", "aggregate.csv", "long.csv", "workloads.csv"})
      CHECK(slurp(base / "a" / name) == slurp(base / "b" / name));
    CHECK(slurp(base / "a" / "messages" / "tcd_seed3_ttl2000.csv") ==
          slurp(base / "b" / "messages" / "tcd_seed3_ttl2000.csv"));
  }
}
