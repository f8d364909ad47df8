// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any of them failed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errmon/analytics.hpp"
#include "errmon/anonymizer.hpp"
#include "errmon/experiments.hpp"
#include "errmon/replay.hpp"
#include "errmon/responder.hpp"
#include "errmon/scripted_trace.hpp"
#include "errmon/switch_sim.hpp"
#include "errmon/workload.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace errmon;

namespace {

const std::string kScenarios = ERRMON_SOURCE_DIR "/scenarios/";

struct Outcome {
  bool pass = true;
  std::string detail;
};

Config campus_config() {
  Config cfg = testutil::small_config();
  cfg.network.internal_prefixes = {*Cidr::parse("10.0.0.0/16")};
  cfg.network.telescope_prefixes = {*Cidr::parse("10.0.255.0/24")};
  cfg.fsd.hash_buckets = 1u << 16;
  cfg.fsd.ring_capacity = 1u << 20;
  cfg.fsd.buffer_capacity = 1u << 20;
  return cfg;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1. Collected set equals the brute-force oracle's set.
Outcome oracle_equivalence() {
  const oracle::OracleOptions opt;
  std::size_t total_records = 0, total_packets = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Config cfg = campus_config();
    WorkloadSpec s;
    s.seed = seed;
    s.flows = 1000 + (seed * 397) % 3000;
    s.flow_rate = 2000;
    s.answered_fraction = 0.3 + 0.4 * static_cast<double>(seed % 5) / 4.0;
    s.response_delay = parse_delay_mixture("0.8 uniform 0.0001 0.9; 0.2 uniform 1.1 2.5");
    s.guard = 0.02;
    s.duplicate_fraction = 0.15;
    s.icmp_error_fraction = 0.2;
    s.followup_packets = seed % 3;
    s.external_pool = 200;
    const Workload w = generate_workload(s, cfg);
    total_packets += w.packets.size();

    Pipeline p(cfg);
    VectorRecordSink sink;
    p.add_sink(&sink);
    p.run(w.packets);

    std::vector<oracle::ExpectedRecord> want;
    try {
      want = oracle::expected_erroneous(w.packets, cfg, opt);
    } catch (const oracle::AmbiguousSchedule& e) {
      return {false, "seed " + std::to_string(seed) + ": " + e.what()};
    }
    if (want.size() != sink.records.size())
      return {false, "seed " + std::to_string(seed) + ": " + std::to_string(sink.records.size()) +
                         " records, oracle expects " + std::to_string(want.size())};
    std::multimap<std::string, std::size_t> index;
    for (std::size_t i = 0; i < want.size(); ++i) {
      index.emplace(want[i].canonical, i);
      if (want[i].alternative) index.emplace(*want[i].alternative, i);
    }
    std::vector<bool> used(want.size(), false);
    for (const auto& r : sink.records) {
      const std::string c = oracle::canonical(r);
      bool matched = false;
      for (auto [it, end] = index.equal_range(c); it != end && !matched; ++it) {
        const auto& e = want[it->second];
        if (used[it->second] || r.ts < e.earliest - 1e-9 || r.ts > e.earliest + opt.slack) continue;
        used[it->second] = matched = true;
      }
      if (!matched) return {false, "seed " + std::to_string(seed) + ": unexpected record " + c.substr(0, 80)};
    }
    total_records += want.size();
  }
  return {true, std::to_string(total_records) + " records over " + std::to_string(total_packets) + " packets"};
}

// 2. Answered flows collected as erroneous.
Outcome dt_classification() {
  Config cfg = campus_config();
  WorkloadSpec s = dt_workload(7);
  s.flows = 100000;
  s.flow_rate = 5000;
  // 99.9% of the delay mass below one second.
  s.response_delay = parse_delay_mixture("0.999 lognormal -4 1; 0.001 uniform 1.5 5");
  const Workload w = generate_workload(s, cfg);
  const Misclassification m = measure_misclassification(cfg, w);
  const double pct = 100.0 * m.rate();
  return {pct <= 0.15, fmt("%.4f%% of %.0f answered flows misclassified", pct, static_cast<double>(m.answered))};
}

// 3. Buffering time at (P_D = 0.1 ms, d_max = 100).
Outcome timer_precision() {
  const Config cfg = campus_config();
  ExperimentParams p;
  p.timer_points = {{1e-4, 100}};
  const ResultTable t = timer_sweep(cfg, p);
  const double p99 = t.number(0, "buffering_p99");
  const double dt = cfg.network.timers.detection_timeout;
  return {p99 >= dt && p99 <= dt + 0.01, fmt("p99 buffering %.6f s (DT %.1f s)", p99, dt)};
}

// 4. Per-rule install cost versus batch size.
Outcome batching_amortization() {
  const LatencyModel m = ControlConfig{}.install_latency;
  const double c1 = m.per_rule_latency(1), c200 = m.per_rule_latency(200), c10k = m.per_rule_latency(10000);
  return {c1 / c200 >= 10.0 && c10k > c200,
          fmt("per rule: k=1 %.3g s, k=200 %.3g s, k=10000 %.3g s", c1, c200, c10k)};
}

// 5. Pending rule queue at a fixed offered rate.
Outcome queue_stability() {
  const ControlConfig ctl;
  const ExperimentParams p;
  const QueueRun k200 = simulate_rule_queue(ctl, 200, p.rule_rate, p.rule_arrivals, p.seed);
  const QueueRun k1 = simulate_rule_queue(ctl, 1, p.rule_rate, p.rule_arrivals, p.seed);
  const bool ok = k200.high_watermark < 2000 && k1.strictly_growing();
  return {ok, fmt("k=200 high-watermark %.0f, k=1 final length %.0f", static_cast<double>(k200.high_watermark),
                  static_cast<double>(k1.final_length)) +
                  (k1.strictly_growing() ? " (growing)" : " (not growing)")};
}

// 6. Share of packets dropped in the switch.
Outcome filtering_efficiency() {
  ExperimentParams p;
  p.whitelist_fractions = {0.3};
  const ResultTable t = filter_efficiency(campus_config(), p);
  const double filtered = t.number(0, "filtered_fraction"), wl = t.number(0, "whitelist_share");
  return {filtered >= 0.9 && wl >= 0.25 && wl <= 0.35,
          fmt("filtered %.4f, whitelist share %.4f", filtered, wl)};
}

// 7. Address obfuscation and payload truncation.
Outcome anonymizer() {
  std::mt19937_64 rng(2024);
  const Config cfg = campus_config();
  const Cidr net = cfg.network.internal_prefixes[0];
  for (int i = 0; i < 10000; ++i) {
    const Ipv4 a(net.network.value | static_cast<std::uint32_t>(rng() & 0xffff));
    const std::uint32_t key = static_cast<std::uint32_t>(rng());
    if (deobfuscate_ip(obfuscate_ip(a, key), key) != a) return {false, "round trip failed for " + a.to_string()};
  }
  for (int i = 0; i < 10000; ++i) {
    PacketSpec s;
    s.src = Ipv4(static_cast<std::uint32_t>(rng()));
    s.dst = Ipv4(net.network.value | static_cast<std::uint32_t>(rng() & 0xffff));
    s.proto = std::array<std::uint8_t, 3>{6, 17, 1}[rng() % 3];
    s.src_port = static_cast<std::uint16_t>(rng());
    s.dst_port = static_cast<std::uint16_t>(rng());
    s.tcp_option_words = static_cast<std::uint8_t>(rng() % 11);
    s.icmp_type = std::array<std::uint8_t, 3>{0, 3, 8}[rng() % 3];
    s.payload_len = static_cast<std::uint32_t>(rng() % 1400);
    const PacketRecord p = build_packet(s);
    const PacketRecord t = truncate(p);
    if (t.raw.size() != oracle::header_bytes(p.raw) || t.payload_len != 0)
      return {false, "payload bytes survived truncation (proto " + std::to_string(s.proto) + ")"};
  }
  return {true, "1e4 round trips, 1e4 truncations"};
}

// 8. Idle countdown against the step-through model.
Outcome idle_eviction() {
  std::mt19937_64 rng(8);
  for (int round = 0; round < 1000; ++round) {
    Config cfg = testutil::small_config();
    const Seconds qi = std::array<double, 3>{0.5, 1.0, 2.0}[rng() % 3];
    const Seconds ttl = qi * static_cast<double>(1 + rng() % 12);
    cfg.network.timers.query_interval = qi;
    std::vector<bool> matched(10 + rng() % 40);
    const double density = static_cast<double>(rng() % 5) / 4.0;
    for (auto&& b : matched) b = std::bernoulli_distribution(density)(rng);

    SwitchSim sw(cfg.network, cfg.switch_cfg, cfg.control.install_latency, cfg.control.delete_latency);
    auto rules = rules_for_responder({testutil::ip("10.0.0.9"), 80, 6}, ttl);
    rules.resize(1);
    sw.install_rules(rules, -1.0);
    const auto pkt = testutil::tcp(0, "1.2.3.4", 7, "10.0.0.9", 80, tcp_flag::kAck);
    oracle::CountdownTrace got;
    for (std::size_t i = 0; i < matched.size(); ++i) {
      const Seconds t = static_cast<double>(i) * qi;
      if (matched[i]) sw.process_packet(pkt, t + qi / 2);
      if (!sw.tick(t + qi).empty()) {
        got.ttl_after_tick.push_back(0.0);
        got.fired_at_tick = i + 1;
        break;
      }
      got.ttl_after_tick.push_back(sw.find_rule(rules[0].key)->ttl_remaining);
    }
    const auto want = oracle::countdown(ttl, qi, matched);
    bool same = got.fired_at_tick == want.fired_at_tick && got.ttl_after_tick.size() == want.ttl_after_tick.size();
    for (std::size_t i = 0; same && i < got.ttl_after_tick.size(); ++i)
      same = std::abs(got.ttl_after_tick[i] - want.ttl_after_tick[i]) < 1e-9;
    if (!same) return {false, "schedule " + std::to_string(round) + " diverged"};
  }
  return {true, "1000 schedules"};
}

// 9. Three-flow golden scenario.
Outcome golden_scenario() {
  const Config cfg = load_config(kScenarios + "micro/micro.conf");
  PipelineOptions opts;
  opts.event_log = true;
  Pipeline p(cfg, opts);
  VectorRecordSink sink;
  p.add_sink(&sink);
  const RunSummary s = p.run(load_trace(kScenarios + "micro/micro.trace"));
  std::ifstream in(kScenarios + "micro/micro.events");
  std::vector<std::string> want;
  for (std::string line; std::getline(in, line);) want.push_back(line);
  if (want.empty()) return {false, "golden event log missing"};
  if (want != p.event_log()) return {false, "event log differs from the golden file"};
  const bool f1_f3 = sink.records.size() == 2 && sink.records[0].pkt.dst_port == 23 && sink.records[1].pkt.proto == 17;
  const bool ok = f1_f3 && s.sw.rules_installed == 2 && s.fsd.duplicates_dropped == 1;
  return {ok, fmt("%.0f records, %.0f rules installed, %.0f duplicate", static_cast<double>(sink.records.size()),
                  static_cast<double>(s.sw.rules_installed), static_cast<double>(s.fsd.duplicates_dropped))};
}

// 10. Responder outputs over every short segment sequence.
Outcome responder_machine() {
  using oracle::Seg;
  Config cfg = testutil::small_config(false);
  const ServiceKey served{testutil::ip("10.0.0.50"), 22, 6};
  cfg.network.impersonation_set.insert(served);
  const std::uint32_t c = oracle::kClientIsn;
  auto segment = [&](Seg s, std::uint32_t isn) {
    switch (s) {
      case Seg::Syn: return testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.50", 22, tcp_flag::kSyn, 0, c);
      case Seg::Ack: return testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.50", 22, tcp_flag::kAck, 0, c + 1, isn + 1);
      case Seg::Data:
        return testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.50", 22, tcp_flag::kPsh | tcp_flag::kAck,
                             oracle::kDataBytes, c + 1, isn + 1);
      case Seg::Fin:
        return testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.50", 22, tcp_flag::kFin | tcp_flag::kAck, 0, c + 1,
                             isn + 1);
      case Seg::Rst: break;
    }
    return testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.50", 22, tcp_flag::kRst, 0, c + 1);
  };
  std::size_t checked = 0;
  std::string failure;
  std::vector<Seg> segs;
  std::function<void()> walk = [&] {
    if (!failure.empty()) return;
    if (!segs.empty()) {
      TcpResponder r(cfg.network, cfg.responder);
      const std::uint32_t isn = r.isn_for({testutil::ip("1.2.3.4"), 40000}, served.endpoint());
      const auto want = oracle::responder_outcome(segs, isn);
      bool ok = true;
      for (std::size_t i = 0; i < segs.size() && ok; ++i) {
        const auto got = r.step(segment(segs[i], isn), static_cast<double>(i));
        ok = got.has_value() == want.replies[i].has_value() &&
             (!got || oracle::ExpectedReply{got->tcp_flags, got->tcp_seq, got->tcp_ack} == *want.replies[i]);
      }
      ok = ok && r.transcripts().size() == want.transcripts.size();
      for (std::size_t i = 0; ok && i < want.transcripts.size(); ++i)
        ok = r.transcripts()[i].payload.size() == want.transcripts[i];
      if (!ok) {
        for (auto s : segs) failure += std::string(oracle::seg_name(s)) + " ";
        return;
      }
      ++checked;
    }
    if (segs.size() == 4) return;
    for (Seg s : {Seg::Syn, Seg::Ack, Seg::Data, Seg::Fin, Seg::Rst}) {
      segs.push_back(s);
      walk();
      segs.pop_back();
    }
  };
  walk();
  if (!failure.empty()) return {false, "mismatch on sequence " + failure};
  return {checked == 780, std::to_string(checked) + " sequences"};
}

// 11. Analytics against the reference implementations.
Outcome analytics_oracle() {
  AnalyticsContext ctx;
  ctx.internal_prefixes = {*Cidr::parse("10.0.0.0/24")};
  ctx.telescope_prefixes = {*Cidr::parse("10.0.0.240/28")};
  ctx.anonymization_key = 0x5a17c3e1;
  ctx.acknowledged_scanners = {*Cidr::parse("198.51.100.0/28")};
  const auto rows = testutil::random_rows(10000, 42, *ctx.anonymization_key);

  const auto hours = hourly_sender_stats(rows, ctx);
  const auto want_hours = oracle::hourly(rows, ctx);
  if (hours.size() != want_hours.size()) return {false, "hour count differs"};
  for (std::size_t i = 0; i < hours.size(); ++i) {
    const auto& g = hours[i];
    const auto& w = want_hours[i];
    if (g.hour != w.hour || g.unique_src_ips != w.src_ips || g.unique_ports != w.ports || g.hosts != w.hosts ||
        g.acked_scanners != w.acked || std::abs(g.mean_senders_per_host - w.mean_senders) > 1e-9 ||
        std::abs(g.std_senders_per_host - w.std_senders) > 1e-9 || std::abs(g.std_ports - w.std_ports) > 1e-9)
      return {false, "hourly statistics differ in hour " + std::to_string(g.hour)};
  }
  const auto cls = host_classes(rows, ctx);
  const auto want_cls = oracle::classes(rows, ctx);
  if (cls.size() != want_cls.size()) return {false, "host class partition differs"};
  for (const auto& [host, c] : cls)
    if (!want_cls.contains(host.value) || want_cls.at(host.value) != c)
      return {false, "class of " + host.to_string() + " differs"};
  for (auto c : {HostClass::Telescope, HostClass::Active, HostClass::Dark})
    if (per_port_histogram(rows, c, ctx) != oracle::ports_for_class(rows, c, ctx))
      return {false, std::string("port histogram differs for ") + host_class_name(c)};
  const auto ccdf = sender_ccdf(rows, ctx);
  const auto want_ccdf = oracle::ccdf(rows, ctx);
  if (ccdf.size() != want_ccdf.size()) return {false, "ccdf length differs"};
  for (std::size_t i = 0; i < ccdf.size(); ++i)
    if (ccdf[i].senders != want_ccdf[i].first || std::abs(ccdf[i].ccdf - want_ccdf[i].second) > 1e-12)
      return {false, "ccdf differs at point " + std::to_string(i)};
  return {true, std::to_string(hours.size()) + " hours, " + std::to_string(cls.size()) + " hosts, " +
                    std::to_string(ccdf.size()) + " ccdf points"};
}

// 12. Identical inputs give identical bytes.
Outcome determinism() {
  Config cfg = campus_config();
  WorkloadSpec s = timer_workload(12);
  s.flows = 20000;
  s.followup_packets = 3;
  auto once = [&](std::string& records, std::string& metrics) {
    const Workload w = generate_workload(s, cfg);
    std::ostringstream rec, met;
    PipelineOptions opts;
    opts.metrics = &met;
    Pipeline p(cfg, opts);
    TsvRecordSink sink(rec);
    p.add_sink(&sink);
    std::ostringstream summary;
    p.run(w.packets).write(summary);
    records = rec.str();
    metrics = met.str() + summary.str();
  };
  std::string r1, m1, r2, m2;
  once(r1, m1);
  once(r2, m2);
  return {!r1.empty() && r1 == r2 && m1 == m2,
          fmt("%.0f record bytes, %.0f metric bytes", static_cast<double>(r1.size()), static_cast<double>(m1.size()))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"detection timeout classification", dt_classification},
      {"timer precision", timer_precision},
      {"batching amortization", batching_amortization},
      {"queue stability", queue_stability},
      {"filtering efficiency", filtering_efficiency},
      {"anonymizer", anonymizer},
      {"idle eviction", idle_eviction},
      {"golden scenario", golden_scenario},
      {"responder state machine", responder_machine},
      {"analytics oracle", analytics_oracle},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu: %s (%s; %.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
