#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "errmon/replay.hpp"
#include "errmon/scripted_trace.hpp"
#include "test_util.hpp"

using namespace errmon;

namespace {

const std::string kScenarios = ERRMON_SOURCE_DIR "/scenarios/";

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

/// Runs scenarios/<name>/<name>.{conf,trace} and compares the event log
/// with <name>.events. Set ERRMON_UPDATE_GOLDEN=1 to rewrite the file.
void check_golden(const std::string& name) {
  const std::string base = kScenarios + name + "/" + name;
  Config cfg = load_config(base + ".conf");
  PipelineOptions opts;
  opts.event_log = true;
  Pipeline p(cfg, opts);
  p.run(load_trace(base + ".trace"));
  const auto& got = p.event_log();
  if (const char* up = std::getenv("ERRMON_UPDATE_GOLDEN"); up && std::string(up) == "1") {
    std::ofstream out(base + ".events");
    for (const auto& l : got) out << l << '\n';
    GTEST_SKIP() << "rewrote " << base << ".events";
  }
  const auto want = read_lines(base + ".events");
  ASSERT_FALSE(want.empty()) << "missing golden file " << base << ".events";
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) ASSERT_EQ(got[i], want[i]) << "line " << i + 1;
  EXPECT_EQ(got.size(), want.size());
}

}  // namespace

TEST(Replay, MicroEventLogMatchesGolden) { check_golden("micro"); }
TEST(Replay, ImpersonationEventLogMatchesGolden) { check_golden("impersonation"); }
TEST(Replay, IcmpAndLateResponseEventLogMatchesGolden) { check_golden("icmp_late"); }

TEST(Replay, MicroSummary) {
  Config cfg = load_config(kScenarios + "micro/micro.conf");
  Pipeline p(cfg);
  VectorRecordSink sink;
  p.add_sink(&sink);
  auto s = p.run(load_trace(kScenarios + "micro/micro.trace"));
  EXPECT_EQ(s.packets, 7u);
  EXPECT_EQ(s.sw.dynamic_hits, 1u);
  EXPECT_EQ(s.sw.mirrored, 6u);
  EXPECT_EQ(s.sw.rules_installed, 2u);
  EXPECT_EQ(s.fsd.duplicates_dropped, 1u);
  EXPECT_EQ(s.fsd.transient_dropped, 1u);
  EXPECT_EQ(s.fsd.expired, 2u);
  EXPECT_DOUBLE_EQ(s.end_time, 14.5);
  ASSERT_EQ(sink.records.size(), 2u);
  EXPECT_EQ(sink.records[0].pkt.dst_port, 23);
  EXPECT_EQ(sink.records[0].dst_liveness, Liveness::Dark);
  EXPECT_EQ(sink.records[1].pkt.proto, 17);
  EXPECT_DOUBLE_EQ(s.buffering.max, 1.0);
  std::ostringstream os;
  s.write(os);
  EXPECT_NE(os.str().find("collector.erroneous 2\n"), std::string::npos);
}

TEST(Replay, ImpersonationCapturesTranscript) {
  Config cfg = load_config(kScenarios + "impersonation/impersonation.conf");
  Pipeline p(cfg);
  auto s = p.run(load_trace(kScenarios + "impersonation/impersonation.trace"));
  EXPECT_EQ(s.transcripts, 1u);
  EXPECT_EQ(s.responder_replies, 2u);
  ASSERT_EQ(p.replies().size(), 2u);
  EXPECT_EQ(p.replies()[0].tcp_flags, tcp_flag::kSyn | tcp_flag::kAck);
  EXPECT_EQ(p.replies()[1].tcp_flags, tcp_flag::kRst | tcp_flag::kAck);
  EXPECT_EQ(p.collector().responder().transcripts()[0].payload.size(), 40u);
  EXPECT_EQ(s.collector.records, 4u);
}

TEST(Replay, FedBackRepliesReachTheSwitch) {
  Config cfg = load_config(kScenarios + "impersonation/impersonation.conf");
  PipelineOptions opts;
  opts.feed_replies = true;
  Pipeline p(cfg, opts);
  auto s = p.run(load_trace(kScenarios + "impersonation/impersonation.trace"));
  // The SYN-ACK is mirrored like any outgoing packet, so the client's ACK
  // answers it: the flow turns benign and its rules keep the data segment
  // away from the responder.
  EXPECT_EQ(s.injected, 1u);
  EXPECT_EQ(s.sw.packets, 5u);
  EXPECT_EQ(s.sw.rules_installed, 2u);
  EXPECT_EQ(s.transcripts, 0u);
}

TEST(Replay, EmptyTrace) {
  Config cfg = testutil::small_config();
  Pipeline p(cfg);
  auto s = p.run({});
  EXPECT_EQ(s.packets, 0u);
  EXPECT_EQ(s.collector.records, 0u);
  EXPECT_DOUBLE_EQ(s.end_time, 0.0);
}

TEST(Replay, MetricsAndBatchLogsHaveHeaders) {
  Config cfg = load_config(kScenarios + "micro/micro.conf");
  std::ostringstream metrics, batches;
  PipelineOptions opts;
  opts.metrics = &metrics;
  opts.batch_log = &batches;
  Pipeline p(cfg, opts);
  p.run(load_trace(kScenarios + "micro/micro.trace"));
  EXPECT_EQ(metrics.str().rfind("#t ring", 0), 0u);
  EXPECT_EQ(batches.str().rfind("#t installs", 0), 0u);
  // Header plus the install batch and the two delete batches.
  const std::string log = batches.str();
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
}

TEST(Percentile, NearestRank) {
  EXPECT_DOUBLE_EQ(percentile({}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(percentile({3, 1, 2}, 0.5), 2.0);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  EXPECT_DOUBLE_EQ(percentile(v, 0.99), 99.0);
  EXPECT_DOUBLE_EQ(percentile(v, 1.0), 100.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
}
