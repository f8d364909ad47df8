// Sanity checks on the reference models themselves, using hand-worked
// values rather than library output.
#include <gtest/gtest.h>

#include "errmon/scripted_trace.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace errmon;
using oracle::Seg;

TEST(OracleCountdown, IdleRuleFiresAfterTtlOverInterval) {
  auto t = oracle::countdown(10, 1, std::vector<bool>(15, false));
  ASSERT_TRUE(t.fired_at_tick);
  EXPECT_EQ(*t.fired_at_tick, 10u);
  ASSERT_GE(t.ttl_after_tick.size(), 2u);
  EXPECT_DOUBLE_EQ(t.ttl_after_tick[0], 9.0);
}

TEST(OracleCountdown, TrafficResetsTheCountdown) {
  std::vector<bool> m(40, false);
  m[4] = true;
  auto t = oracle::countdown(10, 1, m);
  ASSERT_TRUE(t.fired_at_tick);
  EXPECT_GT(*t.fired_at_tick, 10u);
  EXPECT_FALSE(oracle::countdown(10, 1, std::vector<bool>(5, false)).fired_at_tick);
}

TEST(OracleResponder, HandshakeThenData) {
  const std::uint32_t isn = 777;
  auto o = oracle::responder_outcome({Seg::Syn, Seg::Ack, Seg::Data}, isn);
  ASSERT_EQ(o.replies.size(), 3u);
  ASSERT_TRUE(o.replies[0]);
  EXPECT_EQ(o.replies[0]->flags, tcp_flag::kSyn | tcp_flag::kAck);
  EXPECT_EQ(o.replies[0]->seq, isn);
  EXPECT_EQ(o.replies[0]->ack, oracle::kClientIsn + 1);
  EXPECT_FALSE(o.replies[1]);
  ASSERT_TRUE(o.replies[2]);
  EXPECT_EQ(o.replies[2]->flags, tcp_flag::kRst | tcp_flag::kAck);
  EXPECT_EQ(o.replies[2]->seq, isn + 1);
  EXPECT_EQ(o.transcripts, (std::vector<std::size_t>{oracle::kDataBytes}));
}

TEST(OracleResponder, UnknownConnectionGetsReset) {
  auto o = oracle::responder_outcome({Seg::Ack}, 5);
  ASSERT_TRUE(o.replies[0]);
  EXPECT_TRUE(o.replies[0]->flags & tcp_flag::kRst);
  EXPECT_TRUE(o.transcripts.empty());
  auto r = oracle::responder_outcome({Seg::Rst}, 5);
  EXPECT_FALSE(r.replies[0]);
}

TEST(OracleTransforms, ObfuscationKnownValue) {
  // 10.0.0.5 with key 0: the low byte 5 salts the upper three bytes.
  EXPECT_EQ(oracle::obfuscate(0x0a000005u, 0), 0x0f050505u);
  for (std::uint32_t ip : {0u, 0x0a000005u, 0xffffffffu, 0xc0a80101u})
    EXPECT_EQ(oracle::deobfuscate(oracle::obfuscate(ip, 0xdeadbeef), 0xdeadbeef), ip);
}

TEST(OracleTransforms, HeaderBytesAndChecksum) {
  auto syn = testutil::tcp(0, "1.2.3.4", 1, "10.0.0.1", 2, tcp_flag::kSyn, 64);
  EXPECT_EQ(oracle::header_bytes(syn.raw), 14u + 20 + 20);
  auto dgram = testutil::udp(0, "1.2.3.4", 1, "10.0.0.1", 2, 64);
  EXPECT_EQ(oracle::header_bytes(dgram.raw), 14u + 20 + 8);
  const std::uint16_t stored = static_cast<std::uint16_t>((syn.raw[24] << 8) | syn.raw[25]);
  EXPECT_EQ(oracle::ip_header_checksum(syn.raw, 14), stored);
}

TEST(OracleErroneous, MicroTraceHasTwoRecords) {
  const std::string dir = ERRMON_SOURCE_DIR "/scenarios/micro/";
  const Config cfg = load_config(dir + "micro.conf");
  auto want = oracle::expected_erroneous(load_trace(dir + "micro.trace"), cfg);
  ASSERT_EQ(want.size(), 2u);
  EXPECT_NEAR(want[0].earliest, 1.0, 1e-9);
  EXPECT_NEAR(want[1].earliest, 1.2, 1e-9);
  EXPECT_EQ(want[0].canonical.rfind("in|dt|dark|198.51.100.1|10.0.0.5|6|40001|23|02|", 0), 0u);
}
