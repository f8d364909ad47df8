#include <gtest/gtest.h>

#include <random>

#include "errmon/config.hpp"
#include "errmon/flow.hpp"
#include "errmon/packet.hpp"
#include "test_util.hpp"

using namespace errmon;
using testutil::ip;

TEST(Ipv4, ParsesAndPrintsDottedQuad) {
  auto a = Ipv4::parse("192.168.1.20");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->value, 0xc0a80114u);
  EXPECT_EQ(a->to_string(), "192.168.1.20");
  EXPECT_EQ(a->last_octet(), 20);
}

TEST(Ipv4, RejectsMalformedText) {
  for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.1.1.1", "1..2.3", "a.b.c.d", "1.2.3.4 ", "-1.2.3.4"})
    EXPECT_FALSE(Ipv4::parse(bad)) << bad;
}

TEST(Cidr, MembershipAndBareAddress) {
  auto c = Cidr::parse("10.1.0.0/17");
  ASSERT_TRUE(c);
  EXPECT_TRUE(c->contains(ip("10.1.127.255")));
  EXPECT_FALSE(c->contains(ip("10.1.128.0")));
  auto host = Cidr::parse("8.8.8.8");
  ASSERT_TRUE(host);
  EXPECT_EQ(host->prefix_len, 32);
  EXPECT_FALSE(Cidr::parse("10.0.0.0/33"));
}

TEST(IsInternal, PrefixMembership) {
  NetworkConfig net;
  net.internal_prefixes = {*Cidr::parse("10.0.0.0/8")};
  net.telescope_prefixes = {*Cidr::parse("10.9.0.0/23")};
  EXPECT_TRUE(is_internal(ip("10.200.3.4"), net));
  EXPECT_FALSE(is_internal(ip("8.8.8.8"), net));
  EXPECT_TRUE(is_internal(ip("10.9.1.7"), net));
  EXPECT_TRUE(net.is_telescope(ip("10.9.1.7")));
}

TEST(FlowKey, BothDirectionsShareTheKey) {
  auto fwd = testutil::tcp(0, "10.0.0.5", 1234, "8.8.8.8", 80, tcp_flag::kSyn);
  auto rev = testutil::tcp(0, "8.8.8.8", 80, "10.0.0.5", 1234, tcp_flag::kSyn | tcp_flag::kAck);
  EXPECT_EQ(make_flow_key(fwd), make_flow_key(rev));
}

TEST(FlowKey, EndpointsInLexicographicOrder) {
  auto p = testutil::udp(0, "1.1.1.1", 53, "2.2.2.2", 53);
  auto k = make_flow_key(p);
  EXPECT_EQ(k.lo.ip, ip("1.1.1.1"));
  EXPECT_LE(k.lo, k.hi);
}

TEST(FlowKey, EchoIdentifierActsAsPort) {
  auto req = testutil::echo(0, "10.0.0.1", "9.9.9.9", true, 7);
  auto rep = testutil::echo(0, "9.9.9.9", "10.0.0.1", false, 7);
  auto other = testutil::echo(0, "9.9.9.9", "10.0.0.1", false, 8);
  EXPECT_EQ(req.src_port, 7);
  EXPECT_EQ(make_flow_key(req), make_flow_key(rep));
  EXPECT_NE(make_flow_key(req), make_flow_key(other));
}

TEST(FlowKey, SymmetricOverRandomPackets) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100000; ++i) {
    PacketRecord p;
    p.src_ip = Ipv4(static_cast<std::uint32_t>(rng()));
    p.dst_ip = Ipv4(static_cast<std::uint32_t>(rng()));
    p.proto = (i % 3 == 0) ? 6 : (i % 3 == 1 ? 17 : 1);
    p.src_port = static_cast<std::uint16_t>(rng());
    p.dst_port = static_cast<std::uint16_t>(rng());
    p.icmp_type = static_cast<std::uint8_t>(rng() % 16);
    PacketRecord r = p;
    std::swap(r.src_ip, r.dst_ip);
    std::swap(r.src_port, r.dst_port);
    const auto k = make_flow_key(p);
    ASSERT_EQ(k, make_flow_key(r));
    ASSERT_LE(k.lo, k.hi);
  }
}

TEST(ClassifyResponse, SynAckAnswersSyn) {
  auto syn = testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.2", 80, tcp_flag::kSyn);
  auto sa = testutil::tcp(0, "10.0.0.2", 80, "1.2.3.4", 40000, tcp_flag::kSyn | tcp_flag::kAck);
  EXPECT_EQ(classify_response(syn, sa), ResponseClass::Response);
  EXPECT_EQ(classify_response(syn, syn), ResponseClass::NotResponse);
}

TEST(ClassifyResponse, IcmpErrorIsNeverAnAnswer) {
  auto req = testutil::udp(0, "10.0.0.3", 5000, "9.9.9.9", 123);
  for (std::uint8_t type : {icmp_type::kDestUnreachable, icmp_type::kTimeExceeded, icmp_type::kParameterProblem}) {
    auto err = build_packet(icmp_error_spec(req, ip("9.9.9.9"), type, 3, 0.1));
    EXPECT_TRUE(is_icmp_error(err));
    EXPECT_EQ(classify_response(req, err), ResponseClass::NotResponse);
    EXPECT_EQ(classify_response(err, req), ResponseClass::NotResponse);
  }
}

TEST(ClassifyResponse, EchoReplyAnswersEchoRequest) {
  auto req = testutil::echo(0, "10.0.0.1", "9.9.9.9", true, 9);
  auto rep = testutil::echo(0, "9.9.9.9", "10.0.0.1", false, 9);
  EXPECT_EQ(classify_response(req, rep), ResponseClass::Response);
}

TEST(ClassifyResponse, NeverResponseForRandomIcmpErrors) {
  std::mt19937_64 rng(5);
  auto req = testutil::tcp(0, "1.2.3.4", 40000, "10.0.0.2", 80, tcp_flag::kSyn);
  for (int i = 0; i < 1000; ++i) {
    PacketRecord c;
    c.proto = 1;
    c.icmp_type = std::array<std::uint8_t, 3>{3, 11, 12}[rng() % 3];
    c.src_ip = req.dst_ip;
    c.dst_ip = req.src_ip;
    c.src_port = static_cast<std::uint16_t>(rng());
    c.dst_port = static_cast<std::uint16_t>(rng());
    EXPECT_EQ(classify_response(req, c), ResponseClass::NotResponse);
  }
}

TEST(TcpFlags, LetterRendering) {
  EXPECT_EQ(tcp_flags_string(tcp_flag::kSyn | tcp_flag::kAck), "SA");
  EXPECT_EQ(tcp_flags_string(0), "-");
}
