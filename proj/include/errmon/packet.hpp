#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "errmon/types.hpp"

namespace errmon {

inline constexpr std::size_t kEthernetHeaderLen = 14;
inline constexpr std::size_t kUdpHeaderLen = 8;
inline constexpr std::size_t kIcmpHeaderLen = 8;
/// Bytes of L4 header kept for protocols we do not parse.
inline constexpr std::size_t kUnknownL4KeepLen = 8;

/// Field-level description of a frame to synthesize.
struct PacketSpec {
  Seconds ts = 0.0;
  Ipv4 src;
  Ipv4 dst;
  std::uint8_t proto = to_u8(Proto::Tcp);
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t tcp_flags = 0;
  std::uint32_t tcp_seq = 0;
  std::uint32_t tcp_ack = 0;
  /// Extra 32-bit words of TCP options (data offset = 5 + words).
  std::uint8_t tcp_option_words = 0;
  /// Extra 32-bit words of IP options (IHL = 5 + words).
  std::uint8_t ip_option_words = 0;
  std::uint8_t icmp_type = 0;
  std::uint8_t icmp_code = 0;
  /// Echo identifier/sequence; ignored for non-echo ICMP.
  std::uint16_t icmp_id = 0;
  std::uint16_t icmp_seq = 0;
  std::uint16_t ip_id = 0;
  std::uint8_t ttl = 64;
  /// When `payload` is empty, `payload_len` bytes of `payload_fill` are used.
  std::uint32_t payload_len = 0;
  std::uint8_t payload_fill = 0xab;
  std::vector<std::uint8_t> payload;
};

/// Serializes an Ethernet/IPv4 frame and returns it parsed.
PacketRecord build_packet(const PacketSpec& spec);

/// Parses an Ethernet frame; nullopt for non-IPv4 or structurally broken
/// frames.
std::optional<PacketRecord> parse_frame(std::span<const std::uint8_t> frame, Seconds ts);

/// ICMP error message from `reporter` to the sender of `offending`, quoting
/// its IP header plus the first 8 L4 bytes.
PacketSpec icmp_error_spec(const PacketRecord& offending, Ipv4 reporter, std::uint8_t type,
                           std::uint8_t code, Seconds ts);

/// Rewrites the IP addresses in both the parsed fields and the raw bytes,
/// refreshing the IP header checksum.
void rewrite_addresses(PacketRecord& pkt, Ipv4 src, Ipv4 dst);

/// Internet checksum (RFC 1071) over `data`.
std::uint16_t inet_checksum(std::span<const std::uint8_t> data, std::uint32_t initial = 0);

/// Offset of the L4 header within `raw`; nullopt when the IP header is
/// unusable.
std::optional<std::size_t> l4_offset(std::span<const std::uint8_t> raw);

}  // namespace errmon
