#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace errmon {

/// Virtual time in seconds.
using Seconds = double;

struct Ipv4 {
  std::uint32_t value = 0;

  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
  static constexpr Ipv4 from_octets(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    return Ipv4((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d);
  }

  constexpr std::uint8_t last_octet() const { return static_cast<std::uint8_t>(value & 0xff); }

  /// Parses dotted-quad notation; nullopt on malformed input.
  static std::optional<Ipv4> parse(std::string_view text);
  std::string to_string() const;

  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;
};

struct Cidr {
  Ipv4 network;
  int prefix_len = 32;

  constexpr std::uint32_t mask() const {
    return prefix_len == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix_len);
  }
  constexpr bool contains(Ipv4 ip) const { return (ip.value & mask()) == (network.value & mask()); }
  constexpr std::uint64_t size() const { return std::uint64_t{1} << (32 - prefix_len); }
  constexpr Ipv4 first() const { return Ipv4(network.value & mask()); }

  /// "a.b.c.d/len"; a bare address is a /32.
  static std::optional<Cidr> parse(std::string_view text);
  std::string to_string() const;

  friend constexpr bool operator==(const Cidr&, const Cidr&) = default;
};

enum class Proto : std::uint8_t { Icmp = 1, Tcp = 6, Udp = 17 };

constexpr std::uint8_t to_u8(Proto p) { return static_cast<std::uint8_t>(p); }

std::string proto_name(std::uint8_t proto);

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
}  // namespace tcp_flag

std::string tcp_flags_string(std::uint8_t flags);

namespace icmp_type {
inline constexpr std::uint8_t kEchoReply = 0;
inline constexpr std::uint8_t kDestUnreachable = 3;
inline constexpr std::uint8_t kEchoRequest = 8;
inline constexpr std::uint8_t kTimeExceeded = 11;
inline constexpr std::uint8_t kParameterProblem = 12;
}  // namespace icmp_type

struct Endpoint {
  Ipv4 ip;
  std::uint16_t port = 0;

  constexpr std::uint64_t packed() const { return (std::uint64_t{ip.value} << 16) | port; }
  std::string to_string() const;

  friend constexpr auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// One captured packet with its parsed L3/L4 fields. For ICMP echo the
/// identifier is carried in both port fields; every other ICMP message has
/// zero ports.
struct PacketRecord {
  Seconds ts = 0.0;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  std::uint8_t proto = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t tcp_flags = 0;
  std::uint32_t tcp_seq = 0;
  std::uint32_t tcp_ack = 0;
  std::uint8_t icmp_type = 0;
  std::uint8_t icmp_code = 0;
  std::uint32_t header_len = 0;
  std::uint32_t payload_len = 0;
  std::vector<std::uint8_t> raw;

  Endpoint src() const { return {src_ip, src_port}; }
  Endpoint dst() const { return {dst_ip, dst_port}; }
  bool is_tcp() const { return proto == to_u8(Proto::Tcp); }
  bool is_udp() const { return proto == to_u8(Proto::Udp); }
  bool is_icmp() const { return proto == to_u8(Proto::Icmp); }

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

/// Canonical bidirectional 5-tuple: endpoints in ascending (ip, port) order.
struct FlowKey {
  Endpoint lo;
  Endpoint hi;
  std::uint8_t proto = 0;

  std::string to_string() const;
  friend constexpr auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

/// Exact-match service endpoint (ip, port, proto).
struct ServiceKey {
  Ipv4 ip;
  std::uint16_t port = 0;
  std::uint8_t proto = 0;

  Endpoint endpoint() const { return {ip, port}; }
  std::string to_string() const;
  friend constexpr auto operator<=>(const ServiceKey&, const ServiceKey&) = default;
};

/// 64-bit finalizer from splitmix64.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_flow_key(const FlowKey& key, std::uint64_t seed);

}  // namespace errmon

template <>
struct std::hash<errmon::Ipv4> {
  std::size_t operator()(errmon::Ipv4 ip) const noexcept { return errmon::mix64(ip.value); }
};

template <>
struct std::hash<errmon::Endpoint> {
  std::size_t operator()(const errmon::Endpoint& ep) const noexcept { return errmon::mix64(ep.packed()); }
};

template <>
struct std::hash<errmon::FlowKey> {
  std::size_t operator()(const errmon::FlowKey& k) const noexcept { return errmon::hash_flow_key(k, 0); }
};

template <>
struct std::hash<errmon::ServiceKey> {
  std::size_t operator()(const errmon::ServiceKey& k) const noexcept {
    return errmon::mix64((std::uint64_t{k.ip.value} << 24) ^ (std::uint64_t{k.port} << 8) ^ k.proto);
  }
};
