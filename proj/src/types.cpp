#include "errmon/types.hpp"

#include <charconv>
#include <cstdio>

namespace errmon {

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc{} || next == p || octet > 255 || next - p > 3) return std::nullopt;
    value = (value << 8) | octet;
    p = next;
    if (i < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return Ipv4(value);
}

std::string Ipv4::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value >> 24) & 0xff, (value >> 16) & 0xff,
                (value >> 8) & 0xff, value & 0xff);
  return buf;
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  auto slash = text.find('/');
  auto ip = Ipv4::parse(text.substr(0, slash));
  if (!ip) return std::nullopt;
  int len = 32;
  if (slash != std::string_view::npos) {
    auto rest = text.substr(slash + 1);
    auto [next, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), len);
    if (ec != std::errc{} || next != rest.data() + rest.size() || len < 0 || len > 32) return std::nullopt;
  }
  Cidr c{*ip, len};
  c.network = c.first();
  return c;
}

std::string Cidr::to_string() const { return network.to_string() + "/" + std::to_string(prefix_len); }

std::string proto_name(std::uint8_t proto) {
  switch (proto) {
    case to_u8(Proto::Tcp): return "TCP";
    case to_u8(Proto::Udp): return "UDP";
    case to_u8(Proto::Icmp): return "ICMP";
    default: return std::to_string(proto);
  }
}

std::string tcp_flags_string(std::uint8_t flags) {
  static constexpr struct {
    std::uint8_t bit;
    char c;
  } kNames[] = {{tcp_flag::kSyn, 'S'}, {tcp_flag::kAck, 'A'}, {tcp_flag::kFin, 'F'},
                {tcp_flag::kRst, 'R'}, {tcp_flag::kPsh, 'P'}, {tcp_flag::kUrg, 'U'}};
  std::string out;
  for (const auto& n : kNames)
    if (flags & n.bit) out.push_back(n.c);
  return out.empty() ? "-" : out;
}

std::string Endpoint::to_string() const { return ip.to_string() + ":" + std::to_string(port); }

std::string FlowKey::to_string() const {
  return proto_name(proto) + " " + lo.to_string() + " <-> " + hi.to_string();
}

std::string ServiceKey::to_string() const {
  return proto_name(proto) + " " + ip.to_string() + ":" + std::to_string(port);
}

std::uint64_t hash_flow_key(const FlowKey& key, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ key.lo.packed());
  h = mix64(h ^ key.hi.packed());
  return mix64(h ^ key.proto);
}

}  // namespace errmon
