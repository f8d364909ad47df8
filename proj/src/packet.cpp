#include "errmon/packet.hpp"

#include <algorithm>

namespace errmon {
namespace {

constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;

void put16(std::vector<std::uint8_t>& b, std::size_t off, std::uint16_t v) {
  b[off] = static_cast<std::uint8_t>(v >> 8);
  b[off + 1] = static_cast<std::uint8_t>(v);
}

void put32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v) {
  put16(b, off, static_cast<std::uint16_t>(v >> 16));
  put16(b, off + 2, static_cast<std::uint16_t>(v));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{get16(b, off)} << 16) | get16(b, off + 2);
}

bool is_echo(std::uint8_t type) { return type == icmp_type::kEchoRequest || type == icmp_type::kEchoReply; }

std::uint32_t pseudo_header_sum(Ipv4 src, Ipv4 dst, std::uint8_t proto, std::size_t l4_len) {
  std::uint32_t sum = 0;
  sum += src.value >> 16;
  sum += src.value & 0xffff;
  sum += dst.value >> 16;
  sum += dst.value & 0xffff;
  sum += proto;
  sum += static_cast<std::uint32_t>(l4_len);
  return sum;
}

}  // namespace

std::uint16_t inet_checksum(std::span<const std::uint8_t> data, std::uint32_t initial) {
  std::uint64_t sum = initial;
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
  if (i < data.size()) sum += std::uint32_t{data[i]} << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum & 0xffff);
}

PacketRecord build_packet(const PacketSpec& spec) {
  std::vector<std::uint8_t> payload = spec.payload;
  if (payload.empty()) payload.assign(spec.payload_len, spec.payload_fill);

  const std::size_t ip_len = 20 + 4 * std::size_t{spec.ip_option_words};
  std::size_t l4_len = 0;
  switch (spec.proto) {
    case to_u8(Proto::Tcp): l4_len = 20 + 4 * std::size_t{spec.tcp_option_words}; break;
    case to_u8(Proto::Udp): l4_len = kUdpHeaderLen; break;
    case to_u8(Proto::Icmp): l4_len = kIcmpHeaderLen; break;
    default: l4_len = 0; break;
  }

  std::vector<std::uint8_t> b(kEthernetHeaderLen + ip_len + l4_len + payload.size(), 0);
  // Locally administered MACs; the pipeline never looks at L2 addresses.
  const std::uint8_t dst_mac[6] = {0x02, 0, 0, 0, 0, 0x02};
  const std::uint8_t src_mac[6] = {0x02, 0, 0, 0, 0, 0x01};
  std::copy(std::begin(dst_mac), std::end(dst_mac), b.begin());
  std::copy(std::begin(src_mac), std::end(src_mac), b.begin() + 6);
  put16(b, 12, kEtherTypeIpv4);

  const std::size_t ip = kEthernetHeaderLen;
  b[ip] = static_cast<std::uint8_t>(0x40 | (ip_len / 4));
  put16(b, ip + 2, static_cast<std::uint16_t>(ip_len + l4_len + payload.size()));
  put16(b, ip + 4, spec.ip_id);
  put16(b, ip + 6, 0x4000);
  b[ip + 8] = spec.ttl;
  b[ip + 9] = spec.proto;
  put32(b, ip + 12, spec.src.value);
  put32(b, ip + 16, spec.dst.value);
  for (std::size_t i = ip + 20; i < ip + ip_len; ++i) b[i] = 0x01;  // NOP options
  put16(b, ip + 10, inet_checksum(std::span(b).subspan(ip, ip_len)));

  const std::size_t l4 = ip + ip_len;
  std::copy(payload.begin(), payload.end(), b.begin() + static_cast<std::ptrdiff_t>(l4 + l4_len));
  switch (spec.proto) {
    case to_u8(Proto::Tcp): {
      put16(b, l4, spec.src_port);
      put16(b, l4 + 2, spec.dst_port);
      put32(b, l4 + 4, spec.tcp_seq);
      put32(b, l4 + 8, spec.tcp_ack);
      b[l4 + 12] = static_cast<std::uint8_t>((l4_len / 4) << 4);
      b[l4 + 13] = spec.tcp_flags;
      put16(b, l4 + 14, 65535);
      for (std::size_t i = l4 + 20; i < l4 + l4_len; ++i) b[i] = 0x01;
      const auto seg = std::span(b).subspan(l4);
      put16(b, l4 + 16, inet_checksum(seg, pseudo_header_sum(spec.src, spec.dst, spec.proto, seg.size())));
      break;
    }
    case to_u8(Proto::Udp): {
      put16(b, l4, spec.src_port);
      put16(b, l4 + 2, spec.dst_port);
      put16(b, l4 + 4, static_cast<std::uint16_t>(kUdpHeaderLen + payload.size()));
      const auto seg = std::span(b).subspan(l4);
      put16(b, l4 + 6, inet_checksum(seg, pseudo_header_sum(spec.src, spec.dst, spec.proto, seg.size())));
      break;
    }
    case to_u8(Proto::Icmp): {
      b[l4] = spec.icmp_type;
      b[l4 + 1] = spec.icmp_code;
      if (is_echo(spec.icmp_type)) {
        put16(b, l4 + 4, spec.icmp_id);
        put16(b, l4 + 6, spec.icmp_seq);
      }
      put16(b, l4 + 2, inet_checksum(std::span(b).subspan(l4)));
      break;
    }
    default: break;
  }

  auto parsed = parse_frame(b, spec.ts);
  return std::move(*parsed);
}

std::optional<std::size_t> l4_offset(std::span<const std::uint8_t> raw) {
  if (raw.size() < kEthernetHeaderLen + 20) return std::nullopt;
  if (get16(raw, 12) != kEtherTypeIpv4) return std::nullopt;
  const std::uint8_t vihl = raw[kEthernetHeaderLen];
  if ((vihl >> 4) != 4) return std::nullopt;
  const std::size_t ihl = std::size_t{vihl & 0x0fu} * 4;
  if (ihl < 20 || raw.size() < kEthernetHeaderLen + ihl) return std::nullopt;
  return kEthernetHeaderLen + ihl;
}

std::optional<PacketRecord> parse_frame(std::span<const std::uint8_t> frame, Seconds ts) {
  auto l4 = l4_offset(frame);
  if (!l4) return std::nullopt;
  const std::size_t ip = kEthernetHeaderLen;

  PacketRecord r;
  r.ts = ts;
  r.proto = frame[ip + 9];
  r.src_ip = Ipv4(get32(frame, ip + 12));
  r.dst_ip = Ipv4(get32(frame, ip + 16));
  const std::size_t avail = frame.size() - *l4;

  std::size_t l4_hdr = 0;
  switch (r.proto) {
    case to_u8(Proto::Tcp): {
      if (avail < 20) return std::nullopt;
      r.src_port = get16(frame, *l4);
      r.dst_port = get16(frame, *l4 + 2);
      r.tcp_seq = get32(frame, *l4 + 4);
      r.tcp_ack = get32(frame, *l4 + 8);
      r.tcp_flags = frame[*l4 + 13] & 0x3f;
      const std::size_t doff = static_cast<std::size_t>(frame[*l4 + 12] >> 4) * 4;
      if (doff < 20) return std::nullopt;
      l4_hdr = std::min(doff, avail);
      break;
    }
    case to_u8(Proto::Udp):
      if (avail < kUdpHeaderLen) return std::nullopt;
      r.src_port = get16(frame, *l4);
      r.dst_port = get16(frame, *l4 + 2);
      l4_hdr = kUdpHeaderLen;
      break;
    case to_u8(Proto::Icmp):
      if (avail < kIcmpHeaderLen) return std::nullopt;
      r.icmp_type = frame[*l4];
      r.icmp_code = frame[*l4 + 1];
      if (is_echo(r.icmp_type)) {
        r.src_port = get16(frame, *l4 + 4);
        r.dst_port = r.src_port;
      }
      l4_hdr = kIcmpHeaderLen;
      break;
    default:
      l4_hdr = 0;
      break;
  }
  r.raw.assign(frame.begin(), frame.end());
  r.header_len = static_cast<std::uint32_t>(*l4 + l4_hdr);
  r.payload_len = static_cast<std::uint32_t>(r.raw.size() - r.header_len);
  return r;
}

PacketSpec icmp_error_spec(const PacketRecord& offending, Ipv4 reporter, std::uint8_t type,
                           std::uint8_t code, Seconds ts) {
  PacketSpec s;
  s.ts = ts;
  s.src = reporter;
  s.dst = offending.src_ip;
  s.proto = to_u8(Proto::Icmp);
  s.icmp_type = type;
  s.icmp_code = code;
  const auto l4 = l4_offset(offending.raw).value_or(kEthernetHeaderLen + 20);
  const std::size_t quote_end = std::min(offending.raw.size(), l4 + 8);
  s.payload.assign(offending.raw.begin() + kEthernetHeaderLen,
                   offending.raw.begin() + static_cast<std::ptrdiff_t>(quote_end));
  return s;
}

void rewrite_addresses(PacketRecord& pkt, Ipv4 src, Ipv4 dst) {
  pkt.src_ip = src;
  pkt.dst_ip = dst;
  auto l4 = l4_offset(pkt.raw);
  if (!l4) return;
  const std::size_t ip = kEthernetHeaderLen;
  put32(pkt.raw, ip + 12, src.value);
  put32(pkt.raw, ip + 16, dst.value);
  put16(pkt.raw, ip + 10, 0);
  put16(pkt.raw, ip + 10, inet_checksum(std::span(pkt.raw).subspan(ip, *l4 - ip)));
}

}  // namespace errmon
