#include "errmon/anonymizer.hpp"

#include <algorithm>

#include "errmon/packet.hpp"

namespace errmon {
namespace {

constexpr std::uint32_t salt_of(std::uint8_t last) {
  const std::uint32_t b = last;
  return (b << 24) | (b << 16) | (b << 8);
}

}  // namespace

Ipv4 obfuscate_ip(Ipv4 ip, std::uint32_t key) {
  return Ipv4(ip.value ^ key ^ salt_of(ip.last_octet()));
}

Ipv4 deobfuscate_ip(Ipv4 obfuscated, std::uint32_t key) {
  const auto last = static_cast<std::uint8_t>((obfuscated.value ^ key) & 0xff);
  return Ipv4(obfuscated.value ^ key ^ salt_of(last));
}

std::size_t truncation_length(std::span<const std::uint8_t> raw, std::uint8_t proto, bool* malformed) {
  auto set_malformed = [&](bool v) {
    if (malformed) *malformed = v;
  };
  auto l4 = l4_offset(raw);
  if (!l4) {
    set_malformed(true);
    return std::min(raw.size(), kEthernetHeaderLen + 20 + kUnknownL4KeepLen);
  }
  const std::size_t fallback = std::min(raw.size(), *l4 + kUnknownL4KeepLen);
  std::size_t keep = 0;
  switch (proto) {
    case to_u8(Proto::Tcp): {
      if (raw.size() < *l4 + 20) {
        set_malformed(true);
        return fallback;
      }
      const std::size_t doff = static_cast<std::size_t>(raw[*l4 + 12] >> 4) * 4;
      if (doff < 20 || raw.size() < *l4 + doff) {
        set_malformed(true);
        return fallback;
      }
      keep = *l4 + doff;
      break;
    }
    case to_u8(Proto::Udp): keep = *l4 + kUdpHeaderLen; break;
    case to_u8(Proto::Icmp): keep = *l4 + kIcmpHeaderLen; break;
    default: keep = *l4 + kUnknownL4KeepLen; break;
  }
  if (keep > raw.size()) {
    set_malformed(true);
    return fallback;
  }
  set_malformed(false);
  return keep;
}

PacketRecord truncate(const PacketRecord& pkt) {
  PacketRecord out = pkt;
  const std::size_t keep = truncation_length(pkt.raw, pkt.proto);
  out.raw.resize(keep);
  out.header_len = static_cast<std::uint32_t>(keep);
  out.payload_len = 0;
  return out;
}

MirrorMeta MirrorAnonymizer::classify(const PacketRecord& pkt) const {
  MirrorMeta m;
  m.src_internal = is_internal(pkt.src_ip, *cfg_);
  m.dst_internal = is_internal(pkt.dst_ip, *cfg_);
  m.bypass = cfg_->is_impersonated(pkt.src(), pkt.proto) || cfg_->is_impersonated(pkt.dst(), pkt.proto);
  return m;
}

PacketRecord MirrorAnonymizer::apply(const PacketRecord& pkt, const MirrorMeta& meta) const {
  if (meta.bypass || !cfg_->anonymize) return pkt;
  bool bad = false;
  truncation_length(pkt.raw, pkt.proto, &bad);
  if (bad) ++malformed_;
  PacketRecord out = truncate(pkt);
  const Ipv4 src = meta.src_internal ? obfuscate_ip(pkt.src_ip, cfg_->anonymization_key) : pkt.src_ip;
  const Ipv4 dst = meta.dst_internal ? obfuscate_ip(pkt.dst_ip, cfg_->anonymization_key) : pkt.dst_ip;
  if (src != pkt.src_ip || dst != pkt.dst_ip) rewrite_addresses(out, src, dst);
  return out;
}

Ipv4 MirrorAnonymizer::reveal(Ipv4 seen, bool internal, const MirrorMeta& meta) const {
  if (!internal || meta.bypass || !cfg_->anonymize) return seen;
  return deobfuscate_ip(seen, cfg_->anonymization_key);
}

}  // namespace errmon
