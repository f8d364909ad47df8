#pragma once

#include <cstdint>
#include <span>

#include "errmon/config.hpp"
#include "errmon/types.hpp"

namespace errmon {

/// XOR obfuscation with a key salted by the address's own last octet. The
/// salt occupies the three high-order bytes, so the low byte only sees the
/// key and the whole mapping can be inverted.
Ipv4 obfuscate_ip(Ipv4 ip, std::uint32_t key);
Ipv4 deobfuscate_ip(Ipv4 obfuscated, std::uint32_t key);

/// Bytes of `raw` kept by truncation: L2 + IP header + L4 header (TCP data
/// offset, 8 bytes for UDP/ICMP/unknown). `malformed` is set when the
/// headers are inconsistent and the fallback length was used.
std::size_t truncation_length(std::span<const std::uint8_t> raw, std::uint8_t proto, bool* malformed = nullptr);

/// Drops every byte past the L4 header; parsed header fields are kept.
PacketRecord truncate(const PacketRecord& pkt);

/// Which endpoints of a mirrored packet are internal, and whether the
/// packet skipped the privacy transforms because it involves an
/// impersonated endpoint. Carried beside the packet like switch metadata.
struct MirrorMeta {
  bool src_internal = false;
  bool dst_internal = false;
  bool bypass = false;

  friend bool operator==(const MirrorMeta&, const MirrorMeta&) = default;
};

/// The mirror-path transform stage.
class MirrorAnonymizer {
 public:
  explicit MirrorAnonymizer(const NetworkConfig& cfg) : cfg_(&cfg) {}

  MirrorMeta classify(const PacketRecord& pkt) const;
  /// Truncated copy with internal addresses obfuscated, or the untouched
  /// packet when `meta.bypass`.
  PacketRecord apply(const PacketRecord& pkt, const MirrorMeta& meta) const;
  /// Real address behind one side of a mirrored packet.
  Ipv4 reveal(Ipv4 seen, bool internal, const MirrorMeta& meta) const;

  std::uint64_t malformed() const { return malformed_; }

 private:
  const NetworkConfig* cfg_;
  mutable std::uint64_t malformed_ = 0;
};

}  // namespace errmon
