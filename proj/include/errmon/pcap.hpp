#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "errmon/types.hpp"

namespace errmon {

class PcapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagic : public PcapError {
 public:
  using PcapError::PcapError;
};
class TruncatedFile : public PcapError {
 public:
  using PcapError::PcapError;
};
class UnsupportedLinkType : public PcapError {
 public:
  using PcapError::PcapError;
};

inline constexpr std::uint32_t kPcapMagicMicro = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicNano = 0xa1b23c4d;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;

struct PcapReadResult {
  std::vector<PacketRecord> packets;
  /// Frames that were not Ethernet/IPv4 or were structurally broken.
  std::size_t skipped = 0;
};

/// Reads a classic capture file (either byte order, micro- or nanosecond
/// timestamps, Ethernet link type).
PcapReadResult read_pcap(std::istream& in);
PcapReadResult read_pcap(const std::string& path);

/// Writes microsecond-resolution, native little-endian capture files.
class PcapWriter {
 public:
  explicit PcapWriter(std::ostream& os, std::uint32_t snaplen = 65535);
  bool write(const PacketRecord& pkt);
  std::size_t written() const { return written_; }

 private:
  std::ostream* os_;
  std::size_t written_ = 0;
};

void write_pcap(const std::string& path, const std::vector<PacketRecord>& packets);

}  // namespace errmon
