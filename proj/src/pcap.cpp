#include "errmon/pcap.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>

#include "errmon/packet.hpp"

namespace errmon {

namespace {

std::uint32_t load32(const std::uint8_t* p, bool swap) {
  const std::uint32_t le = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                           (std::uint32_t{p[3]} << 24);
  if (!swap) return le;
  return (le >> 24) | ((le >> 8) & 0xff00) | ((le << 8) & 0xff0000) | (le << 24);
}

void store32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  os.write(b, 4);
}

void store16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

}  // namespace

PcapReadResult read_pcap(std::istream& in) {
  const std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 24) throw TruncatedFile("capture file shorter than its global header");

  // Files are read as little-endian first; the byte-swapped magic flips that.
  bool swap = false;
  bool nano = false;
  const std::uint32_t magic = load32(data.data(), false);
  if (magic == kPcapMagicMicro || magic == kPcapMagicNano) {
    nano = magic == kPcapMagicNano;
  } else {
    const std::uint32_t swapped = load32(data.data(), true);
    if (swapped != kPcapMagicMicro && swapped != kPcapMagicNano) throw BadMagic("not a capture file (bad magic)");
    swap = true;
    nano = swapped == kPcapMagicNano;
  }
  const std::uint32_t link = load32(data.data() + 20, swap);
  if (link != kLinkTypeEthernet) throw UnsupportedLinkType("unsupported link type " + std::to_string(link));

  PcapReadResult out;
  std::size_t off = 24;
  const double frac = nano ? 1e-9 : 1e-6;
  while (off < data.size()) {
    if (data.size() - off < 16) throw TruncatedFile("truncated record header at offset " + std::to_string(off));
    const std::uint32_t sec = load32(data.data() + off, swap);
    const std::uint32_t sub = load32(data.data() + off + 4, swap);
    const std::uint32_t incl = load32(data.data() + off + 8, swap);
    off += 16;
    if (data.size() - off < incl) throw TruncatedFile("truncated record body at offset " + std::to_string(off));
    const Seconds ts = static_cast<double>(sec) + static_cast<double>(sub) * frac;
    auto rec = parse_frame(std::span<const std::uint8_t>(data.data() + off, incl), ts);
    if (rec)
      out.packets.push_back(std::move(*rec));
    else
      ++out.skipped;
    off += incl;
  }
  return out;
}

PcapReadResult read_pcap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PcapError("cannot open " + path);
  return read_pcap(in);
}

PcapWriter::PcapWriter(std::ostream& os, std::uint32_t snaplen) : os_(&os) {
  store32(os, kPcapMagicMicro);
  store16(os, 2);
  store16(os, 4);
  store32(os, 0);
  store32(os, 0);
  store32(os, snaplen);
  store32(os, kLinkTypeEthernet);
}

bool PcapWriter::write(const PacketRecord& pkt) {
  double whole = 0.0;
  const double frac = std::modf(pkt.ts, &whole);
  auto sec = static_cast<std::uint32_t>(whole);
  auto usec = static_cast<std::uint32_t>(std::llround(frac * 1e6));
  if (usec >= 1000000) {
    ++sec;
    usec -= 1000000;
  }
  const auto len = static_cast<std::uint32_t>(pkt.raw.size());
  store32(*os_, sec);
  store32(*os_, usec);
  store32(*os_, len);
  store32(*os_, len);
  os_->write(reinterpret_cast<const char*>(pkt.raw.data()), static_cast<std::streamsize>(len));
  ++written_;
  return static_cast<bool>(*os_);
}

void write_pcap(const std::string& path, const std::vector<PacketRecord>& packets) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PcapError("cannot create " + path);
  PcapWriter w(os);
  for (const auto& p : packets)
    if (!w.write(p)) throw PcapError("write failed for " + path);
}

}  // namespace errmon
