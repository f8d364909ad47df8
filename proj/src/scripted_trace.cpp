#include "errmon/scripted_trace.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "errmon/packet.hpp"
#include "errmon/pcap.hpp"

namespace errmon {

namespace {

std::uint64_t to_uint(const std::string& s, std::uint64_t max) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos, 0);
  if (pos != s.size() || v > max) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::uint8_t flags_from(const std::string& s) {
  std::uint8_t f = 0;
  for (char c : s) {
    switch (c) {
      case 'S': f |= tcp_flag::kSyn; break;
      case 'A': f |= tcp_flag::kAck; break;
      case 'F': f |= tcp_flag::kFin; break;
      case 'R': f |= tcp_flag::kRst; break;
      case 'P': f |= tcp_flag::kPsh; break;
      case 'U': f |= tcp_flag::kUrg; break;
      case '-': break;
      default: throw std::invalid_argument("bad TCP flag '" + std::string(1, c) + "'");
    }
  }
  return f;
}

Ipv4 ip_from(const std::string& s) {
  auto ip = Ipv4::parse(s);
  if (!ip) throw std::invalid_argument("bad address '" + s + "'");
  return *ip;
}

Endpoint endpoint_from(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("expected ip:port, got '" + s + "'");
  return {ip_from(s.substr(0, colon)), static_cast<std::uint16_t>(to_uint(s.substr(colon + 1), 65535))};
}

PacketRecord parse_line(const std::vector<std::string>& tok) {
  if (tok.size() < 5 || tok[3] != ">") throw std::invalid_argument("expected '<ts> <proto> <src> > <dst> ...'");
  PacketSpec s;
  s.ts = std::stod(tok[0]);
  const std::string& proto = tok[1];
  if (proto == "tcp" || proto == "udp") {
    s.proto = to_u8(proto == "tcp" ? Proto::Tcp : Proto::Udp);
    const Endpoint a = endpoint_from(tok[2]);
    const Endpoint b = endpoint_from(tok[4]);
    s.src = a.ip;
    s.src_port = a.port;
    s.dst = b.ip;
    s.dst_port = b.port;
  } else {
    if (proto == "icmp")
      s.proto = to_u8(Proto::Icmp);
    else if (proto.rfind("proto=", 0) == 0)
      s.proto = static_cast<std::uint8_t>(to_uint(proto.substr(6), 255));
    else
      throw std::invalid_argument("unknown protocol '" + proto + "'");
    s.src = ip_from(tok[2]);
    s.dst = ip_from(tok[4]);
  }
  bool have_type = false;
  for (std::size_t i = 5; i < tok.size(); ++i) {
    const auto eq = tok[i].find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + tok[i] + "'");
    const std::string k = tok[i].substr(0, eq);
    const std::string v = tok[i].substr(eq + 1);
    if (k == "len") {
      s.payload_len = static_cast<std::uint32_t>(to_uint(v, 1400));
    } else if (s.proto == to_u8(Proto::Tcp) && k == "flags") {
      s.tcp_flags = flags_from(v);
    } else if (s.proto == to_u8(Proto::Tcp) && k == "seq") {
      s.tcp_seq = static_cast<std::uint32_t>(to_uint(v, 0xffffffffULL));
    } else if (s.proto == to_u8(Proto::Tcp) && k == "ack") {
      s.tcp_ack = static_cast<std::uint32_t>(to_uint(v, 0xffffffffULL));
    } else if (s.proto == to_u8(Proto::Tcp) && k == "opt") {
      s.tcp_option_words = static_cast<std::uint8_t>(to_uint(v, 10));
    } else if (s.proto == to_u8(Proto::Icmp) && k == "type") {
      s.icmp_type = static_cast<std::uint8_t>(to_uint(v, 255));
      have_type = true;
    } else if (s.proto == to_u8(Proto::Icmp) && k == "code") {
      s.icmp_code = static_cast<std::uint8_t>(to_uint(v, 255));
    } else if (s.proto == to_u8(Proto::Icmp) && k == "id") {
      s.icmp_id = static_cast<std::uint16_t>(to_uint(v, 65535));
    } else if (s.proto == to_u8(Proto::Icmp) && k == "seq") {
      s.icmp_seq = static_cast<std::uint16_t>(to_uint(v, 65535));
    } else {
      throw std::invalid_argument("unexpected field '" + k + "' for " + proto);
    }
  }
  if (s.proto == to_u8(Proto::Icmp) && !have_type) throw std::invalid_argument("icmp needs type=N");
  return build_packet(s);
}

}  // namespace

std::vector<PacketRecord> parse_scripted_trace(std::string_view text, const std::string& origin) {
  std::vector<PacketRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    try {
      PacketRecord p = parse_line(tok);
      if (!out.empty() && p.ts < out.back().ts) throw std::invalid_argument("timestamps must not decrease");
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PacketRecord> load_scripted_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scripted_trace(ss.str(), path);
}

std::vector<PacketRecord> load_trace(const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".pcap") == 0) return read_pcap(path).packets;
  return load_scripted_trace(path);
}

}  // namespace errmon
