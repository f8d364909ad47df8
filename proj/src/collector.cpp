#include "errmon/collector.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "errmon/pcap.hpp"

namespace errmon {

const char* direction_name(Direction d) { return d == Direction::Incoming ? "in" : "out"; }

namespace {

std::uint8_t parse_flags(const std::string& s) {
  if (s == "-") return 0;
  std::uint8_t f = 0;
  for (char c : s) {
    switch (c) {
      case 'S': f |= tcp_flag::kSyn; break;
      case 'A': f |= tcp_flag::kAck; break;
      case 'F': f |= tcp_flag::kFin; break;
      case 'R': f |= tcp_flag::kRst; break;
      case 'P': f |= tcp_flag::kPsh; break;
      case 'U': f |= tcp_flag::kUrg; break;
      default: throw std::invalid_argument("bad flags '" + s + "'");
    }
  }
  return f;
}

template <typename T>
T parse_num(const std::string& s, unsigned long max) {
  std::size_t pos = 0;
  const unsigned long v = std::stoul(s, &pos);
  if (pos != s.size() || v > max) throw std::invalid_argument("bad number '" + s + "'");
  return static_cast<T>(v);
}

}  // namespace

RecordRow to_row(const ErroneousRecord& r) {
  RecordRow row;
  row.ts = r.ts;
  row.direction = r.direction;
  row.reason = r.reason;
  row.dst_liveness = r.dst_liveness;
  row.src_ip = r.pkt.src_ip;
  row.dst_ip = r.pkt.dst_ip;
  row.proto = r.pkt.proto;
  row.src_port = r.pkt.src_port;
  row.dst_port = r.pkt.dst_port;
  row.tcp_flags = r.pkt.is_tcp() ? r.pkt.tcp_flags : 0;
  row.icmp_type = r.pkt.is_icmp() ? r.pkt.icmp_type : 0;
  row.icmp_code = r.pkt.is_icmp() ? r.pkt.icmp_code : 0;
  row.payload_len = r.pkt.payload_len;
  row.anon = r.internal_host_anon;
  return row;
}

std::string format_record(const ErroneousRecord& r) {
  const RecordRow row = to_row(r);
  char ts[32];
  std::snprintf(ts, sizeof ts, "%.6f", row.ts);
  std::ostringstream os;
  os << ts << '\t' << direction_name(row.direction) << '\t' << reason_name(row.reason) << '\t'
     << liveness_name(row.dst_liveness) << '\t' << row.src_ip.to_string() << '\t' << row.dst_ip.to_string() << '\t'
     << unsigned{row.proto} << '\t' << row.src_port << '\t' << row.dst_port << '\t' << tcp_flags_string(row.tcp_flags)
     << '\t' << unsigned{row.icmp_type} << '\t' << unsigned{row.icmp_code} << '\t' << row.payload_len << '\t'
     << (row.anon ? 1 : 0);
  return os.str();
}

std::vector<RecordRow> read_records(std::istream& in, const std::string& origin) {
  std::vector<RecordRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) f.push_back(field);
    try {
      if (f.size() != 14) throw std::invalid_argument("expected 14 columns, got " + std::to_string(f.size()));
      RecordRow r;
      r.ts = std::stod(f[0]);
      if (f[1] == "in")
        r.direction = Direction::Incoming;
      else if (f[1] == "out")
        r.direction = Direction::Outgoing;
      else
        throw std::invalid_argument("bad direction '" + f[1] + "'");
      if (f[2] == "dt_expired")
        r.reason = CollectReason::DtExpired;
      else if (f[2] == "icmp_error")
        r.reason = CollectReason::IcmpError;
      else
        throw std::invalid_argument("bad reason '" + f[2] + "'");
      if (f[3] == "alive")
        r.dst_liveness = Liveness::Alive;
      else if (f[3] == "dark")
        r.dst_liveness = Liveness::Dark;
      else if (f[3] == "external")
        r.dst_liveness = Liveness::External;
      else
        throw std::invalid_argument("bad liveness '" + f[3] + "'");
      auto src = Ipv4::parse(f[4]);
      auto dst = Ipv4::parse(f[5]);
      if (!src || !dst) throw std::invalid_argument("bad address");
      r.src_ip = *src;
      r.dst_ip = *dst;
      r.proto = parse_num<std::uint8_t>(f[6], 255);
      r.src_port = parse_num<std::uint16_t>(f[7], 65535);
      r.dst_port = parse_num<std::uint16_t>(f[8], 65535);
      r.tcp_flags = parse_flags(f[9]);
      r.icmp_type = parse_num<std::uint8_t>(f[10], 255);
      r.icmp_code = parse_num<std::uint8_t>(f[11], 255);
      r.payload_len = parse_num<std::uint32_t>(f[12], 0xffffffffUL);
      r.anon = parse_num<std::uint8_t>(f[13], 1) == 1;
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<RecordRow> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_records(in, path);
}

TsvRecordSink::TsvRecordSink(std::ostream& os) : os_(&os) { *os_ << kRecordHeader << '\n'; }

bool TsvRecordSink::write(const ErroneousRecord& r) {
  *os_ << format_record(r) << '\n';
  return static_cast<bool>(*os_);
}

bool PcapRecordSink::write(const ErroneousRecord& r) { return w_->write(r.pkt); }

Collector::Collector(const NetworkConfig& net, const ResponderConfig& responder)
    : net_(&net), responder_(net, responder) {}

ErroneousRecord Collector::record(const ExpiredPacket& e) {
  ErroneousRecord r;
  r.ts = e.collected_at;
  r.pkt = e.pkt;
  r.direction = e.meta.src_internal ? Direction::Outgoing : Direction::Incoming;
  r.dst_liveness = e.dst_liveness;
  r.reason = e.reason;
  r.internal_host_anon = net_->anonymize && !e.meta.bypass && (e.meta.src_internal || e.meta.dst_internal);
  ++stats_.records;
  ++(r.direction == Direction::Incoming ? stats_.incoming : stats_.outgoing);
  if (r.reason == CollectReason::IcmpError) ++stats_.icmp_errors;
  for (RecordSink* s : sinks_)
    if (!s->write(r)) ++stats_.write_failures;
  return r;
}

std::optional<PacketRecord> Collector::responder_step(const PacketRecord& pkt, Seconds now) {
  auto reply = responder_.step(pkt, now);
  if (reply) ++stats_.responder_replies;
  return reply;
}

}  // namespace errmon
