#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "errmon/config.hpp"
#include "errmon/fsd.hpp"
#include "errmon/responder.hpp"

namespace errmon {

enum class Direction { Incoming, Outgoing };

const char* direction_name(Direction d);

/// One collected erroneous packet with its tags.
struct ErroneousRecord {
  Seconds ts = 0.0;
  PacketRecord pkt;
  Direction direction = Direction::Incoming;
  Liveness dst_liveness = Liveness::External;
  CollectReason reason = CollectReason::DtExpired;
  /// True when the privacy transforms were applied to an internal address.
  bool internal_host_anon = false;
};

/// Tab-separated record file. Columns, in order:
///   ts direction reason dst_liveness src_ip dst_ip proto src_port dst_port
///   flags icmp_type icmp_code payload_len anon
/// ts has microsecond precision; proto is numeric; flags uses the letters
/// SAFRPU or "-"; anon is 0/1. The first line is a '#' header.
inline constexpr const char* kRecordHeader =
    "#ts\tdirection\treason\tdst_liveness\tsrc_ip\tdst_ip\tproto\tsrc_port\tdst_port\tflags\ticmp_type\t"
    "icmp_code\tpayload_len\tanon";

std::string format_record(const ErroneousRecord& r);

/// Record as read back from a record file (no raw bytes).
struct RecordRow {
  Seconds ts = 0.0;
  Direction direction = Direction::Incoming;
  CollectReason reason = CollectReason::DtExpired;
  Liveness dst_liveness = Liveness::External;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  std::uint8_t proto = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t tcp_flags = 0;
  std::uint8_t icmp_type = 0;
  std::uint8_t icmp_code = 0;
  std::uint32_t payload_len = 0;
  bool anon = false;

  friend bool operator==(const RecordRow&, const RecordRow&) = default;
};

RecordRow to_row(const ErroneousRecord& r);
/// Throws std::runtime_error naming the line on malformed input.
std::vector<RecordRow> read_records(std::istream& in, const std::string& origin = "records");
std::vector<RecordRow> load_records(const std::string& path);

class RecordSink {
 public:
  virtual ~RecordSink() = default;
  /// False on a write failure.
  virtual bool write(const ErroneousRecord& r) = 0;
};

class TsvRecordSink : public RecordSink {
 public:
  explicit TsvRecordSink(std::ostream& os);
  bool write(const ErroneousRecord& r) override;

 private:
  std::ostream* os_;
};

class PcapWriter;

/// Raw (already truncated) packets in capture-file form.
class PcapRecordSink : public RecordSink {
 public:
  explicit PcapRecordSink(PcapWriter& w) : w_(&w) {}
  bool write(const ErroneousRecord& r) override;

 private:
  PcapWriter* w_;
};

class VectorRecordSink : public RecordSink {
 public:
  bool write(const ErroneousRecord& r) override {
    records.push_back(r);
    return true;
  }
  std::vector<ErroneousRecord> records;
};

struct CollectorStats {
  std::uint64_t records = 0;
  std::uint64_t incoming = 0;
  std::uint64_t outgoing = 0;
  std::uint64_t icmp_errors = 0;
  std::uint64_t write_failures = 0;
  std::uint64_t responder_replies = 0;
};

/// Terminal stage: tags expired packets, fans them out to sinks and hosts
/// the responder for impersonated endpoints.
class Collector {
 public:
  Collector(const NetworkConfig& net, const ResponderConfig& responder);

  void add_sink(RecordSink* sink) { sinks_.push_back(sink); }
  ErroneousRecord record(const ExpiredPacket& e);
  std::optional<PacketRecord> responder_step(const PacketRecord& pkt, Seconds now);

  const TcpResponder& responder() const { return responder_; }
  const CollectorStats& stats() const { return stats_; }

 private:
  const NetworkConfig* net_;
  TcpResponder responder_;
  std::vector<RecordSink*> sinks_;
  CollectorStats stats_;
};

}  // namespace errmon
