#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "errmon/collector.hpp"
#include "errmon/config.hpp"

namespace errmon {

/// What the offline tools need to interpret a record file.
struct AnalyticsContext {
  std::vector<Cidr> internal_prefixes;
  std::vector<Cidr> telescope_prefixes;
  /// Key used when the records were anonymized; without it internal hosts
  /// keep their obfuscated identities (still one-to-one).
  std::optional<std::uint32_t> anonymization_key;
  std::vector<Cidr> acknowledged_scanners;

  static AnalyticsContext from(const NetworkConfig& net);
};

/// Newline-delimited prefixes ("a.b.c.d/n" or a bare address), '#' comments.
std::vector<Cidr> parse_prefix_list(const std::string& text, const std::string& origin = "prefixes");
std::vector<Cidr> load_prefix_list(const std::string& path);

/// The real internal destination of an incoming record.
Ipv4 internal_destination(const RecordRow& r, const AnalyticsContext& ctx);

struct HourlyStats {
  std::int64_t hour = 0;
  std::size_t unique_src_ips = 0;
  std::size_t unique_ports = 0;
  std::size_t hosts = 0;
  double mean_senders_per_host = 0;
  double std_senders_per_host = 0;
  /// Spread (population std) of distinct destination ports per host.
  double std_ports = 0;
  std::size_t acked_scanners = 0;

  friend bool operator==(const HourlyStats&, const HourlyStats&) = default;
};

/// One row per hour that has incoming records, in hour order.
std::vector<HourlyStats> hourly_sender_stats(const std::vector<RecordRow>& records, const AnalyticsContext& ctx);

enum class HostClass { Telescope, Active, Dark };

const char* host_class_name(HostClass c);
std::optional<HostClass> parse_host_class(const std::string& s);

/// Class of every internal host that receives incoming records: telescope
/// prefix first, then Active if any record to it was tagged alive, else Dark.
std::map<Ipv4, HostClass> host_classes(const std::vector<RecordRow>& records, const AnalyticsContext& ctx);

/// Incoming TCP/UDP erroneous packets per destination port for one class.
std::map<std::uint16_t, std::uint64_t> per_port_histogram(const std::vector<RecordRow>& records, HostClass cls,
                                                          const AnalyticsContext& ctx);

enum class ScanClass { Horizontal, Vertical, Mixed };

const char* scan_class_name(ScanClass c);

struct ScanThresholds {
  std::size_t theta_d = 100;        // many hosts
  std::size_t theta_p = 5;          // few ports
  std::size_t theta_p_prime = 100;  // many ports
  std::size_t theta_d_prime = 5;    // few hosts
  std::size_t min_packets = 1;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Horizontal: wide over hosts, narrow over ports. Vertical: narrow over
/// hosts and either wide or very narrow over ports. Mixed otherwise.
ScanClass classify_scanner(const std::vector<RecordRow>& sender_records, const ScanThresholds& th = {});

struct ScannerRow {
  Ipv4 src;
  std::size_t packets = 0;
  std::size_t distinct_hosts = 0;
  std::size_t distinct_ports = 0;
  ScanClass cls = ScanClass::Mixed;
};

/// Classifies every source with at least min_packets records; `incoming_only`
/// restricts to external senders.
std::vector<ScannerRow> classify_senders(const std::vector<RecordRow>& records, const ScanThresholds& th,
                                         bool incoming_only, const AnalyticsContext& ctx);

struct CcdfPoint {
  std::size_t senders = 0;
  double ccdf = 0;

  friend bool operator==(const CcdfPoint&, const CcdfPoint&) = default;
};

/// P(X >= v) over internal hosts, X = distinct external senders per host.
std::vector<CcdfPoint> sender_ccdf(const std::vector<RecordRow>& records, const AnalyticsContext& ctx);

}  // namespace errmon
