#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "errmon/types.hpp"

namespace errmon {

/// Configuration problem; the message carries "file:line: " when the
/// problem is tied to a line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Timers {
  Seconds detection_timeout = 1.0;
  Seconds detection_timeout_impersonated = 0.070;
  /// Upper bound on rule install time; benign entries older than this are
  /// reclaimed.
  Seconds t_inst = 1.0;
  Seconds t_alive = 300.0;
  /// Timer-check period of the descriptor ring.
  Seconds check_period = 1e-5;
  std::uint32_t max_check_depth = 10;
  /// Fraction of hash buckets visited per cleaning pass.
  double clean_fraction = 1e-3;
  std::uint32_t batch_size = 200;
  Seconds query_interval = 1.0;
  Seconds rule_ttl = 10.0;
  /// Period of the benign-entry cleaning pass.
  Seconds clean_interval = 1e-3;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Southbound call cost: a + b*n + c*n^2 seconds for a batch of n rules.
struct LatencyModel {
  Seconds base = 2e-3;
  Seconds per_rule = 10e-6;
  Seconds quadratic = 2e-9;

  Seconds call_latency(std::size_t n) const {
    const double x = static_cast<double>(n);
    return base + per_rule * x + quadratic * x * x;
  }
  Seconds per_rule_latency(std::size_t n) const { return n == 0 ? 0.0 : call_latency(n) / static_cast<double>(n); }
};

struct NetworkConfig {
  std::vector<Cidr> internal_prefixes;
  std::vector<Cidr> telescope_prefixes;
  std::set<ServiceKey> impersonation_set;
  std::uint32_t anonymization_key = 0;
  bool anonymize = true;
  Timers timers;

  bool is_telescope(Ipv4 ip) const;
  bool is_impersonated(Endpoint ep, std::uint8_t proto) const {
    return !impersonation_set.empty() && impersonation_set.contains(ServiceKey{ep.ip, ep.port, proto});
  }
  void validate() const;
};

bool is_internal(Ipv4 ip, const NetworkConfig& cfg);

/// Dense numbering of the internal address space (union of the internal
/// prefixes), used to index per-host bitmaps.
class AddressIndex {
 public:
  AddressIndex() = default;
  explicit AddressIndex(const std::vector<Cidr>& prefixes);

  std::optional<std::uint32_t> index_of(Ipv4 ip) const;
  Ipv4 address_at(std::uint32_t index) const;
  std::uint64_t size() const { return size_; }

 private:
  struct Range {
    std::uint32_t lo;
    std::uint32_t hi;  // inclusive
    std::uint64_t base;
  };
  std::vector<Range> ranges_;
  std::uint64_t size_ = 0;
};

struct SwitchConfig {
  std::size_t dynamic_capacity = 100000;
  std::size_t mirror_queue_capacity = 1u << 20;
  std::size_t notify_queue_capacity = 1u << 20;
  /// Static (ip, port) service entries.
  std::vector<Endpoint> whitelist;
  /// Accept whitelist entries for internal services too.
  bool whitelist_internal = false;
};

/// Per-operation CPU cost of the detection engine, charged in virtual time.
struct EngineCostModel {
  Seconds per_packet = 1e-6;
  Seconds per_descriptor = 5e-7;
  Seconds per_clean_bucket = 1e-9;
};

struct FsdConfig {
  std::size_t hash_buckets = 1u << 20;
  std::size_t ring_capacity = 1u << 20;
  std::size_t buffer_capacity = 1u << 20;
  bool store_duplicates = false;
  std::uint64_t hash_seed = 0x5eed;
  EngineCostModel cost;
  Seconds metrics_interval = 1.0;
};

struct ControlConfig {
  LatencyModel install_latency;
  LatencyModel delete_latency;
  std::size_t queue_capacity = 1u << 24;
  std::uint32_t max_attempts = 3;
  Seconds backoff_base = 0.01;
  /// Probability that a southbound call fails (fault injection).
  double failure_probability = 0.0;
  std::uint64_t failure_seed = 1;
};

struct ResponderConfig {
  bool enabled = true;
  std::uint64_t isn_seed = 0x15eed;
  std::size_t max_connections = 65536;
};

/// Parsed `key = value` file with `[section]` headers and `#` comments.
class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  static KeyValueFile parse(std::string_view text, std::string origin);
  static KeyValueFile load(const std::string& path);

  bool has_section(const std::string& section) const { return sections_.contains(section); }
  const Entry* find(const std::string& section, const std::string& key) const;

  std::optional<std::string> get_string(const std::string& section, const std::string& key) const;
  std::optional<double> get_double(const std::string& section, const std::string& key) const;
  std::optional<std::uint64_t> get_uint(const std::string& section, const std::string& key) const;
  std::optional<bool> get_bool(const std::string& section, const std::string& key) const;

  /// Error prefixed with "origin:line: ".
  [[noreturn]] void fail(const Entry& e, const std::string& what) const;
  /// Throws on the first key that no getter consumed.
  void reject_unused() const;

  const std::string& origin() const { return origin_; }
  std::string base_dir() const;

 private:
  std::string origin_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

struct Config {
  NetworkConfig network;
  SwitchConfig switch_cfg;
  FsdConfig fsd;
  ControlConfig control;
  ResponderConfig responder;

  void validate() const;
};

/// Environment variable that overrides the configured anonymization key.
inline constexpr const char* kAnonKeyEnv = "ERRMON_ANON_KEY";

/// Reads [network], [timers], [switch], [fsd], [control] and [responder];
/// other sections are left for their owners.
Config config_from(const KeyValueFile& kv);
Config load_config(const std::string& path);

std::vector<Endpoint> load_whitelist(const std::string& path);
std::vector<Endpoint> parse_whitelist(std::string_view text, const std::string& origin);
std::vector<Cidr> parse_cidr_list(std::string_view text);
std::optional<std::uint32_t> parse_hex_key(std::string_view text);

}  // namespace errmon
