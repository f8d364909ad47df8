#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "errmon/anonymizer.hpp"
#include "errmon/bounded_queue.hpp"
#include "errmon/config.hpp"
#include "errmon/types.hpp"

namespace errmon {

enum class RuleSide : std::uint8_t { MatchAsDst, MatchAsSrc };

const char* rule_side_name(RuleSide side);

struct RuleKey {
  ServiceKey service;
  RuleSide side = RuleSide::MatchAsDst;

  std::string to_string() const;
  friend constexpr auto operator<=>(const RuleKey&, const RuleKey&) = default;
};

struct RuleKeyHash {
  std::size_t operator()(const RuleKey& k) const noexcept {
    return std::hash<ServiceKey>{}(k.service) ^ (static_cast<std::size_t>(k.side) * 0x9e3779b97f4a7c15ULL);
  }
};

/// One exact-match dynamic rule with its idle TTL.
struct MatRule {
  RuleKey key;
  Seconds ttl_initial = 10.0;
  Seconds ttl_remaining = 10.0;
  Seconds installed_at = 0.0;
  /// Install latency elapses before the rule matches.
  Seconds effective_at = 0.0;
  /// Distinguishes successive installs of the same key.
  std::uint64_t generation = 0;
  bool matched_in_interval = false;
};

/// The rule pair that filters every packet to or from `responder`.
std::vector<MatRule> rules_for_responder(const ServiceKey& responder, Seconds ttl);

struct IdleNotification {
  RuleKey key;
  Seconds fired_at = 0.0;
  std::uint64_t generation = 0;
};

enum class SwitchVerdict { DroppedWhitelist, DroppedFlowRule, Mirrored, DroppedBackpressure };

const char* verdict_name(SwitchVerdict v);

/// Anonymized copy headed for the detection engine.
struct MirroredPacket {
  PacketRecord pkt;
  MirrorMeta meta;
  /// Time the original packet hit the switch.
  Seconds arrived = 0.0;
};

struct InstallReport {
  std::size_t installed = 0;
  std::size_t rejected = 0;
  Seconds latency = 0.0;
};

/// Delete request; with a generation set, only that incarnation is removed.
struct RuleDelete {
  RuleKey key;
  std::optional<std::uint64_t> generation;
};

struct SwitchCounters {
  std::uint64_t packets = 0;
  std::uint64_t whitelist_hits = 0;
  std::uint64_t dynamic_hits = 0;
  std::uint64_t mirrored = 0;
  std::uint64_t backpressure_drops = 0;
  std::uint64_t rules_installed = 0;
  std::uint64_t rules_rejected = 0;
  std::uint64_t rules_deleted = 0;
  std::uint64_t idle_notifications = 0;
  std::uint64_t notify_drops = 0;
};

/// Functional model of the switch data plane: static whitelist, dynamic
/// rule table with idle TTLs, and the anonymizing mirror toward the engine.
class SwitchSim {
 public:
  SwitchSim(const NetworkConfig& net, const SwitchConfig& cfg, const LatencyModel& install_latency,
            const LatencyModel& delete_latency);

  SwitchVerdict process_packet(const PacketRecord& pkt, Seconds now);

  /// Inserts up to capacity; the overflow suffix is rejected. Rules become
  /// effective at now + latency.
  InstallReport install_rules(std::span<const MatRule> batch, Seconds now);
  std::size_t delete_rules(std::span<const RuleDelete> keys, Seconds now);
  Seconds delete_latency(std::size_t n) const { return delete_latency_.call_latency(n); }
  Seconds install_latency(std::size_t n) const { return install_latency_.call_latency(n); }

  /// Idle countdown; notifications are also queued on notify_out().
  std::vector<IdleNotification> tick(Seconds now);

  bool is_whitelisted(const ServiceKey& key) const;
  const MatRule* find_rule(const RuleKey& key) const;
  std::size_t rule_count() const { return table_.size(); }
  std::size_t capacity() const { return cfg_.dynamic_capacity; }

  BoundedQueue<MirroredPacket>& mirror_out() { return mirror_out_; }
  BoundedQueue<IdleNotification>& notify_out() { return notify_out_; }
  const SwitchCounters& counters() const { return counters_; }
  const MirrorAnonymizer& anonymizer() const { return anonymizer_; }

  /// "key value" lines.
  void dump_counters(std::ostream& os) const;

 private:
  MatRule* match(const RuleKey& key, Seconds now);

  const NetworkConfig* net_;
  SwitchConfig cfg_;
  LatencyModel install_latency_;
  LatencyModel delete_latency_;
  MirrorAnonymizer anonymizer_;
  std::unordered_set<Endpoint> whitelist_;
  std::unordered_map<RuleKey, MatRule, RuleKeyHash> table_;
  BoundedQueue<MirroredPacket> mirror_out_;
  BoundedQueue<IdleNotification> notify_out_;
  SwitchCounters counters_;
  std::optional<Seconds> last_tick_;
  std::uint64_t next_generation_ = 1;
};

}  // namespace errmon
