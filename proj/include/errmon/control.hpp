#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "errmon/bounded_queue.hpp"
#include "errmon/config.hpp"
#include "errmon/fsd.hpp"
#include "errmon/switch_sim.hpp"

namespace errmon {

enum class RuleOpKind { Install, Delete };

struct RuleOp {
  RuleOpKind kind = RuleOpKind::Install;
  MatRule rule;
  RuleDelete del;
  Seconds enqueued_at = 0.0;
  std::uint32_t attempts = 0;

  static RuleOp install(MatRule r, Seconds now) { return {RuleOpKind::Install, std::move(r), {}, now, 0}; }
  static RuleOp remove(RuleDelete d, Seconds now) { return {RuleOpKind::Delete, {}, d, now, 0}; }
};

/// FIFO of rule operations shared by the engine (producer) and the control
/// loop (consumer).
using PendingRuleQueue = BoundedQueue<RuleOp>;

struct CallResult {
  bool ok = true;
  std::size_t applied = 0;
  std::size_t rejected = 0;
  Seconds latency = 0.0;
};

/// Southbound path to the switch: one call carries a whole batch.
class SouthboundChannel {
 public:
  virtual ~SouthboundChannel() = default;
  virtual CallResult install(std::span<const MatRule> batch, Seconds now) = 0;
  virtual CallResult remove(std::span<const RuleDelete> batch, Seconds now) = 0;
};

/// Channel straight into a SwitchSim, with optional random call failures.
class SwitchChannel : public SouthboundChannel {
 public:
  SwitchChannel(SwitchSim& sw, double failure_probability = 0.0, std::uint64_t seed = 1)
      : sw_(&sw), failure_probability_(failure_probability), rng_(seed) {}

  CallResult install(std::span<const MatRule> batch, Seconds now) override;
  CallResult remove(std::span<const RuleDelete> batch, Seconds now) override;

 private:
  bool fails();

  SwitchSim* sw_;
  double failure_probability_;
  std::mt19937_64 rng_;
};

struct LivenessSync {
  Ipv4 ip;
  RuleEvent event = RuleEvent::Installed;
  Seconds at = 0.0;
};

struct BatchReport {
  Seconds started_at = 0.0;
  Seconds completes_at = 0.0;
  std::size_t installs = 0;
  std::size_t deletes = 0;
  std::size_t rejected = 0;
  Seconds install_latency = 0.0;
  Seconds delete_latency = 0.0;
  Seconds per_rule_install = 0.0;
  Seconds per_rule_delete = 0.0;
  std::size_t requeued = 0;
  std::size_t abandoned = 0;
  std::size_t queue_after = 0;

  std::size_t ops_applied() const { return installs + deletes; }
};

struct ControlStats {
  std::uint64_t install_calls = 0;
  std::uint64_t delete_calls = 0;
  std::uint64_t rules_installed = 0;
  std::uint64_t rules_rejected = 0;
  std::uint64_t deletes_applied = 0;
  std::uint64_t failed_calls = 0;
  std::uint64_t abandoned_ops = 0;
  std::uint64_t notifications = 0;
  std::uint64_t duplicate_notifications = 0;
  std::uint64_t whitelist_notifications = 0;
  std::uint64_t queue_drops = 0;
};

/// Control loop: batches pending rule operations into southbound calls and
/// turns idle notifications into deletes. A call keeps the loop busy for its
/// modeled latency; completion side effects are released by complete().
class ControlPlane {
 public:
  ControlPlane(const NetworkConfig& net, const ControlConfig& cfg, const SwitchConfig& sw_cfg,
               SouthboundChannel& channel);

  bool enqueue_install(MatRule rule, Seconds now);
  void on_idle_notifications(std::span<const IdleNotification> batch, Seconds now);

  /// Pops up to k ops and issues one call per kind. No-op (no call) on an
  /// empty queue or while a call or backoff is pending.
  BatchReport drain_and_apply(Seconds now);
  /// Finishes the in-flight call; returns the liveness messages for the
  /// engine.
  std::vector<LivenessSync> complete(Seconds now);

  bool busy() const { return in_flight_.has_value(); }
  std::optional<Seconds> completes_at() const;
  /// Earliest time the loop may issue its next call.
  Seconds ready_at() const { return ready_at_; }

  PendingRuleQueue& queue() { return queue_; }
  const PendingRuleQueue& queue() const { return queue_; }
  const ControlStats& stats() const { return stats_; }

 private:
  struct InFlight {
    BatchReport report;
    std::vector<LivenessSync> syncs;
  };

  const NetworkConfig* net_;
  ControlConfig cfg_;
  std::set<Endpoint> whitelist_;
  SouthboundChannel* channel_;
  PendingRuleQueue queue_;
  std::set<std::pair<RuleKey, std::uint64_t>> pending_deletes_;
  std::optional<InFlight> in_flight_;
  Seconds ready_at_ = 0.0;
  ControlStats stats_;
};

}  // namespace errmon
