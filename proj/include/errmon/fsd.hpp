#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "errmon/anonymizer.hpp"
#include "errmon/config.hpp"
#include "errmon/switch_sim.hpp"
#include "errmon/types.hpp"

namespace errmon {

enum class FlowStatus : std::uint8_t { Suspicious, Benign };

/// Descriptor rings are split per detection timeout so that each ring stays
/// ordered by expiry time as well as arrival time.
enum class TimeoutClass : std::uint8_t { Standard = 0, Impersonated = 1 };
inline constexpr std::size_t kTimeoutClasses = 2;

using FlowHandle = std::int32_t;
inline constexpr FlowHandle kNullFlow = -1;

struct FlowEntry {
  FlowKey key;
  FlowStatus status = FlowStatus::Suspicious;
  Seconds t_arr = 0.0;
  std::optional<Seconds> t_resp;
  Endpoint initiator;
  std::optional<Endpoint> responder;
  /// Ring sequence number of the pending descriptor (Suspicious only).
  std::optional<std::uint64_t> descriptor;
  TimeoutClass timeout_class = TimeoutClass::Standard;
  std::uint32_t buffer_slot = 0;
  /// Retransmissions held when duplicates are stored.
  std::vector<std::uint32_t> duplicate_slots;
};

/// Open hashing with per-bucket chains over a slab of entries.
class FlowTable {
 public:
  FlowTable(std::size_t buckets, std::uint64_t seed);

  FlowHandle find(const FlowKey& key) const;
  FlowHandle insert(FlowEntry entry);
  void erase(FlowHandle h);
  FlowEntry& at(FlowHandle h) { return slots_[static_cast<std::size_t>(h)].entry; }
  const FlowEntry& at(FlowHandle h) const { return slots_[static_cast<std::size_t>(h)].entry; }

  /// Visits `count` buckets starting at `first` (wrapping) and erases every
  /// entry for which `remove` returns true. Returns the number erased.
  template <typename Pred>
  std::size_t sweep(std::size_t first, std::size_t count, Pred&& remove);

  std::size_t size() const { return size_; }
  std::size_t bucket_count() const { return heads_.size(); }

 private:
  struct Slot {
    FlowEntry entry;
    FlowHandle next = kNullFlow;
    bool used = false;
  };
  std::size_t bucket_of(const FlowKey& key) const { return hash_flow_key(key, seed_) % heads_.size(); }

  std::vector<FlowHandle> heads_;
  std::vector<Slot> slots_;
  std::vector<FlowHandle> free_;
  std::uint64_t seed_;
  std::size_t size_ = 0;
};

template <typename Pred>
std::size_t FlowTable::sweep(std::size_t first, std::size_t count, Pred&& remove) {
  std::size_t erased = 0;
  const std::size_t n = heads_.size();
  for (std::size_t i = 0; i < count && i < n; ++i) {
    const std::size_t b = (first + i) % n;
    FlowHandle* link = &heads_[b];
    while (*link != kNullFlow) {
      Slot& s = slots_[static_cast<std::size_t>(*link)];
      if (remove(s.entry)) {
        const FlowHandle dead = *link;
        *link = s.next;
        s = Slot{};
        free_.push_back(dead);
        --size_;
        ++erased;
      } else {
        link = &s.next;
      }
    }
  }
  return erased;
}

struct Descriptor {
  Seconds t_arr = 0.0;
  /// kNullFlow once the flow was answered.
  FlowHandle flow = kNullFlow;
  std::uint32_t buffer_slot = 0;
};

/// Fixed-capacity circular descriptor queue addressed by monotone sequence
/// numbers.
class DescriptorRing {
 public:
  explicit DescriptorRing(std::size_t capacity) : slots_(capacity) {}

  bool full() const { return size() == slots_.size(); }
  bool empty() const { return head_ == tail_; }
  std::size_t size() const { return static_cast<std::size_t>(tail_ - head_); }
  std::size_t capacity() const { return slots_.size(); }

  std::uint64_t push(const Descriptor& d) {
    slots_[tail_ % slots_.size()] = d;
    return tail_++;
  }
  Descriptor& front() { return slots_[head_ % slots_.size()]; }
  const Descriptor& front() const { return slots_[head_ % slots_.size()]; }
  void pop() { ++head_; }
  Descriptor& at(std::uint64_t seq) { return slots_[seq % slots_.size()]; }
  bool contains(std::uint64_t seq) const { return seq >= head_ && seq < tail_; }
  std::uint64_t head_seq() const { return head_; }

  /// Descriptor i positions behind the head.
  const Descriptor& peek(std::size_t i) const { return slots_[(head_ + i) % slots_.size()]; }

 private:
  std::vector<Descriptor> slots_;
  std::uint64_t head_ = 0;
  std::uint64_t tail_ = 0;
};

struct StoredPacket {
  PacketRecord pkt;
  MirrorMeta meta;
  Seconds arrived = 0.0;
};

/// Slot pool for buffered raw packets.
class PacketBuffer {
 public:
  explicit PacketBuffer(std::size_t capacity) : capacity_(capacity) {}

  std::optional<std::uint32_t> acquire(StoredPacket p);
  /// Throws std::logic_error on a slot that is not in use.
  StoredPacket release(std::uint32_t slot);
  const StoredPacket& peek(std::uint32_t slot) const { return *slots_[slot]; }

  std::size_t in_use() const { return in_use_; }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::vector<std::optional<StoredPacket>> slots_;
  std::vector<std::uint32_t> free_;
  std::size_t in_use_ = 0;
};

class NotInternalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RuleEvent { Installed, Deleted };

/// Per-host liveness: one bitmap fed by packets the engine processes, one by
/// rule install/delete messages. A bit reads as set while its last refresh
/// is at most T_alive old.
class LivenessBitmaps {
 public:
  LivenessBitmaps(const std::vector<Cidr>& internal, Seconds t_alive);

  void refresh_seen(Ipv4 ip, Seconds now);
  void rule_sync(Ipv4 ip, RuleEvent event, Seconds now);

  bool seen_bit(Ipv4 ip, Seconds now) const;
  bool rule_bit(Ipv4 ip, Seconds now) const;
  /// OR of both bitmaps. Throws NotInternalError for external addresses.
  bool is_alive(Ipv4 ip, Seconds now) const;

 private:
  static constexpr Seconds kNever = -std::numeric_limits<Seconds>::infinity();
  std::uint32_t index_or_throw(Ipv4 ip) const;
  bool fresh(Seconds stamp, Seconds now) const { return stamp != kNever && now - stamp <= t_alive_; }

  AddressIndex index_;
  Seconds t_alive_;
  std::vector<Seconds> seen_;
  std::vector<Seconds> rule_;
};

enum class FsdVerdict {
  Buffered,
  DroppedDuplicate,
  StoredDuplicate,
  BenignDetected,
  DroppedTransient,
  CollectedIcmpError,
  DroppedRingFull,
  DroppedBufferFull,
};

const char* fsd_verdict_name(FsdVerdict v);

enum class CollectReason { DtExpired, IcmpError };
enum class Liveness { Alive, Dark, External };

const char* reason_name(CollectReason r);
const char* liveness_name(Liveness l);

/// A packet handed to the collector.
struct ExpiredPacket {
  PacketRecord pkt;
  MirrorMeta meta;
  CollectReason reason = CollectReason::DtExpired;
  Liveness dst_liveness = Liveness::External;
  /// Switch arrival time and engine reception time.
  Seconds arrived = 0.0;
  Seconds t_arr = 0.0;
  Seconds collected_at = 0.0;
};

struct FsdAction {
  FsdVerdict verdict = FsdVerdict::Buffered;
  /// Rule pair for a newly benign flow, keyed on the real responder.
  std::vector<MatRule> rules;
  std::optional<ExpiredPacket> collected;
};

struct CheckResult {
  std::vector<ExpiredPacket> expired;
  std::size_t popped = 0;
  std::size_t scanned = 0;
};

struct FsdStats {
  std::uint64_t packets = 0;
  std::uint64_t buffered = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t duplicates_stored = 0;
  std::uint64_t benign = 0;
  std::uint64_t transient_dropped = 0;
  std::uint64_t icmp_errors = 0;
  std::uint64_t ring_full = 0;
  std::uint64_t buffer_full = 0;
  std::uint64_t expired = 0;
  std::uint64_t null_skipped = 0;
  std::uint64_t cleaned = 0;
  std::uint64_t rule_installed_syncs = 0;
  std::uint64_t rule_deleted_syncs = 0;
  std::size_t ring_high_watermark = 0;
  std::size_t hash_high_watermark = 0;
};

/// Flow-state detection engine. on_packet, check_timers and clean_benign
/// belong to one execution context.
class FsdEngine {
 public:
  FsdEngine(const NetworkConfig& net, const FsdConfig& cfg);

  FsdAction on_packet(const MirroredPacket& in, Seconds now);
  CheckResult check_timers(Seconds now);
  /// Visits ceil(alpha * buckets) buckets from the cursor.
  std::size_t clean_benign(Seconds now);

  bool is_alive(Ipv4 ip, Seconds now) const { return liveness_.is_alive(ip, now); }
  void liveness_rule_sync(Ipv4 ip, RuleEvent event, Seconds now);

  /// Earliest time a timer check has work; nullopt when all rings are empty.
  std::optional<Seconds> next_check_due() const;
  Seconds timeout_of(TimeoutClass c) const;

  std::size_t ring_occupancy() const;
  std::size_t live_descriptors() const { return live_descriptors_; }
  std::size_t hash_occupancy() const { return table_.size(); }
  std::size_t benign_entries() const { return benign_entries_; }
  std::size_t buffer_in_use() const { return buffer_.in_use(); }
  std::size_t clean_batch() const { return clean_batch_; }
  const FsdStats& stats() const { return stats_; }
  const FlowTable& table() const { return table_; }
  const DescriptorRing& ring(TimeoutClass c) const { return rings_[static_cast<std::size_t>(c)]; }
  const LivenessBitmaps& liveness() const { return liveness_; }

 private:
  ExpiredPacket make_collected(StoredPacket sp, CollectReason reason, Seconds t_arr, Seconds now) const;
  void note_watermarks();

  const NetworkConfig* net_;
  FsdConfig cfg_;
  MirrorAnonymizer anonymizer_;
  FlowTable table_;
  std::vector<DescriptorRing> rings_;
  PacketBuffer buffer_;
  LivenessBitmaps liveness_;
  FsdStats stats_;
  std::size_t clean_cursor_ = 0;
  std::size_t clean_batch_ = 1;
  std::size_t live_descriptors_ = 0;
  std::size_t benign_entries_ = 0;
};

}  // namespace errmon
