#include "errmon/fsd.hpp"

#include <cmath>

#include "errmon/flow.hpp"

namespace errmon {

FlowTable::FlowTable(std::size_t buckets, std::uint64_t seed)
    : heads_(buckets == 0 ? 1 : buckets, kNullFlow), seed_(seed) {}

FlowHandle FlowTable::find(const FlowKey& key) const {
  for (FlowHandle h = heads_[bucket_of(key)]; h != kNullFlow; h = slots_[static_cast<std::size_t>(h)].next)
    if (slots_[static_cast<std::size_t>(h)].entry.key == key) return h;
  return kNullFlow;
}

FlowHandle FlowTable::insert(FlowEntry entry) {
  FlowHandle h;
  if (!free_.empty()) {
    h = free_.back();
    free_.pop_back();
  } else {
    h = static_cast<FlowHandle>(slots_.size());
    slots_.emplace_back();
  }
  const std::size_t b = bucket_of(entry.key);
  Slot& s = slots_[static_cast<std::size_t>(h)];
  s.entry = std::move(entry);
  s.used = true;
  s.next = heads_[b];
  heads_[b] = h;
  ++size_;
  return h;
}

void FlowTable::erase(FlowHandle h) {
  Slot& target = slots_[static_cast<std::size_t>(h)];
  if (!target.used) throw std::logic_error("flow table: erase of free slot");
  FlowHandle* link = &heads_[bucket_of(target.entry.key)];
  while (*link != h) link = &slots_[static_cast<std::size_t>(*link)].next;
  *link = target.next;
  target = Slot{};
  free_.push_back(h);
  --size_;
}

std::optional<std::uint32_t> PacketBuffer::acquire(StoredPacket p) {
  if (in_use_ >= capacity_) return std::nullopt;
  std::uint32_t slot;
  if (!free_.empty()) {
    slot = free_.back();
    free_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(slots_.size());
    slots_.emplace_back();
  }
  slots_[slot] = std::move(p);
  ++in_use_;
  return slot;
}

StoredPacket PacketBuffer::release(std::uint32_t slot) {
  if (slot >= slots_.size() || !slots_[slot]) throw std::logic_error("packet buffer: double free");
  StoredPacket p = std::move(*slots_[slot]);
  slots_[slot].reset();
  free_.push_back(slot);
  --in_use_;
  return p;
}

LivenessBitmaps::LivenessBitmaps(const std::vector<Cidr>& internal, Seconds t_alive)
    : index_(internal),
      t_alive_(t_alive),
      seen_(static_cast<std::size_t>(index_.size()), kNever),
      rule_(static_cast<std::size_t>(index_.size()), kNever) {}

std::uint32_t LivenessBitmaps::index_or_throw(Ipv4 ip) const {
  auto idx = index_.index_of(ip);
  if (!idx) throw NotInternalError(ip.to_string() + " is not an internal address");
  return *idx;
}

void LivenessBitmaps::refresh_seen(Ipv4 ip, Seconds now) {
  if (auto idx = index_.index_of(ip)) seen_[*idx] = now;
}

void LivenessBitmaps::rule_sync(Ipv4 ip, RuleEvent event, Seconds now) {
  auto idx = index_.index_of(ip);
  if (!idx) return;
  rule_[*idx] = event == RuleEvent::Installed ? now : kNever;
}

bool LivenessBitmaps::seen_bit(Ipv4 ip, Seconds now) const { return fresh(seen_[index_or_throw(ip)], now); }

bool LivenessBitmaps::rule_bit(Ipv4 ip, Seconds now) const { return fresh(rule_[index_or_throw(ip)], now); }

bool LivenessBitmaps::is_alive(Ipv4 ip, Seconds now) const {
  const auto i = index_or_throw(ip);
  return fresh(seen_[i], now) || fresh(rule_[i], now);
}

const char* fsd_verdict_name(FsdVerdict v) {
  switch (v) {
    case FsdVerdict::Buffered: return "buffered";
    case FsdVerdict::DroppedDuplicate: return "duplicate";
    case FsdVerdict::StoredDuplicate: return "duplicate_stored";
    case FsdVerdict::BenignDetected: return "benign";
    case FsdVerdict::DroppedTransient: return "transient";
    case FsdVerdict::CollectedIcmpError: return "icmp_error";
    case FsdVerdict::DroppedRingFull: return "ring_full";
    case FsdVerdict::DroppedBufferFull: return "buffer_full";
  }
  return "?";
}

const char* reason_name(CollectReason r) { return r == CollectReason::DtExpired ? "dt_expired" : "icmp_error"; }

const char* liveness_name(Liveness l) {
  switch (l) {
    case Liveness::Alive: return "alive";
    case Liveness::Dark: return "dark";
    case Liveness::External: return "external";
  }
  return "?";
}

FsdEngine::FsdEngine(const NetworkConfig& net, const FsdConfig& cfg)
    : net_(&net),
      cfg_(cfg),
      anonymizer_(net),
      table_(cfg.hash_buckets, cfg.hash_seed),
      buffer_(cfg.buffer_capacity),
      liveness_(net.internal_prefixes, net.timers.t_alive) {
  for (std::size_t i = 0; i < kTimeoutClasses; ++i) rings_.emplace_back(cfg.ring_capacity);
  clean_batch_ = static_cast<std::size_t>(
      std::ceil(net.timers.clean_fraction * static_cast<double>(table_.bucket_count())));
  if (clean_batch_ == 0) clean_batch_ = 1;
}

Seconds FsdEngine::timeout_of(TimeoutClass c) const {
  return c == TimeoutClass::Impersonated ? net_->timers.detection_timeout_impersonated
                                         : net_->timers.detection_timeout;
}

std::size_t FsdEngine::ring_occupancy() const {
  std::size_t n = 0;
  for (const auto& r : rings_) n += r.size();
  return n;
}

void FsdEngine::note_watermarks() {
  stats_.ring_high_watermark = std::max(stats_.ring_high_watermark, ring_occupancy());
  stats_.hash_high_watermark = std::max(stats_.hash_high_watermark, table_.size());
}

ExpiredPacket FsdEngine::make_collected(StoredPacket sp, CollectReason reason, Seconds t_arr, Seconds now) const {
  ExpiredPacket out;
  out.reason = reason;
  out.arrived = sp.arrived;
  out.t_arr = t_arr;
  out.collected_at = now;
  if (sp.meta.dst_internal) {
    const Ipv4 real = anonymizer_.reveal(sp.pkt.dst_ip, true, sp.meta);
    out.dst_liveness = liveness_.is_alive(real, now) ? Liveness::Alive : Liveness::Dark;
  } else {
    out.dst_liveness = Liveness::External;
  }
  out.pkt = std::move(sp.pkt);
  out.meta = sp.meta;
  return out;
}

FsdAction FsdEngine::on_packet(const MirroredPacket& in, Seconds now) {
  const PacketRecord& pkt = in.pkt;
  ++stats_.packets;
  if (in.meta.src_internal) liveness_.refresh_seen(anonymizer_.reveal(pkt.src_ip, true, in.meta), now);

  FsdAction action;
  if (is_icmp_error(pkt)) {
    ++stats_.icmp_errors;
    action.verdict = FsdVerdict::CollectedIcmpError;
    action.collected = make_collected(StoredPacket{pkt, in.meta, in.arrived}, CollectReason::IcmpError, now, now);
    return action;
  }

  const FlowKey key = make_flow_key(pkt);
  const FlowHandle h = table_.find(key);
  if (h == kNullFlow) {
    const TimeoutClass tc = in.meta.bypass && net_->is_impersonated(pkt.dst(), pkt.proto)
                                ? TimeoutClass::Impersonated
                                : TimeoutClass::Standard;
    DescriptorRing& ring = rings_[static_cast<std::size_t>(tc)];
    if (ring.full()) {
      ++stats_.ring_full;
      action.verdict = FsdVerdict::DroppedRingFull;
      return action;
    }
    auto slot = buffer_.acquire(StoredPacket{pkt, in.meta, in.arrived});
    if (!slot) {
      ++stats_.buffer_full;
      action.verdict = FsdVerdict::DroppedBufferFull;
      return action;
    }
    FlowEntry e;
    e.key = key;
    e.status = FlowStatus::Suspicious;
    e.t_arr = now;
    e.initiator = pkt.src();
    e.timeout_class = tc;
    e.buffer_slot = *slot;
    const FlowHandle nh = table_.insert(std::move(e));
    table_.at(nh).descriptor = ring.push(Descriptor{now, nh, *slot});
    ++live_descriptors_;
    ++stats_.buffered;
    note_watermarks();
    action.verdict = FsdVerdict::Buffered;
    return action;
  }

  FlowEntry& e = table_.at(h);
  if (e.status == FlowStatus::Benign) {
    ++stats_.transient_dropped;
    action.verdict = FsdVerdict::DroppedTransient;
    return action;
  }

  const StoredPacket& opener = buffer_.peek(e.buffer_slot);
  if (classify_response(opener.pkt, pkt) == ResponseClass::Response) {
    DescriptorRing& ring = rings_[static_cast<std::size_t>(e.timeout_class)];
    ring.at(*e.descriptor).flow = kNullFlow;
    --live_descriptors_;
    buffer_.release(e.buffer_slot);
    for (auto s : e.duplicate_slots) buffer_.release(s);
    e.duplicate_slots.clear();
    e.descriptor.reset();
    e.status = FlowStatus::Benign;
    e.t_resp = now;
    e.responder = pkt.src();
    ++benign_entries_;
    ++stats_.benign;

    const Ipv4 responder_ip = anonymizer_.reveal(pkt.src_ip, in.meta.src_internal, in.meta);
    action.verdict = FsdVerdict::BenignDetected;
    action.rules = rules_for_responder(ServiceKey{responder_ip, pkt.src_port, pkt.proto}, net_->timers.rule_ttl);
    return action;
  }

  // Anything else on a pending flow is a repeat of the request.
  if (cfg_.store_duplicates) {
    auto slot = buffer_.acquire(StoredPacket{pkt, in.meta, in.arrived});
    if (!slot) {
      ++stats_.buffer_full;
      action.verdict = FsdVerdict::DroppedBufferFull;
      return action;
    }
    e.duplicate_slots.push_back(*slot);
    ++stats_.duplicates_stored;
    action.verdict = FsdVerdict::StoredDuplicate;
    return action;
  }
  ++stats_.duplicates_dropped;
  action.verdict = FsdVerdict::DroppedDuplicate;
  return action;
}

CheckResult FsdEngine::check_timers(Seconds now) {
  CheckResult result;
  // Impersonated ring first: its deadline is the tighter one.
  for (std::size_t c = kTimeoutClasses; c-- > 0;) {
    DescriptorRing& ring = rings_[c];
    const Seconds timeout = timeout_of(static_cast<TimeoutClass>(c));
    std::size_t popped = 0;
    while (popped < net_->timers.max_check_depth && !ring.empty()) {
      const Descriptor d = ring.front();
      ++result.scanned;
      if (d.flow == kNullFlow) {
        ring.pop();
        ++popped;
        ++stats_.null_skipped;
        continue;
      }
      if (now < d.t_arr + timeout) break;
      ring.pop();
      ++popped;
      --live_descriptors_;
      FlowEntry& e = table_.at(d.flow);
      std::vector<std::uint32_t> dups = std::move(e.duplicate_slots);
      table_.erase(d.flow);
      result.expired.push_back(make_collected(buffer_.release(d.buffer_slot), CollectReason::DtExpired, d.t_arr, now));
      for (auto s : dups) {
        StoredPacket sp = buffer_.release(s);
        const Seconds dup_arr = sp.arrived;
        result.expired.push_back(make_collected(std::move(sp), CollectReason::DtExpired, dup_arr, now));
      }
      ++stats_.expired;
    }
    result.popped += popped;
  }
  return result;
}

std::size_t FsdEngine::clean_benign(Seconds now) {
  const Seconds t_inst = net_->timers.t_inst;
  const std::size_t removed = table_.sweep(clean_cursor_, clean_batch_, [&](const FlowEntry& e) {
    return e.status == FlowStatus::Benign && now - *e.t_resp > t_inst;
  });
  clean_cursor_ = (clean_cursor_ + clean_batch_) % table_.bucket_count();
  benign_entries_ -= removed;
  stats_.cleaned += removed;
  return removed;
}

void FsdEngine::liveness_rule_sync(Ipv4 ip, RuleEvent event, Seconds now) {
  if (event == RuleEvent::Installed)
    ++stats_.rule_installed_syncs;
  else
    ++stats_.rule_deleted_syncs;
  liveness_.rule_sync(ip, event, now);
}

std::optional<Seconds> FsdEngine::next_check_due() const {
  std::optional<Seconds> due;
  for (std::size_t c = 0; c < kTimeoutClasses; ++c) {
    const DescriptorRing& ring = rings_[c];
    if (ring.empty()) continue;
    const Descriptor& d = ring.front();
    const Seconds t = d.flow == kNullFlow ? -std::numeric_limits<Seconds>::infinity()
                                          : d.t_arr + timeout_of(static_cast<TimeoutClass>(c));
    if (!due || t < *due) due = t;
  }
  return due;
}

}  // namespace errmon
