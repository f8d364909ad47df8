#include "errmon/switch_sim.hpp"

#include <algorithm>

namespace errmon {
namespace {

// TTL arithmetic runs in floating point; anything this close to zero has
// finished its countdown.
constexpr double kTtlEpsilon = 1e-9;

}  // namespace

const char* rule_side_name(RuleSide side) { return side == RuleSide::MatchAsDst ? "dst" : "src"; }

std::string RuleKey::to_string() const { return service.to_string() + " as " + rule_side_name(side); }

const char* verdict_name(SwitchVerdict v) {
  switch (v) {
    case SwitchVerdict::DroppedWhitelist: return "whitelist";
    case SwitchVerdict::DroppedFlowRule: return "flow_rule";
    case SwitchVerdict::Mirrored: return "mirrored";
    case SwitchVerdict::DroppedBackpressure: return "backpressure";
  }
  return "?";
}

std::vector<MatRule> rules_for_responder(const ServiceKey& responder, Seconds ttl) {
  std::vector<MatRule> rules(2);
  rules[0].key = {responder, RuleSide::MatchAsDst};
  rules[1].key = {responder, RuleSide::MatchAsSrc};
  for (auto& r : rules) r.ttl_initial = r.ttl_remaining = ttl;
  return rules;
}

SwitchSim::SwitchSim(const NetworkConfig& net, const SwitchConfig& cfg, const LatencyModel& install_latency,
                     const LatencyModel& delete_latency)
    : net_(&net),
      cfg_(cfg),
      install_latency_(install_latency),
      delete_latency_(delete_latency),
      anonymizer_(net),
      whitelist_(cfg.whitelist.begin(), cfg.whitelist.end()),
      mirror_out_(cfg.mirror_queue_capacity),
      notify_out_(cfg.notify_queue_capacity) {
  table_.reserve(std::min<std::size_t>(cfg.dynamic_capacity, 1u << 20));
}

bool SwitchSim::is_whitelisted(const ServiceKey& key) const {
  return !whitelist_.empty() && whitelist_.contains(key.endpoint());
}

const MatRule* SwitchSim::find_rule(const RuleKey& key) const {
  auto it = table_.find(key);
  return it == table_.end() ? nullptr : &it->second;
}

MatRule* SwitchSim::match(const RuleKey& key, Seconds now) {
  auto it = table_.find(key);
  if (it == table_.end() || now < it->second.effective_at) return nullptr;
  return &it->second;
}

SwitchVerdict SwitchSim::process_packet(const PacketRecord& pkt, Seconds now) {
  ++counters_.packets;
  // Whitelist entries name a service endpoint; both directions of its
  // traffic are covered.
  if (!whitelist_.empty() && (whitelist_.contains(pkt.dst()) || whitelist_.contains(pkt.src()))) {
    ++counters_.whitelist_hits;
    return SwitchVerdict::DroppedWhitelist;
  }
  if (!table_.empty()) {
    MatRule* hit = match({{pkt.dst_ip, pkt.dst_port, pkt.proto}, RuleSide::MatchAsDst}, now);
    if (!hit) hit = match({{pkt.src_ip, pkt.src_port, pkt.proto}, RuleSide::MatchAsSrc}, now);
    if (hit) {
      hit->ttl_remaining = hit->ttl_initial;
      hit->matched_in_interval = true;
      ++counters_.dynamic_hits;
      return SwitchVerdict::DroppedFlowRule;
    }
  }
  const MirrorMeta meta = anonymizer_.classify(pkt);
  if (!mirror_out_.try_push(MirroredPacket{anonymizer_.apply(pkt, meta), meta, now})) {
    ++counters_.backpressure_drops;
    return SwitchVerdict::DroppedBackpressure;
  }
  ++counters_.mirrored;
  return SwitchVerdict::Mirrored;
}

InstallReport SwitchSim::install_rules(std::span<const MatRule> batch, Seconds now) {
  InstallReport report;
  report.latency = install_latency_.call_latency(batch.size());
  for (const auto& rule : batch) {
    auto it = table_.find(rule.key);
    if (it == table_.end() && table_.size() >= cfg_.dynamic_capacity) {
      ++report.rejected;
      continue;
    }
    MatRule r = rule;
    r.ttl_remaining = r.ttl_initial;
    r.installed_at = now;
    r.effective_at = now + report.latency;
    r.generation = next_generation_++;
    r.matched_in_interval = false;
    table_[rule.key] = r;
    ++report.installed;
  }
  counters_.rules_installed += report.installed;
  counters_.rules_rejected += report.rejected;
  return report;
}

std::size_t SwitchSim::delete_rules(std::span<const RuleDelete> keys, Seconds) {
  std::size_t removed = 0;
  for (const auto& d : keys) {
    auto it = table_.find(d.key);
    if (it == table_.end()) continue;
    if (d.generation && *d.generation != it->second.generation) continue;
    table_.erase(it);
    ++removed;
  }
  counters_.rules_deleted += removed;
  return removed;
}

std::vector<IdleNotification> SwitchSim::tick(Seconds now) {
  std::vector<IdleNotification> fired;
  const Seconds interval = net_->timers.query_interval;
  if (last_tick_ && now + kTtlEpsilon < *last_tick_ + interval) return fired;
  last_tick_ = now;
  for (auto it = table_.begin(); it != table_.end();) {
    MatRule& r = it->second;
    if (now < r.effective_at) {
      ++it;
      continue;
    }
    if (r.matched_in_interval) {
      r.matched_in_interval = false;
      ++it;
      continue;
    }
    r.ttl_remaining = std::max(0.0, r.ttl_remaining - interval);
    if (r.ttl_remaining <= kTtlEpsilon) {
      fired.push_back({r.key, now, r.generation});
      it = table_.erase(it);
    } else {
      ++it;
    }
  }
  std::sort(fired.begin(), fired.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  for (const auto& n : fired) {
    if (!notify_out_.try_push(n)) ++counters_.notify_drops;
  }
  counters_.idle_notifications += fired.size();
  return fired;
}

void SwitchSim::dump_counters(std::ostream& os) const {
  os << "switch.packets " << counters_.packets << '\n'
     << "switch.whitelist_hits " << counters_.whitelist_hits << '\n'
     << "switch.dynamic_hits " << counters_.dynamic_hits << '\n'
     << "switch.mirrored " << counters_.mirrored << '\n'
     << "switch.backpressure_drops " << counters_.backpressure_drops << '\n'
     << "switch.rules_installed " << counters_.rules_installed << '\n'
     << "switch.rules_rejected " << counters_.rules_rejected << '\n'
     << "switch.rules_deleted " << counters_.rules_deleted << '\n'
     << "switch.idle_notifications " << counters_.idle_notifications << '\n'
     << "switch.notify_drops " << counters_.notify_drops << '\n'
     << "switch.rules_live " << table_.size() << '\n';
}

}  // namespace errmon
