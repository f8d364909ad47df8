#include "errmon/control.hpp"

#include <cmath>

namespace errmon {

bool SwitchChannel::fails() {
  if (failure_probability_ <= 0.0) return false;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < failure_probability_;
}

CallResult SwitchChannel::install(std::span<const MatRule> batch, Seconds now) {
  if (fails()) return {false, 0, 0, sw_->install_latency(batch.size())};
  const InstallReport r = sw_->install_rules(batch, now);
  return {true, r.installed, r.rejected, r.latency};
}

CallResult SwitchChannel::remove(std::span<const RuleDelete> batch, Seconds now) {
  const Seconds latency = sw_->delete_latency(batch.size());
  if (fails()) return {false, 0, 0, latency};
  return {true, sw_->delete_rules(batch, now), 0, latency};
}

ControlPlane::ControlPlane(const NetworkConfig& net, const ControlConfig& cfg, const SwitchConfig& sw_cfg,
                           SouthboundChannel& channel)
    : net_(&net),
      cfg_(cfg),
      whitelist_(sw_cfg.whitelist.begin(), sw_cfg.whitelist.end()),
      channel_(&channel),
      queue_(cfg.queue_capacity) {}

bool ControlPlane::enqueue_install(MatRule rule, Seconds now) {
  if (queue_.try_push(RuleOp::install(std::move(rule), now))) return true;
  ++stats_.queue_drops;
  return false;
}

void ControlPlane::on_idle_notifications(std::span<const IdleNotification> batch, Seconds now) {
  for (const auto& n : batch) {
    ++stats_.notifications;
    // Static entries never idle out; a notification naming one is bogus.
    if (whitelist_.contains(n.key.service.endpoint())) {
      ++stats_.whitelist_notifications;
      continue;
    }
    if (!pending_deletes_.emplace(n.key, n.generation).second) {
      ++stats_.duplicate_notifications;
      continue;
    }
    if (!queue_.try_push(RuleOp::remove(RuleDelete{n.key, n.generation}, now))) {
      pending_deletes_.erase({n.key, n.generation});
      ++stats_.queue_drops;
    }
  }
}

std::optional<Seconds> ControlPlane::completes_at() const {
  if (!in_flight_) return std::nullopt;
  return in_flight_->report.completes_at;
}

BatchReport ControlPlane::drain_and_apply(Seconds now) {
  BatchReport report;
  report.started_at = report.completes_at = now;
  if (in_flight_ || now < ready_at_ || queue_.empty()) {
    report.queue_after = queue_.size();
    return report;
  }

  std::vector<RuleOp> ops = queue_.pop_up_to(net_->timers.batch_size);
  std::vector<RuleOp> install_ops;
  std::vector<RuleOp> delete_ops;
  for (auto& op : ops) (op.kind == RuleOpKind::Install ? install_ops : delete_ops).push_back(std::move(op));

  InFlight flight;
  std::vector<RuleOp> failed;
  Seconds t = now;

  auto sync_for = [&](Ipv4 ip, RuleEvent ev) {
    if (is_internal(ip, *net_)) flight.syncs.push_back({ip, ev, 0.0});
  };

  if (!install_ops.empty()) {
    std::vector<MatRule> rules;
    rules.reserve(install_ops.size());
    for (const auto& op : install_ops) rules.push_back(op.rule);
    const CallResult r = channel_->install(rules, t);
    ++stats_.install_calls;
    t += r.latency;
    report.install_latency = r.latency;
    if (r.ok) {
      report.installs = r.applied;
      report.rejected = r.rejected;
      report.per_rule_install = r.latency / static_cast<double>(rules.size());
      stats_.rules_installed += r.applied;
      stats_.rules_rejected += r.rejected;
      // Rejections hit the overflow suffix of the batch.
      for (std::size_t i = 0; i < r.applied && i < rules.size(); ++i) sync_for(rules[i].key.service.ip, RuleEvent::Installed);
    } else {
      ++stats_.failed_calls;
      failed.insert(failed.end(), install_ops.begin(), install_ops.end());
    }
  }

  if (!delete_ops.empty()) {
    std::vector<RuleDelete> dels;
    dels.reserve(delete_ops.size());
    for (const auto& op : delete_ops) dels.push_back(op.del);
    const CallResult r = channel_->remove(dels, t);
    ++stats_.delete_calls;
    t += r.latency;
    report.delete_latency = r.latency;
    if (r.ok) {
      report.deletes = dels.size();
      report.per_rule_delete = r.latency / static_cast<double>(dels.size());
      stats_.deletes_applied += r.applied;
      for (const auto& d : dels) {
        pending_deletes_.erase({d.key, d.generation.value_or(0)});
        sync_for(d.key.service.ip, RuleEvent::Deleted);
      }
    } else {
      ++stats_.failed_calls;
      failed.insert(failed.end(), delete_ops.begin(), delete_ops.end());
    }
  }

  report.completes_at = t;
  if (!failed.empty()) {
    std::uint32_t worst = 0;
    for (auto it = failed.rbegin(); it != failed.rend(); ++it) {
      RuleOp op = *it;
      ++op.attempts;
      if (op.attempts >= cfg_.max_attempts) {
        ++report.abandoned;
        ++stats_.abandoned_ops;
        if (op.kind == RuleOpKind::Delete) pending_deletes_.erase({op.del.key, op.del.generation.value_or(0)});
        continue;
      }
      worst = std::max(worst, op.attempts);
      queue_.push_front(std::move(op));
      ++report.requeued;
    }
    if (report.requeued > 0) ready_at_ = t + cfg_.backoff_base * std::ldexp(1.0, static_cast<int>(worst) - 1);
  }
  for (auto& s : flight.syncs) s.at = t;
  report.queue_after = queue_.size();
  flight.report = report;
  in_flight_ = std::move(flight);
  return report;
}

std::vector<LivenessSync> ControlPlane::complete(Seconds now) {
  if (!in_flight_) return {};
  std::vector<LivenessSync> syncs = std::move(in_flight_->syncs);
  for (auto& s : syncs) s.at = now;
  ready_at_ = std::max(ready_at_, in_flight_->report.completes_at);
  in_flight_.reset();
  return syncs;
}

}  // namespace errmon
