#include "errmon/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "errmon/flow.hpp"
#include "errmon/packet.hpp"

namespace errmon {

double percentile(std::vector<double> sample, double q) {
  if (sample.empty()) return 0.0;
  q = std::clamp(q, 0.0, 1.0);
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sample.size())));
  if (rank == 0) rank = 1;
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(rank - 1), sample.end());
  return sample[rank - 1];
}

Distribution Distribution::of(const std::vector<double>& sample) {
  Distribution d;
  d.count = sample.size();
  if (sample.empty()) return d;
  std::vector<double> s = sample;
  std::sort(s.begin(), s.end());
  auto at = [&](double q) {
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s.size())));
    return s[std::max<std::size_t>(rank, 1) - 1];
  };
  d.p50 = at(0.50);
  d.p75 = at(0.75);
  d.p95 = at(0.95);
  d.p99 = at(0.99);
  d.max = s.back();
  return d;
}

void RunSummary::write(std::ostream& os) const {
  auto line = [&](const char* k, auto v) { os << k << ' ' << v << '\n'; };
  auto real = [&](const char* k, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    os << k << ' ' << buf << '\n';
  };
  line("packets", packets);
  line("injected_replies", injected);
  line("switch.whitelist_drops", sw.whitelist_hits);
  line("switch.flow_rule_drops", sw.dynamic_hits);
  line("switch.mirrored", sw.mirrored);
  line("switch.backpressure_drops", sw.backpressure_drops);
  line("switch.rules_installed", sw.rules_installed);
  line("switch.rules_rejected", sw.rules_rejected);
  line("switch.rules_deleted", sw.rules_deleted);
  line("switch.idle_notifications", sw.idle_notifications);
  line("fsd.packets", fsd.packets);
  line("fsd.buffered", fsd.buffered);
  line("fsd.duplicates_dropped", fsd.duplicates_dropped);
  line("fsd.duplicates_stored", fsd.duplicates_stored);
  line("fsd.benign_flows", fsd.benign);
  line("fsd.transient_drops", fsd.transient_dropped);
  line("fsd.icmp_errors", fsd.icmp_errors);
  line("fsd.expired", fsd.expired);
  line("fsd.ring_full_drops", fsd.ring_full);
  line("fsd.buffer_full_drops", fsd.buffer_full);
  line("fsd.cleaned", fsd.cleaned);
  line("fsd.ring_high_watermark", fsd.ring_high_watermark);
  line("fsd.hash_high_watermark", fsd.hash_high_watermark);
  line("fsd.timer_checks", timer_checks);
  line("fsd.clean_passes", clean_passes);
  line("control.install_calls", control.install_calls);
  line("control.delete_calls", control.delete_calls);
  line("control.rules_installed", control.rules_installed);
  line("control.deletes_applied", control.deletes_applied);
  line("control.failed_calls", control.failed_calls);
  line("control.abandoned_ops", control.abandoned_ops);
  line("control.queue_drops", control.queue_drops);
  line("control.pending_high_watermark", pending_rules_high_watermark);
  line("collector.erroneous", collector.records);
  line("collector.incoming", collector.incoming);
  line("collector.outgoing", collector.outgoing);
  line("collector.icmp_errors", collector.icmp_errors);
  line("collector.write_failures", collector.write_failures);
  line("responder.replies", responder_replies);
  line("responder.transcripts", transcripts);
  line("mirror_queue_high_watermark", mirror_queue_high_watermark);
  real("filtered_fraction", filtered_fraction);
  real("whitelist_share", whitelist_share);
  real("dynamic_share", dynamic_share);
  real("mirrored_share", mirrored_share);
  line("buffering.count", buffering.count);
  real("buffering.p50", buffering.p50);
  real("buffering.p75", buffering.p75);
  real("buffering.p95", buffering.p95);
  real("buffering.p99", buffering.p99);
  real("buffering.max", buffering.max);
  line("processing.count", processing.count);
  real("processing.p75", processing.p75);
  real("processing.p95", processing.p95);
  real("processing.p99", processing.p99);
  real("processing.max", processing.max);
  real("first_ts", first_ts);
  real("end_time", end_time);
}

Pipeline::Pipeline(const Config& cfg, PipelineOptions opts)
    : cfg_(cfg),
      opts_(opts),
      switch_(cfg_.network, cfg_.switch_cfg, cfg_.control.install_latency, cfg_.control.delete_latency),
      channel_(switch_, cfg_.control.failure_probability, cfg_.control.failure_seed),
      control_(cfg_.network, cfg_.control, cfg_.switch_cfg, channel_),
      engine_(cfg_.network, cfg_.fsd),
      collector_(cfg_.network, cfg_.responder) {}

void Pipeline::push(Seconds t, Kind k, std::size_t index) { events_.push(Event{t, k, seq_++, index}); }

void Pipeline::log(Seconds t, const std::string& what) {
  if (!opts_.event_log) return;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f ", t);
  log_.push_back(buf + what);
}

std::int64_t Pipeline::grid_index(Seconds t) const {
  return static_cast<std::int64_t>(std::floor(t / cfg_.network.timers.check_period + 1e-9));
}

std::optional<Seconds> Pipeline::next_timer_time() const {
  const auto due = engine_.next_check_due();
  if (!due) return std::nullopt;
  const Seconds pd = cfg_.network.timers.check_period;
  std::int64_t g = last_grid_ + 1;
  if (std::isfinite(*due)) g = std::max<std::int64_t>(g, static_cast<std::int64_t>(std::ceil(*due / pd - 1e-9)));
  return static_cast<double>(g) * pd;
}

void Pipeline::plan_engine(Seconds from) {
  from = std::max(from, busy_until_);
  std::optional<Seconds> wake;
  auto consider = [&](Seconds t) {
    t = std::max(t, from);
    if (!wake || t < *wake) wake = t;
  };
  if (!switch_.mirror_out().empty()) consider(from);
  if (auto t = next_timer_time()) consider(*t);
  if (engine_.benign_entries() > 0) consider(last_clean_ + cfg_.network.timers.clean_interval);
  if (!wake) return;
  if (engine_wake_ && *engine_wake_ <= *wake) return;
  engine_wake_ = wake;
  push(*wake, Kind::Engine);
}

void Pipeline::collect(const ExpiredPacket& e, Seconds now) {
  const ErroneousRecord r = collector_.record(e);
  if (e.reason == CollectReason::DtExpired) buffering_.push_back(e.collected_at - e.arrived);
  if (opts_.event_log)
    log(now, std::string("collect ") + reason_name(e.reason) + " " + direction_name(r.direction) + " " +
                 packet_label(e.pkt));
  if (e.meta.bypass && e.pkt.is_tcp() && cfg_.network.is_impersonated(e.pkt.dst(), e.pkt.proto)) {
    auto reply = collector_.responder_step(e.pkt, now);
    if (reply) {
      log(now, "responder reply " + tcp_flags_string(reply->tcp_flags));
      replies_.push_back(*reply);
      if (opts_.feed_replies) {
        injected_.push_back(*reply);
        push(now, Kind::Injected, injected_.size() - 1);
      }
    }
  }
}

void Pipeline::on_engine(Seconds now, Seconds stamp) {
  if (!engine_wake_ || *engine_wake_ != stamp) return;  // superseded
  engine_wake_.reset();
  if (busy_until_ > now) {
    plan_engine(busy_until_);
    return;
  }
  const EngineCostModel& cost = cfg_.fsd.cost;
  Seconds spent = 0;
  const auto timer_at = next_timer_time();
  if (timer_at && *timer_at <= now && grid_index(now) > last_grid_) {
    last_grid_ = grid_index(now);
    ++timer_checks_;
    CheckResult r = engine_.check_timers(now);
    spent = cost.per_descriptor * static_cast<double>(std::max<std::size_t>(r.scanned, 1));
    for (const auto& e : r.expired) collect(e, now);
  } else if (auto mp = switch_.mirror_out().try_pop()) {
    FsdAction a = engine_.on_packet(*mp, now);
    spent = cost.per_packet;
    processing_.push_back(now + spent - mp->arrived);
    if (opts_.event_log) log(now, std::string("fsd ") + fsd_verdict_name(a.verdict) + " " + packet_label(mp->pkt));
    if (a.collected) collect(*a.collected, now);
    if (!a.rules.empty()) {
      for (auto& rule : a.rules) control_.enqueue_install(rule, now + spent);
      push(now + spent, Kind::ControlWake);
    }
  } else if (engine_.benign_entries() > 0 && now >= last_clean_ + cfg_.network.timers.clean_interval) {
    last_clean_ = now;
    ++clean_passes_;
    const std::size_t removed = engine_.clean_benign(now);
    spent = cost.per_clean_bucket * static_cast<double>(engine_.clean_batch());
    if (removed > 0) log(now, "fsd clean removed=" + std::to_string(removed));
  }
  busy_until_ = now + spent;
  plan_engine(busy_until_);
}

void Pipeline::on_packet(const PacketRecord& pkt, Seconds now, const char* tag) {
  const SwitchVerdict v = switch_.process_packet(pkt, now);
  if (opts_.event_log) log(now, std::string(tag) + " " + verdict_name(v) + " " + packet_label(pkt));
  if (v == SwitchVerdict::Mirrored) plan_engine(now);
}

void Pipeline::on_control_wake(Seconds now) {
  if (control_.busy() || control_.queue().empty()) return;
  if (now < control_.ready_at()) {
    push(control_.ready_at(), Kind::ControlWake);
    return;
  }
  const BatchReport rep = control_.drain_and_apply(now);
  if (opts_.batch_log) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.6f %zu %zu %zu %.9g %.9g %.9g %zu %zu\n", now, rep.installs, rep.deletes,
                  rep.rejected, rep.install_latency + rep.delete_latency, rep.per_rule_install, rep.per_rule_delete,
                  rep.requeued, rep.queue_after);
    *opts_.batch_log << buf;
  }
  if (opts_.event_log)
    log(now, "control batch installs=" + std::to_string(rep.installs) + " deletes=" + std::to_string(rep.deletes));
  if (control_.busy()) push(*control_.completes_at(), Kind::ControlComplete);
}

void Pipeline::on_control_complete(Seconds now) {
  if (!control_.busy()) return;
  for (const auto& s : control_.complete(now)) engine_.liveness_rule_sync(s.ip, s.event, now);
  log(now, "control complete");
  push(now, Kind::ControlWake);
}

void Pipeline::on_tick(Seconds now) {
  switch_.tick(now);
  std::vector<IdleNotification> notes = switch_.notify_out().drain();
  if (!notes.empty()) {
    log(now, "switch idle notifications=" + std::to_string(notes.size()));
    control_.on_idle_notifications(notes, now);
    push(now, Kind::ControlWake);
  }
  const Seconds next = now + cfg_.network.timers.query_interval;
  if (next <= end_time_) push(next, Kind::SwitchTick);
}

void Pipeline::on_metrics(Seconds now) {
  if (opts_.metrics) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.6f %zu %zu %zu %zu %zu %zu %zu %zu %llu\n", now, engine_.ring_occupancy(),
                  engine_.live_descriptors(), engine_.hash_occupancy(), engine_.benign_entries(),
                  engine_.buffer_in_use(), control_.queue().size(), switch_.rule_count(),
                  switch_.mirror_out().size(), static_cast<unsigned long long>(collector_.stats().records));
    *opts_.metrics << buf;
  }
  const Seconds next = now + cfg_.fsd.metrics_interval;
  if (next <= end_time_) push(next, Kind::Metrics);
}

RunSummary Pipeline::run(const std::vector<PacketRecord>& trace) {
  trace_ = &trace;
  const Timers& t = cfg_.network.timers;
  const Seconds first = trace.empty() ? 0.0 : trace.front().ts;
  const Seconds last = trace.empty() ? 0.0 : trace.back().ts;
  const Seconds tail = opts_.tail >= 0 ? opts_.tail
                                       : std::max(t.detection_timeout, t.detection_timeout_impersonated) + t.t_inst +
                                             t.rule_ttl + 2 * t.query_interval;
  end_time_ = last + tail;
  clock_ = first;
  last_clean_ = first;
  last_grid_ = grid_index(first) - 1;
  busy_until_ = first;

  if (opts_.metrics)
    *opts_.metrics << "#t ring live_descriptors hash benign buffer pending_rules dynamic_rules mirror_queue collected\n";
  if (opts_.batch_log)
    *opts_.batch_log << "#t installs deletes rejected call_latency per_rule_install per_rule_delete requeued queue_after\n";

  for (std::size_t i = 0; i < trace.size(); ++i) push(trace[i].ts, Kind::Packet, i);
  if (!trace.empty()) {
    push(first + t.query_interval, Kind::SwitchTick);
    push(first, Kind::Metrics);
  }

  while (!events_.empty()) {
    const Event ev = events_.top();
    events_.pop();
    // Packets in a trace must not go back in time; clamp so callbacks never
    // see an earlier clock.
    const Seconds now = std::max(ev.t, clock_);
    clock_ = now;
    switch (ev.kind) {
      case Kind::ControlComplete: on_control_complete(now); break;
      case Kind::SwitchTick: on_tick(now); break;
      case Kind::Packet: on_packet(trace[ev.index], now, "pkt"); break;
      case Kind::Injected: on_packet(injected_[ev.index], now, "reply"); break;
      case Kind::Engine: on_engine(now, ev.t); break;
      case Kind::ControlWake: on_control_wake(now); break;
      case Kind::Metrics: on_metrics(now); break;
    }
  }

  RunSummary s;
  s.packets = trace.size();
  s.injected = injected_.size();
  s.sw = switch_.counters();
  s.fsd = engine_.stats();
  s.control = control_.stats();
  s.collector = collector_.stats();
  s.transcripts = collector_.responder().transcripts().size();
  s.responder_replies = replies_.size();
  s.mirror_queue_high_watermark = switch_.mirror_out().high_watermark();
  s.pending_rules_high_watermark = control_.queue().high_watermark();
  s.timer_checks = timer_checks_;
  s.clean_passes = clean_passes_;
  if (s.sw.packets > 0) {
    const double n = static_cast<double>(s.sw.packets);
    s.whitelist_share = static_cast<double>(s.sw.whitelist_hits) / n;
    s.dynamic_share = static_cast<double>(s.sw.dynamic_hits) / n;
    s.filtered_fraction = s.whitelist_share + s.dynamic_share;
    s.mirrored_share = static_cast<double>(s.sw.mirrored) / n;
  }
  s.buffering = Distribution::of(buffering_);
  s.processing = Distribution::of(processing_);
  s.first_ts = first;
  s.end_time = clock_;
  return s;
}

}  // namespace errmon
