#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "errmon/collector.hpp"
#include "errmon/config.hpp"
#include "errmon/control.hpp"
#include "errmon/fsd.hpp"
#include "errmon/switch_sim.hpp"

namespace errmon {

/// Nearest-rank percentile, q in [0, 1]; 0 for an empty sample.
double percentile(std::vector<double> sample, double q);

struct PipelineOptions {
  /// Inject responder replies back into the switch.
  bool feed_replies = false;
  bool event_log = false;
  /// Virtual time simulated past the last packet; negative picks a horizon
  /// long enough for every timer and idle rule to run out.
  Seconds tail = -1.0;
  /// Periodic engine/queue samples, one line per metrics_interval.
  std::ostream* metrics = nullptr;
  /// One line per southbound call.
  std::ostream* batch_log = nullptr;
};

struct Distribution {
  std::size_t count = 0;
  double p50 = 0, p75 = 0, p95 = 0, p99 = 0, max = 0;

  static Distribution of(const std::vector<double>& sample);
};

struct RunSummary {
  std::size_t packets = 0;
  std::size_t injected = 0;
  SwitchCounters sw;
  FsdStats fsd;
  ControlStats control;
  CollectorStats collector;
  std::size_t transcripts = 0;
  std::size_t responder_replies = 0;
  std::size_t mirror_queue_high_watermark = 0;
  std::size_t pending_rules_high_watermark = 0;
  std::size_t timer_checks = 0;
  std::size_t clean_passes = 0;
  /// Share of switch packets dropped in the switch (whitelist + dynamic).
  double filtered_fraction = 0;
  double whitelist_share = 0;
  double dynamic_share = 0;
  double mirrored_share = 0;
  Distribution buffering;
  Distribution processing;
  Seconds first_ts = 0;
  Seconds end_time = 0;

  /// "key value" lines.
  void write(std::ostream& os) const;
};

/// Discrete-event wiring of switch, engine, control loop and collector in
/// virtual time. Same-instant events run in a fixed order: control
/// completions, switch ticks, packet arrivals, engine work, control drains,
/// metric samples.
class Pipeline {
 public:
  Pipeline(const Config& cfg, PipelineOptions opts = {});
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void add_sink(RecordSink* sink) { collector_.add_sink(sink); }
  RunSummary run(const std::vector<PacketRecord>& trace);

  const std::vector<std::string>& event_log() const { return log_; }
  const std::vector<double>& buffering_times() const { return buffering_; }
  const std::vector<double>& processing_times() const { return processing_; }
  const std::vector<PacketRecord>& replies() const { return replies_; }
  const SwitchSim& switch_sim() const { return switch_; }
  const FsdEngine& engine() const { return engine_; }
  const ControlPlane& control() const { return control_; }
  const Collector& collector() const { return collector_; }
  const Config& config() const { return cfg_; }

 private:
  enum class Kind : std::uint8_t { ControlComplete, SwitchTick, Packet, Injected, Engine, ControlWake, Metrics };
  struct Event {
    Seconds t;
    Kind kind;
    std::uint64_t seq;
    std::size_t index;
    bool operator>(const Event& o) const {
      if (t != o.t) return t > o.t;
      if (kind != o.kind) return kind > o.kind;
      return seq > o.seq;
    }
  };

  void push(Seconds t, Kind k, std::size_t index = 0);
  void on_packet(const PacketRecord& pkt, Seconds now, const char* tag);
  void on_engine(Seconds now, Seconds stamp);
  void plan_engine(Seconds from);
  std::optional<Seconds> next_timer_time() const;
  std::int64_t grid_index(Seconds t) const;
  void collect(const ExpiredPacket& e, Seconds now);
  void on_control_wake(Seconds now);
  void on_control_complete(Seconds now);
  void on_tick(Seconds now);
  void on_metrics(Seconds now);
  void log(Seconds t, const std::string& what);

  Config cfg_;
  PipelineOptions opts_;
  SwitchSim switch_;
  SwitchChannel channel_;
  ControlPlane control_;
  FsdEngine engine_;
  Collector collector_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  Seconds clock_ = 0;
  Seconds end_time_ = 0;
  Seconds busy_until_ = 0;
  std::optional<Seconds> engine_wake_;
  std::int64_t last_grid_ = -1;
  Seconds last_clean_ = 0;
  std::size_t timer_checks_ = 0;
  std::size_t clean_passes_ = 0;
  std::vector<PacketRecord> injected_;
  std::vector<PacketRecord> replies_;
  std::vector<double> buffering_;
  std::vector<double> processing_;
  std::vector<std::string> log_;
  const std::vector<PacketRecord>* trace_ = nullptr;
};

}  // namespace errmon
