#include "errmon/experiments.hpp"

#include <cstdio>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "errmon/anonymizer.hpp"
#include "errmon/flow.hpp"

namespace errmon {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

void ResultTable::write(std::ostream& os) const {
  os << '#';
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "\t" : "") << columns[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << r[i];
    os << '\n';
  }
}

std::size_t ResultTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::out_of_range("no column " + name);
}

double ResultTable::number(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(column(name)));
}

bool QueueRun::strictly_growing() const {
  if (checkpoints.size() < 2) return false;
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1]) return false;
  return true;
}

QueueRun simulate_rule_queue(const ControlConfig& ctl, std::size_t k, double rate, std::size_t arrivals,
                             std::uint64_t seed, std::size_t checkpoints) {
  NetworkConfig net;
  net.timers.batch_size = static_cast<std::uint32_t>(k);
  ControlConfig cc = ctl;
  cc.queue_capacity = arrivals + 1;
  SwitchConfig sw;
  ModelChannel channel(cc.install_latency, cc.delete_latency);
  ControlPlane cp(net, cc, sw, channel);

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  QueueRun run;
  run.batch_size = k;
  run.arrivals = arrivals;
  const std::size_t every = checkpoints == 0 ? 0 : std::max<std::size_t>(1, arrivals / checkpoints);
  std::size_t rules_in_calls = 0;

  Seconds t = 0;
  MatRule rule;
  for (std::size_t i = 0; i < arrivals; ++i) {
    t += gap(rng);
    // Let the control loop catch up to this arrival.
    while (cp.busy() && *cp.completes_at() <= t) {
      const Seconds done = *cp.completes_at();
      cp.complete(done);
      if (!cp.queue().empty()) {
        const BatchReport r = cp.drain_and_apply(done);
        ++run.calls;
        rules_in_calls += r.installs;
      }
    }
    rule.key.service.port = static_cast<std::uint16_t>(i);
    cp.enqueue_install(rule, t);
    if (!cp.busy()) {
      const BatchReport r = cp.drain_and_apply(t);
      ++run.calls;
      rules_in_calls += r.installs;
    }
    if (every > 0 && (i + 1) % every == 0) run.checkpoints.push_back(cp.queue().size());
  }
  run.high_watermark = cp.queue().high_watermark();
  run.final_length = cp.queue().size();
  run.mean_batch = run.calls == 0 ? 0.0 : static_cast<double>(rules_in_calls) / static_cast<double>(run.calls);
  return run;
}

ExperimentParams experiment_params_from(const KeyValueFile& kv) {
  ExperimentParams p;
  const std::string sec = "experiment";
  if (auto v = kv.get_uint(sec, "seed")) p.seed = *v;
  auto entry = [&](const char* key) { return kv.find(sec, key); };
  try {
    if (auto v = kv.get_string(sec, "k_values")) {
      p.k_values.clear();
      for (const auto& s : split_list(*v)) p.k_values.push_back(std::stoul(s));
    }
    if (auto v = kv.get_string(sec, "timer_points")) {
      p.timer_points.clear();
      for (const auto& s : split_list(*v)) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("expected p_d:d_max");
        p.timer_points.emplace_back(std::stod(s.substr(0, colon)),
                                    static_cast<std::uint32_t>(std::stoul(s.substr(colon + 1))));
      }
    }
    if (auto v = kv.get_string(sec, "dt_values")) {
      p.dt_values.clear();
      for (const auto& s : split_list(*v)) p.dt_values.push_back(std::stod(s));
    }
    if (auto v = kv.get_string(sec, "whitelist_fractions")) {
      p.whitelist_fractions.clear();
      for (const auto& s : split_list(*v)) p.whitelist_fractions.push_back(std::stod(s));
    }
  } catch (const std::exception& e) {
    for (const char* key : {"k_values", "timer_points", "dt_values", "whitelist_fractions"})
      if (auto* en = entry(key)) kv.fail(*en, std::string("bad list: ") + e.what());
    throw;
  }
  if (auto v = kv.get_double(sec, "rule_rate")) p.rule_rate = *v;
  if (auto v = kv.get_uint(sec, "rule_arrivals")) p.rule_arrivals = *v;
  if (auto v = kv.get_uint(sec, "whitelist_services")) p.whitelist_services = *v;
  if (kv.has_section("workload")) {
    p.workload = workload_from(kv);
    p.has_workload = true;
  }
  return p;
}

FlowKey observed_key(const FlowKey& key, const NetworkConfig& net) {
  auto view = [&](Endpoint ep) {
    const bool bypass = net.is_impersonated(key.lo, key.proto) || net.is_impersonated(key.hi, key.proto);
    if (net.anonymize && !bypass && is_internal(ep.ip, net)) ep.ip = obfuscate_ip(ep.ip, net.anonymization_key);
    return ep;
  };
  Endpoint a = view(key.lo), b = view(key.hi);
  if (b < a) std::swap(a, b);
  return FlowKey{a, b, key.proto};
}

Misclassification measure_misclassification(const Config& cfg, const Workload& w, RunSummary* summary) {
  Pipeline pipe(cfg);
  VectorRecordSink sink;
  pipe.add_sink(&sink);
  const RunSummary s = pipe.run(w.packets);
  if (summary) *summary = s;
  std::set<FlowKey> collected;
  for (const auto& r : sink.records)
    if (r.reason == CollectReason::DtExpired) collected.insert(make_flow_key(r.pkt));
  Misclassification m;
  for (const auto& f : w.flows) {
    if (!f.answered || f.whitelisted) continue;
    ++m.answered;
    if (collected.contains(observed_key(f.key, cfg.network))) ++m.misclassified;
  }
  return m;
}

std::vector<Endpoint> synthetic_whitelist(std::size_t n, const NetworkConfig& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x3a11e7ULL);
  std::set<Endpoint> seen;
  std::vector<Endpoint> out;
  const std::uint16_t ports[] = {80, 443, 443, 443, 53, 123, 993, 8443};
  while (out.size() < n) {
    const Ipv4 ip(static_cast<std::uint32_t>(rng()));
    const unsigned first = ip.value >> 24;
    if (first == 0 || first == 10 || first == 127 || first >= 224 || is_internal(ip, net)) continue;
    const Endpoint ep{ip, ports[rng() % std::size(ports)]};
    if (seen.insert(ep).second) out.push_back(ep);
  }
  return out;
}

WorkloadSpec timer_workload(std::uint64_t seed) {
  WorkloadSpec w;
  w.seed = seed;
  w.flows = 40000;
  w.flow_rate = 20000;
  w.answered_fraction = 0.3;
  w.response_delay = {{1.0, DelayComponent::Kind::Uniform, 1e-4, 0.05}};
  w.duplicate_fraction = 0.05;
  w.icmp_error_fraction = 0.05;
  return w;
}

WorkloadSpec dt_workload(std::uint64_t seed) {
  WorkloadSpec w;
  w.seed = seed;
  w.flows = 20000;
  w.flow_rate = 2000;
  w.answered_fraction = 0.9;
  // Mostly fast answers with a long tail, as seen for outgoing traffic.
  w.response_delay = {{0.9, DelayComponent::Kind::LogNormal, -4.0, 1.0},
                      {0.1, DelayComponent::Kind::LogNormal, -1.0, 1.2}};
  w.duplicate_fraction = 0.0;
  w.icmp_error_fraction = 0.0;
  return w;
}

WorkloadSpec filter_workload(std::uint64_t seed) {
  WorkloadSpec w;
  w.seed = seed;
  w.flows = 20000;
  w.flow_rate = 500;
  w.answered_fraction = 0.6 / 0.7;  // 10% of all flows stay unanswered
  w.response_delay = {{1.0, DelayComponent::Kind::Uniform, 1e-4, 0.05}};
  w.followup_packets = 39;
  w.followup_gap = 0.1;
  w.duplicate_fraction = 0.0;
  w.icmp_error_fraction = 0.0;
  w.whitelist_fraction = 0.3;
  return w;
}

ResultTable batch_sweep(const Config& cfg, const ExperimentParams& p) {
  ResultTable t;
  t.columns = {"k", "call_latency", "per_rule_latency", "speedup_vs_k1", "queue_high_watermark", "queue_final",
               "queue_growing", "mean_batch"};
  const LatencyModel& m = cfg.control.install_latency;
  const double base = m.per_rule_latency(1);
  for (std::size_t k : p.k_values) {
    const QueueRun q = simulate_rule_queue(cfg.control, k, p.rule_rate, p.rule_arrivals, p.seed);
    t.add({fmt(k), fmt(m.call_latency(k)), fmt(m.per_rule_latency(k)), fmt(base / m.per_rule_latency(k)),
           fmt(q.high_watermark), fmt(q.final_length), q.strictly_growing() ? "1" : "0", fmt(q.mean_batch)});
  }
  return t;
}

ResultTable timer_sweep(const Config& cfg, const ExperimentParams& p) {
  ResultTable t;
  t.columns = {"p_d",           "d_max",         "buffering_p75", "buffering_p95", "buffering_p99",
               "processing_p75", "processing_p95", "processing_p99", "timer_checks", "ring_high_watermark"};
  WorkloadSpec spec = p.has_workload ? p.workload : timer_workload(p.seed);
  spec.reference_timeout = cfg.network.timers.detection_timeout;
  const Workload w = generate_workload(spec, cfg);
  for (const auto& [pd, dmax] : p.timer_points) {
    Config c = cfg;
    c.network.timers.check_period = pd;
    c.network.timers.max_check_depth = dmax;
    Pipeline pipe(c);
    const RunSummary s = pipe.run(w.packets);
    t.add({fmt(pd), fmt(std::size_t{dmax}), fmt(s.buffering.p75), fmt(s.buffering.p95), fmt(s.buffering.p99),
           fmt(s.processing.p75), fmt(s.processing.p95), fmt(s.processing.p99), fmt(s.timer_checks),
           fmt(s.fsd.ring_high_watermark)});
  }
  return t;
}

ResultTable dt_sweep(const Config& cfg, const ExperimentParams& p) {
  ResultTable t;
  t.columns = {"dt", "answered_flows", "misclassified", "misclassified_rate", "erroneous_records",
               "ring_high_watermark", "buffering_p99"};
  WorkloadSpec spec = p.has_workload ? p.workload : dt_workload(p.seed);
  const Workload w = generate_workload(spec, cfg);
  for (double dt : p.dt_values) {
    Config c = cfg;
    c.network.timers.detection_timeout = dt;
    if (c.network.timers.detection_timeout_impersonated >= dt) c.network.timers.detection_timeout_impersonated = dt / 2;
    RunSummary s;
    const Misclassification m = measure_misclassification(c, w, &s);
    t.add({fmt(dt), fmt(m.answered), fmt(m.misclassified), fmt(m.rate()), fmt(s.collector.records),
           fmt(s.fsd.ring_high_watermark), fmt(s.buffering.p99)});
  }
  return t;
}

ResultTable filter_efficiency(const Config& cfg, const ExperimentParams& p) {
  ResultTable t;
  t.columns = {"whitelist_fraction", "packets", "filtered_fraction", "whitelist_share", "dynamic_share",
               "mirrored_share", "erroneous_records"};
  Config c = cfg;
  if (c.switch_cfg.whitelist.empty())
    c.switch_cfg.whitelist = synthetic_whitelist(p.whitelist_services, c.network, p.seed);
  for (double wf : p.whitelist_fractions) {
    WorkloadSpec spec = p.has_workload ? p.workload : filter_workload(p.seed);
    spec.whitelist_fraction = wf;
    // Keep the share of erroneous single-packet flows fixed at 10%.
    if (!p.has_workload) spec.answered_fraction = wf >= 1.0 ? 1.0 : std::min(1.0, (0.9 - wf) / (1.0 - wf));
    const Workload w = generate_workload(spec, c);
    Pipeline pipe(c);
    const RunSummary s = pipe.run(w.packets);
    t.add({fmt(wf), fmt(s.packets), fmt(s.filtered_fraction), fmt(s.whitelist_share), fmt(s.dynamic_share),
           fmt(s.mirrored_share), fmt(s.collector.records)});
  }
  return t;
}

ResultTable run_experiment(const std::string& name, const Config& cfg, const ExperimentParams& p) {
  if (name == "batch_sweep") return batch_sweep(cfg, p);
  if (name == "timer_sweep") return timer_sweep(cfg, p);
  if (name == "dt_sweep") return dt_sweep(cfg, p);
  if (name == "filter_efficiency") return filter_efficiency(cfg, p);
  throw std::invalid_argument("unknown experiment '" + name +
                              "' (expected batch_sweep, timer_sweep, dt_sweep or filter_efficiency)");
}

}  // namespace errmon
