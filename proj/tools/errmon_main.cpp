#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "errmon/analytics.hpp"
#include "errmon/collector.hpp"
#include "errmon/config.hpp"
#include "errmon/experiments.hpp"
#include "errmon/pcap.hpp"
#include "errmon/replay.hpp"
#include "errmon/scripted_trace.hpp"
#include "errmon/workload.hpp"

namespace fs = std::filesystem;
using namespace errmon;

namespace {

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(p, mode);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

struct RunArgs {
  std::string config;
  std::string trace;
  std::string spec;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool event_log = false;
  bool feed_replies = false;
  double tail = -1.0;
};

int cmd_run(const RunArgs& a) {
  auto kv = KeyValueFile::load(a.config);
  Config cfg = config_from(kv);

  std::vector<PacketRecord> trace;
  if (!a.trace.empty()) {
    trace = load_trace(a.trace);
  } else {
    WorkloadSpec spec;
    if (!a.spec.empty()) {
      auto spec_kv = KeyValueFile::load(a.spec);
      spec = workload_from(spec_kv);
      spec_kv.reject_unused();
    } else if (kv.has_section("workload")) {
      spec = workload_from(kv);
    } else {
      throw ConfigError("no trace given and " + a.config + " has no [workload] section");
    }
    if (a.seed) spec.seed = *a.seed;
    trace = generate_workload(spec, cfg).packets;
  }
  kv.reject_unused();

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  auto tsv = open_out(dir / "erroneous.tsv");
  auto pcap = open_out(dir / "erroneous.pcap", std::ios::binary);
  auto metrics = open_out(dir / "metrics.tsv");
  auto batches = open_out(dir / "batches.tsv");

  PipelineOptions opts;
  opts.feed_replies = a.feed_replies;
  opts.event_log = a.event_log;
  opts.tail = a.tail;
  opts.metrics = &metrics;
  opts.batch_log = &batches;

  Pipeline pipeline(cfg, opts);
  TsvRecordSink tsv_sink(tsv);
  PcapWriter writer(pcap);
  PcapRecordSink pcap_sink(writer);
  pipeline.add_sink(&tsv_sink);
  pipeline.add_sink(&pcap_sink);
  const RunSummary summary = pipeline.run(trace);

  auto sum = open_out(dir / "summary.txt");
  summary.write(sum);
  if (a.event_log) {
    auto ev = open_out(dir / "events.log");
    for (const auto& line : pipeline.event_log()) ev << line << '\n';
  }
  if (!pipeline.replies().empty()) write_pcap((dir / "replies.pcap").string(), pipeline.replies());
  summary.write(std::cout);
  if (summary.collector.write_failures > 0) {
    std::cerr << "errmon: " << summary.collector.write_failures << " record writes failed\n";
    return 3;
  }
  return 0;
}

int cmd_experiment(const std::string& name, const std::string& config, const std::string& out,
                   std::optional<std::uint64_t> seed) {
  Config cfg;
  ExperimentParams params;
  if (!config.empty()) {
    auto kv = KeyValueFile::load(config);
    cfg = config_from(kv);
    params = experiment_params_from(kv);
    kv.reject_unused();
  }
  if (seed) params.seed = *seed;
  const ResultTable table = run_experiment(name, cfg, params);
  if (out.empty() || out == "-") {
    table.write(std::cout);
  } else {
    if (auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
    auto os = open_out(out);
    table.write(os);
  }
  return 0;
}

struct AnalyticsArgs {
  std::string records;
  std::string config;
  std::string acked;
  std::string key;
};

AnalyticsContext context_for(const AnalyticsArgs& a) {
  AnalyticsContext ctx;
  if (!a.config.empty()) {
    auto kv = KeyValueFile::load(a.config);
    ctx = AnalyticsContext::from(config_from(kv).network);
  }
  if (!a.acked.empty()) ctx.acknowledged_scanners = load_prefix_list(a.acked);
  if (!a.key.empty()) {
    auto key = parse_hex_key(a.key);
    if (!key) throw ConfigError("--key expects up to 8 hex digits");
    ctx.anonymization_key = *key;
  }
  return ctx;
}

void add_analytics_options(CLI::App* sub, AnalyticsArgs& a) {
  sub->add_option("--records", a.records, "Erroneous-record TSV file")->required()->check(CLI::ExistingFile);
  sub->add_option("--config", a.config, "Pipeline config (prefixes, anonymization key)")->check(CLI::ExistingFile);
  sub->add_option("--acked", a.acked, "Acknowledged-scanner prefix list")->check(CLI::ExistingFile);
  sub->add_option("--key", a.key, "Anonymization key (hex) to recover internal hosts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Erroneous-traffic monitoring pipeline and offline analytics"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Replay a trace or generated workload through the pipeline");
  run_cmd->alias("run_pipeline");
  run_cmd->add_option("--config", run.config, "Pipeline config file")->required()->check(CLI::ExistingFile);
  auto* trace_opt = run_cmd->add_option("--trace", run.trace, "pcap or scripted trace")->check(CLI::ExistingFile);
  run_cmd->add_option("--spec", run.spec, "Workload spec file ([workload] section)")
      ->check(CLI::ExistingFile)
      ->excludes(trace_opt);
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Override the workload seed");
  run_cmd->add_option("--tail", run.tail, "Virtual seconds simulated after the last packet (default: automatic)");
  run_cmd->add_flag("--event-log", run.event_log, "Write events.log");
  run_cmd->add_flag("--feed-replies", run.feed_replies, "Inject responder replies back into the switch");

  std::string exp_name, exp_config, exp_out;
  std::optional<std::uint64_t> exp_seed;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a parameter sweep");
  exp_cmd->alias("run_experiment");
  exp_cmd->add_option("--experiment,-e", exp_name, "batch_sweep | timer_sweep | dt_sweep | filter_efficiency")
      ->required()
      ->check(CLI::IsMember({"batch_sweep", "timer_sweep", "dt_sweep", "filter_efficiency"}));
  exp_cmd->add_option("--config", exp_config, "Config with optional [experiment] and [workload] sections")
      ->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", exp_out, "Result TSV (default: stdout)");
  exp_cmd->add_option("--seed", exp_seed, "Override the experiment seed");

  AnalyticsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "Hourly sender statistics");
  add_analytics_options(stats_cmd, stats_args);

  AnalyticsArgs ports_args;
  std::string port_class = "dark";
  auto* ports_cmd = app.add_subcommand("ports", "Per-port histogram of incoming packets for one host class");
  add_analytics_options(ports_cmd, ports_args);
  ports_cmd->add_option("--class", port_class, "telescope | active | dark")
      ->check(CLI::IsMember({"telescope", "active", "dark"}))
      ->capture_default_str();

  AnalyticsArgs scan_args;
  ScanThresholds th;
  bool all_senders = false;
  auto* scan_cmd = app.add_subcommand("scanners", "Classify senders as horizontal, vertical or mixed scanners");
  add_analytics_options(scan_cmd, scan_args);
  scan_cmd->add_option("--theta-d", th.theta_d, "Minimum hosts for a horizontal scan")->capture_default_str();
  scan_cmd->add_option("--theta-p", th.theta_p, "Maximum ports for a horizontal scan")->capture_default_str();
  scan_cmd->add_option("--theta-p-prime", th.theta_p_prime, "Minimum ports for a vertical scan")->capture_default_str();
  scan_cmd->add_option("--theta-d-prime", th.theta_d_prime, "Maximum hosts for a vertical scan")->capture_default_str();
  scan_cmd->add_option("--min-packets", th.min_packets, "Skip senders with fewer records")->capture_default_str();
  scan_cmd->add_flag("--all-senders", all_senders, "Include internal senders (outgoing records)");

  AnalyticsArgs ccdf_args;
  auto* ccdf_cmd = app.add_subcommand("ccdf", "CCDF of distinct external senders per internal host");
  add_analytics_options(ccdf_cmd, ccdf_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*exp_cmd) return cmd_experiment(exp_name, exp_config, exp_out, exp_seed);
    if (*stats_cmd) {
      const auto ctx = context_for(stats_args);
      const auto rows = load_records(stats_args.records);
      std::cout << "#hour\tunique_src_ips\tunique_ports\thosts\tmean_senders_per_host\tstd_senders_per_host\t"
                   "std_ports\tacked_scanners\n";
      for (const auto& s : hourly_sender_stats(rows, ctx)) {
        std::printf("%lld\t%zu\t%zu\t%zu\t%.6f\t%.6f\t%.6f\t%zu\n", static_cast<long long>(s.hour),
                    s.unique_src_ips, s.unique_ports, s.hosts, s.mean_senders_per_host, s.std_senders_per_host,
                    s.std_ports, s.acked_scanners);
      }
      return 0;
    }
    if (*ports_cmd) {
      const auto ctx = context_for(ports_args);
      const auto rows = load_records(ports_args.records);
      std::cout << "#port\tpackets\n";
      for (const auto& [port, n] : per_port_histogram(rows, *parse_host_class(port_class), ctx))
        std::cout << port << '\t' << n << '\n';
      return 0;
    }
    if (*scan_cmd) {
      const auto ctx = context_for(scan_args);
      const auto rows = load_records(scan_args.records);
      std::cout << "#src\tpackets\tdistinct_hosts\tdistinct_ports\tclass\n";
      for (const auto& r : classify_senders(rows, th, !all_senders, ctx))
        std::cout << r.src.to_string() << '\t' << r.packets << '\t' << r.distinct_hosts << '\t' << r.distinct_ports
                  << '\t' << scan_class_name(r.cls) << '\n';
      return 0;
    }
    if (*ccdf_cmd) {
      const auto ctx = context_for(ccdf_args);
      const auto rows = load_records(ccdf_args.records);
      std::cout << "#senders\tccdf\n";
      for (const auto& p : sender_ccdf(rows, ctx)) std::printf("%zu\t%.6f\n", p.senders, p.ccdf);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "errmon: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "errmon: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
