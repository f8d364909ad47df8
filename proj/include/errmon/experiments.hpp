#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "errmon/config.hpp"
#include "errmon/control.hpp"
#include "errmon/replay.hpp"
#include "errmon/workload.hpp"

namespace errmon {

/// Tab-separated result table with a '#' header line.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  void write(std::ostream& os) const;
  /// Column by name; throws std::out_of_range.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Southbound channel that only charges the latency model.
class ModelChannel : public SouthboundChannel {
 public:
  ModelChannel(LatencyModel install, LatencyModel remove) : install_(install), remove_(remove) {}
  CallResult install(std::span<const MatRule> batch, Seconds) override {
    return {true, batch.size(), 0, install_.call_latency(batch.size())};
  }
  CallResult remove(std::span<const RuleDelete> batch, Seconds) override {
    return {true, batch.size(), 0, remove_.call_latency(batch.size())};
  }

 private:
  LatencyModel install_;
  LatencyModel remove_;
};

struct QueueRun {
  std::size_t batch_size = 0;
  std::size_t arrivals = 0;
  std::size_t high_watermark = 0;
  std::size_t final_length = 0;
  /// Queue length at evenly spaced checkpoints.
  std::vector<std::size_t> checkpoints;
  std::size_t calls = 0;
  double mean_batch = 0;

  bool strictly_growing() const;
};

/// Poisson rule arrivals at `rate` per second feeding one control loop with
/// batch size k; `arrivals` rules in total.
QueueRun simulate_rule_queue(const ControlConfig& ctl, std::size_t k, double rate, std::size_t arrivals,
                             std::uint64_t seed, std::size_t checkpoints = 20);

struct ExperimentParams {
  std::uint64_t seed = 1;
  std::vector<std::size_t> k_values{1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000};
  double rule_rate = 5000.0;
  std::size_t rule_arrivals = 1000000;
  /// (P_D, d_max) pairs.
  std::vector<std::pair<double, std::uint32_t>> timer_points{
      {1e-5, 10}, {1e-4, 100}, {1e-3, 1000}, {1e-4, 10}, {1e-3, 10}, {1e-3, 100}};
  std::vector<double> dt_values{0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
  std::vector<double> whitelist_fractions{0.0, 0.1, 0.2, 0.3};
  std::size_t whitelist_services = 400;
  /// Workload used by the pipeline experiments; each experiment adjusts it.
  WorkloadSpec workload;
  bool has_workload = false;
};

/// Reads an optional [experiment] section (and [workload], if present).
ExperimentParams experiment_params_from(const KeyValueFile& kv);

/// Answered flows that the pipeline nonetheless collected.
struct Misclassification {
  std::size_t answered = 0;
  std::size_t misclassified = 0;
  double rate() const { return answered == 0 ? 0.0 : static_cast<double>(misclassified) / static_cast<double>(answered); }
};

/// Flow key as the engine sees it after the mirror transforms.
FlowKey observed_key(const FlowKey& key, const NetworkConfig& net);

/// Runs the pipeline on `w` and matches collected openers to the truth.
Misclassification measure_misclassification(const Config& cfg, const Workload& w, RunSummary* summary = nullptr);

/// `n` distinct external (ip, port) services.
std::vector<Endpoint> synthetic_whitelist(std::size_t n, const NetworkConfig& net, std::uint64_t seed);

ResultTable batch_sweep(const Config& cfg, const ExperimentParams& p);
ResultTable timer_sweep(const Config& cfg, const ExperimentParams& p);
ResultTable dt_sweep(const Config& cfg, const ExperimentParams& p);
ResultTable filter_efficiency(const Config& cfg, const ExperimentParams& p);

/// Dispatch by name; throws std::invalid_argument for an unknown name.
ResultTable run_experiment(const std::string& name, const Config& cfg, const ExperimentParams& p);

/// Default workloads for the pipeline experiments.
WorkloadSpec timer_workload(std::uint64_t seed);
WorkloadSpec dt_workload(std::uint64_t seed);
WorkloadSpec filter_workload(std::uint64_t seed);

}  // namespace errmon
