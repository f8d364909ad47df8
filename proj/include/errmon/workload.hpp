#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errmon/config.hpp"
#include "errmon/types.hpp"

namespace errmon {

/// One component of the response-delay mixture.
struct DelayComponent {
  enum class Kind { Constant, Uniform, Exponential, LogNormal };
  double weight = 1.0;
  Kind kind = Kind::Uniform;
  /// Constant: a. Uniform: [a, b). Exponential: mean a. LogNormal: mu a,
  /// sigma b (of the log).
  double a = 0.0;
  double b = 0.0;
};

/// "w kind p1 [p2]; w kind p1 [p2]; ..." with kind one of const, uniform,
/// exp, lognormal.
std::vector<DelayComponent> parse_delay_mixture(const std::string& text);

struct WorkloadSpec {
  std::uint64_t seed = 1;
  std::size_t flows = 1000;
  /// Flow starts per second (Poisson arrivals).
  double flow_rate = 1000.0;
  Seconds start = 0.0;
  double answered_fraction = 0.5;
  std::vector<DelayComponent> response_delay{{1.0, DelayComponent::Kind::Uniform, 1e-4, 0.05}};
  /// Delays within guard of `reference_timeout` are re-drawn, and every
  /// request retransmission or ICMP error stays clear of the expiry instant
  /// by the same margin.
  Seconds guard = 0.0;
  Seconds reference_timeout = 1.0;
  /// Share of flows initiated from outside.
  double incoming_fraction = 0.8;
  double tcp_fraction = 0.6;
  double udp_fraction = 0.3;
  /// TCP flows whose first packet is a data segment rather than a SYN.
  double tcp_data_opener_fraction = 0.2;
  /// Flows whose request is retransmitted 1..max_duplicates times.
  double duplicate_fraction = 0.1;
  std::uint32_t max_duplicates = 2;
  /// Unanswered TCP/UDP flows answered by an ICMP error instead.
  double icmp_error_fraction = 0.1;
  /// Flows from internal clients to whitelisted services.
  double whitelist_fraction = 0.0;
  /// Unanswered TCP flows toward impersonated endpoints.
  double impersonated_fraction = 0.0;
  /// Packets after the response on answered flows, alternating direction.
  std::uint32_t followup_packets = 0;
  Seconds followup_gap = 0.1;
  std::uint32_t payload_len = 64;
  /// Never reuse an endpoint across flows (whitelisted and impersonated
  /// services excepted).
  bool unique_endpoints = true;
  /// External senders drawn from this many addresses; 0 means any public
  /// address.
  std::size_t external_pool = 0;
  /// Internal destinations drawn from the first N internal addresses; 0
  /// means all of them.
  std::size_t internal_pool = 0;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
};

/// Reads a [workload] section; unknown keys are reported by the caller's
/// reject_unused().
WorkloadSpec workload_from(const KeyValueFile& kv);

/// Ground truth for one generated flow.
struct FlowTruth {
  FlowKey key;
  Endpoint initiator;
  Endpoint responder;
  Seconds start = 0.0;
  bool answered = false;
  Seconds delay = 0.0;
  std::uint32_t duplicates = 0;
  bool icmp_error = false;
  bool whitelisted = false;
  bool impersonated = false;
  bool incoming = true;
  std::size_t packets = 0;
};

struct Workload {
  std::vector<PacketRecord> packets;
  std::vector<FlowTruth> flows;
};

/// Deterministic for a given spec (seed included) and network config.
Workload generate_workload(const WorkloadSpec& spec, const Config& cfg);

}  // namespace errmon
