#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "errmon/config.hpp"
#include "errmon/types.hpp"

namespace errmon {

/// First application message seen on an impersonated connection.
struct Transcript {
  Endpoint remote;
  Endpoint local;
  Seconds at = 0.0;
  std::vector<std::uint8_t> payload;
};

struct ResponderStats {
  std::uint64_t segments = 0;
  std::uint64_t syn_acks = 0;
  std::uint64_t resets = 0;
  std::uint64_t established = 0;
  std::uint64_t peer_resets = 0;
  std::uint64_t ignored_full = 0;
  std::uint64_t not_served = 0;
};

/// Minimal TCP responder for impersonated endpoints: completes the
/// handshake, keeps the first data segment (or none, if the peer closes)
/// and tears the connection down with RST.
class TcpResponder {
 public:
  enum class State { SynReceived, Established };

  TcpResponder(const NetworkConfig& net, const ResponderConfig& cfg);

  bool serves(const PacketRecord& pkt) const;
  /// Reply segment, if any. Segments for endpoints outside the
  /// impersonation set are never answered.
  std::optional<PacketRecord> step(const PacketRecord& pkt, Seconds now);

  std::uint32_t isn_for(Endpoint remote, Endpoint local) const;
  std::optional<State> state_of(Endpoint remote, Endpoint local) const;
  const std::vector<Transcript>& transcripts() const { return transcripts_; }
  const ResponderStats& stats() const { return stats_; }
  std::size_t connections() const { return conns_.size(); }

 private:
  struct Conn {
    State state = State::SynReceived;
    std::uint32_t isn = 0;
    std::uint32_t peer_next = 0;
  };
  using ConnKey = std::pair<Endpoint, Endpoint>;  // (remote, local)

  PacketRecord reply(const PacketRecord& to, std::uint8_t flags, std::uint32_t seq, std::uint32_t ack,
                     Seconds now) const;
  PacketRecord reset_for_unknown(const PacketRecord& seg, Seconds now);
  PacketRecord teardown(const ConnKey& key, const Conn& c, const PacketRecord& seg, Seconds now);
  void capture(const ConnKey& key, const PacketRecord& seg, Seconds now);

  const NetworkConfig* net_;
  ResponderConfig cfg_;
  std::map<ConnKey, Conn> conns_;
  std::vector<Transcript> transcripts_;
  ResponderStats stats_;
};

/// Sequence space consumed by a segment (payload plus SYN/FIN).
std::uint32_t segment_length(const PacketRecord& seg);

}  // namespace errmon
