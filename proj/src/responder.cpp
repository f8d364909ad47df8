#include "errmon/responder.hpp"

#include "errmon/packet.hpp"

namespace errmon {

std::uint32_t segment_length(const PacketRecord& seg) {
  std::uint32_t n = seg.payload_len;
  if (seg.tcp_flags & tcp_flag::kSyn) ++n;
  if (seg.tcp_flags & tcp_flag::kFin) ++n;
  return n;
}

TcpResponder::TcpResponder(const NetworkConfig& net, const ResponderConfig& cfg) : net_(&net), cfg_(cfg) {}

bool TcpResponder::serves(const PacketRecord& pkt) const {
  return cfg_.enabled && pkt.is_tcp() && net_->is_impersonated(pkt.dst(), pkt.proto);
}

std::uint32_t TcpResponder::isn_for(Endpoint remote, Endpoint local) const {
  return static_cast<std::uint32_t>(mix64(cfg_.isn_seed ^ mix64(remote.packed()) ^ (local.packed() << 1)));
}

std::optional<TcpResponder::State> TcpResponder::state_of(Endpoint remote, Endpoint local) const {
  auto it = conns_.find({remote, local});
  if (it == conns_.end()) return std::nullopt;
  return it->second.state;
}

PacketRecord TcpResponder::reply(const PacketRecord& to, std::uint8_t flags, std::uint32_t seq, std::uint32_t ack,
                                 Seconds now) const {
  PacketSpec s;
  s.ts = now;
  s.src = to.dst_ip;
  s.dst = to.src_ip;
  s.proto = to_u8(Proto::Tcp);
  s.src_port = to.dst_port;
  s.dst_port = to.src_port;
  s.tcp_flags = flags;
  s.tcp_seq = seq;
  s.tcp_ack = ack;
  return build_packet(s);
}

PacketRecord TcpResponder::reset_for_unknown(const PacketRecord& seg, Seconds now) {
  ++stats_.resets;
  if (seg.tcp_flags & tcp_flag::kAck) return reply(seg, tcp_flag::kRst, seg.tcp_ack, 0, now);
  return reply(seg, tcp_flag::kRst | tcp_flag::kAck, 0, seg.tcp_seq + segment_length(seg), now);
}

PacketRecord TcpResponder::teardown(const ConnKey& key, const Conn& c, const PacketRecord& seg, Seconds now) {
  ++stats_.resets;
  PacketRecord rst = reply(seg, tcp_flag::kRst | tcp_flag::kAck, c.isn + 1, seg.tcp_seq + segment_length(seg), now);
  conns_.erase(key);
  return rst;
}

void TcpResponder::capture(const ConnKey& key, const PacketRecord& seg, Seconds now) {
  Transcript t;
  t.remote = key.first;
  t.local = key.second;
  t.at = now;
  if (seg.payload_len > 0 && seg.header_len <= seg.raw.size())
    t.payload.assign(seg.raw.begin() + seg.header_len, seg.raw.end());
  transcripts_.push_back(std::move(t));
}

std::optional<PacketRecord> TcpResponder::step(const PacketRecord& seg, Seconds now) {
  if (!serves(seg)) {
    ++stats_.not_served;
    return std::nullopt;
  }
  ++stats_.segments;
  const ConnKey key{seg.src(), seg.dst()};
  auto it = conns_.find(key);
  const std::uint8_t f = seg.tcp_flags;

  if (f & tcp_flag::kRst) {
    // Never answer a reset.
    if (it != conns_.end()) {
      if (it->second.state == State::Established) {
        PacketRecord empty = seg;
        empty.payload_len = 0;
        capture(key, empty, now);
      }
      ++stats_.peer_resets;
      conns_.erase(it);
    }
    return std::nullopt;
  }

  if ((f & tcp_flag::kSyn) && !(f & tcp_flag::kAck)) {
    if (it == conns_.end()) {
      if (conns_.size() >= cfg_.max_connections) {
        ++stats_.ignored_full;
        return std::nullopt;
      }
      Conn c;
      c.isn = isn_for(seg.src(), seg.dst());
      c.peer_next = seg.tcp_seq + 1;
      it = conns_.emplace(key, c).first;
    } else if (it->second.state == State::Established) {
      PacketRecord empty = seg;
      empty.payload_len = 0;
      capture(key, empty, now);
      return teardown(key, it->second, seg, now);
    }
    ++stats_.syn_acks;
    return reply(seg, tcp_flag::kSyn | tcp_flag::kAck, it->second.isn, seg.tcp_seq + 1, now);
  }

  if (it == conns_.end()) return reset_for_unknown(seg, now);

  Conn& c = it->second;
  if (c.state == State::SynReceived) {
    if (!(f & tcp_flag::kAck)) return teardown(key, c, seg, now);
    c.state = State::Established;
    ++stats_.established;
  }
  if (seg.payload_len > 0 || (f & tcp_flag::kFin)) {
    capture(key, seg, now);
    return teardown(key, c, seg, now);
  }
  return std::nullopt;
}

}  // namespace errmon
