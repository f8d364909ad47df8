#include "errmon/flow.hpp"

#include <utility>

namespace errmon {

FlowKey make_flow_key(const PacketRecord& pkt) {
  Endpoint a = pkt.src();
  Endpoint b = pkt.dst();
  if (pkt.is_icmp()) {
    // The parser already maps echo identifiers onto both ports; anything
    // else that is ICMP is portless.
    const bool echo = pkt.icmp_type == icmp_type::kEchoRequest || pkt.icmp_type == icmp_type::kEchoReply;
    if (!echo) a.port = b.port = 0;
  }
  if (b < a) std::swap(a, b);
  return FlowKey{a, b, pkt.proto};
}

bool is_icmp_error(const PacketRecord& pkt) {
  if (!pkt.is_icmp()) return false;
  return pkt.icmp_type == icmp_type::kDestUnreachable || pkt.icmp_type == icmp_type::kTimeExceeded ||
         pkt.icmp_type == icmp_type::kParameterProblem;
}

ResponseClass classify_response(const PacketRecord& request, const PacketRecord& candidate) {
  if (is_icmp_error(candidate) || is_icmp_error(request)) return ResponseClass::NotResponse;
  if (make_flow_key(request) != make_flow_key(candidate)) return ResponseClass::NotResponse;
  // A flow between an endpoint and itself has no opposite direction.
  if (request.src() == request.dst()) return ResponseClass::NotResponse;
  if (candidate.src() != request.dst() || candidate.dst() != request.src()) return ResponseClass::NotResponse;
  return ResponseClass::Response;
}

std::string packet_label(const PacketRecord& pkt) {
  std::string s = proto_name(pkt.proto) + " ";
  if (pkt.is_tcp() || pkt.is_udp()) {
    s += pkt.src().to_string() + " > " + pkt.dst().to_string();
  } else {
    s += pkt.src_ip.to_string() + " > " + pkt.dst_ip.to_string();
  }
  if (pkt.is_tcp()) s += " " + tcp_flags_string(pkt.tcp_flags);
  if (pkt.is_icmp()) s += " type=" + std::to_string(pkt.icmp_type) + " code=" + std::to_string(pkt.icmp_code);
  return s;
}

}  // namespace errmon
