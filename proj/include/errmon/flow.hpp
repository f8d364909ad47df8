#pragma once

#include <string>

#include "errmon/types.hpp"

namespace errmon {

FlowKey make_flow_key(const PacketRecord& pkt);

/// ICMP destination-unreachable, time-exceeded and parameter-problem.
bool is_icmp_error(const PacketRecord& pkt);

enum class ResponseClass { Response, NotResponse };

/// Whether `candidate` answers `request`. ICMP error messages never count as
/// an answer, and an ICMP error can never itself be answered.
ResponseClass classify_response(const PacketRecord& request, const PacketRecord& candidate);

/// Short one-line description, e.g. "tcp 1.2.3.4:5 > 6.7.8.9:80 S".
std::string packet_label(const PacketRecord& pkt);

}  // namespace errmon
