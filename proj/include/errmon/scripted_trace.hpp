#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "errmon/types.hpp"

namespace errmon {

/// Hand-written traces, one packet per line:
///
///   <ts> tcp  <src>:<port> > <dst>:<port> [flags=SA] [seq=N] [ack=N] [len=N] [opt=W]
///   <ts> udp  <src>:<port> > <dst>:<port> [len=N]
///   <ts> icmp <src> > <dst> type=N [code=N] [id=N] [seq=N] [len=N]
///   <ts> proto=N <src> > <dst> [len=N]
///
/// '#' starts a comment. Timestamps must be non-decreasing. Errors throw
/// std::runtime_error with "origin:line: ".
std::vector<PacketRecord> parse_scripted_trace(std::string_view text, const std::string& origin = "trace");
std::vector<PacketRecord> load_scripted_trace(const std::string& path);

/// Loads a capture file (.pcap) or a scripted trace (anything else).
std::vector<PacketRecord> load_trace(const std::string& path);

}  // namespace errmon
