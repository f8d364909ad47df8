#include "errmon/analytics.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "errmon/anonymizer.hpp"

namespace errmon {

AnalyticsContext AnalyticsContext::from(const NetworkConfig& net) {
  AnalyticsContext ctx;
  ctx.internal_prefixes = net.internal_prefixes;
  ctx.telescope_prefixes = net.telescope_prefixes;
  if (net.anonymize) ctx.anonymization_key = net.anonymization_key;
  return ctx;
}

std::vector<Cidr> parse_prefix_list(const std::string& text, const std::string& origin) {
  std::vector<Cidr> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    auto c = Cidr::parse(tok);
    if (!c) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": bad prefix '" + tok + "'");
    out.push_back(*c);
  }
  return out;
}

std::vector<Cidr> load_prefix_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_prefix_list(ss.str(), path);
}

namespace {

bool in_any(Ipv4 ip, const std::vector<Cidr>& prefixes) {
  for (const auto& c : prefixes)
    if (c.contains(ip)) return true;
  return false;
}

bool incoming(const RecordRow& r) { return r.direction == Direction::Incoming; }

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

Ipv4 internal_destination(const RecordRow& r, const AnalyticsContext& ctx) {
  if (!r.anon || !ctx.anonymization_key) return r.dst_ip;
  return deobfuscate_ip(r.dst_ip, *ctx.anonymization_key);
}

std::vector<HourlyStats> hourly_sender_stats(const std::vector<RecordRow>& records, const AnalyticsContext& ctx) {
  struct Hour {
    std::unordered_set<std::uint32_t> srcs;
    std::unordered_set<std::uint16_t> ports;
    std::unordered_map<std::uint32_t, std::pair<std::unordered_set<std::uint32_t>, std::unordered_set<std::uint16_t>>>
        hosts;
  };
  std::map<std::int64_t, Hour> hours;
  for (const auto& r : records) {
    if (!incoming(r)) continue;
    Hour& h = hours[static_cast<std::int64_t>(std::floor(r.ts / 3600.0))];
    h.srcs.insert(r.src_ip.value);
    h.ports.insert(r.dst_port);
    auto& host = h.hosts[internal_destination(r, ctx).value];
    host.first.insert(r.src_ip.value);
    host.second.insert(r.dst_port);
  }
  std::vector<HourlyStats> out;
  for (const auto& [hour, h] : hours) {
    HourlyStats s;
    s.hour = hour;
    s.unique_src_ips = h.srcs.size();
    s.unique_ports = h.ports.size();
    s.hosts = h.hosts.size();
    std::vector<double> senders, ports;
    for (const auto& [_, sets] : h.hosts) {
      senders.push_back(static_cast<double>(sets.first.size()));
      ports.push_back(static_cast<double>(sets.second.size()));
    }
    s.mean_senders_per_host = mean_of(senders);
    s.std_senders_per_host = std_of(senders);
    s.std_ports = std_of(ports);
    for (std::uint32_t src : h.srcs)
      if (in_any(Ipv4(src), ctx.acknowledged_scanners)) ++s.acked_scanners;
    out.push_back(s);
  }
  return out;
}

const char* host_class_name(HostClass c) {
  switch (c) {
    case HostClass::Telescope: return "telescope";
    case HostClass::Active: return "active";
    case HostClass::Dark: return "dark";
  }
  return "?";
}

std::optional<HostClass> parse_host_class(const std::string& s) {
  if (s == "telescope") return HostClass::Telescope;
  if (s == "active") return HostClass::Active;
  if (s == "dark") return HostClass::Dark;
  return std::nullopt;
}

std::map<Ipv4, HostClass> host_classes(const std::vector<RecordRow>& records, const AnalyticsContext& ctx) {
  std::map<Ipv4, HostClass> out;
  for (const auto& r : records) {
    if (!incoming(r)) continue;
    const Ipv4 host = internal_destination(r, ctx);
    auto [it, fresh] = out.emplace(host, HostClass::Dark);
    if (fresh && in_any(host, ctx.telescope_prefixes)) it->second = HostClass::Telescope;
    if (it->second == HostClass::Dark && r.dst_liveness == Liveness::Alive) it->second = HostClass::Active;
  }
  return out;
}

std::map<std::uint16_t, std::uint64_t> per_port_histogram(const std::vector<RecordRow>& records, HostClass cls,
                                                          const AnalyticsContext& ctx) {
  const auto classes = host_classes(records, ctx);
  std::map<std::uint16_t, std::uint64_t> out;
  for (const auto& r : records) {
    if (!incoming(r)) continue;
    if (r.proto != to_u8(Proto::Tcp) && r.proto != to_u8(Proto::Udp)) continue;
    if (classes.at(internal_destination(r, ctx)) == cls) ++out[r.dst_port];
  }
  return out;
}

const char* scan_class_name(ScanClass c) {
  switch (c) {
    case ScanClass::Horizontal: return "horizontal";
    case ScanClass::Vertical: return "vertical";
    case ScanClass::Mixed: return "mixed";
  }
  return "?";
}

namespace {

ScanClass classify_counts(std::size_t d, std::size_t p, const ScanThresholds& th) {
  if (d >= th.theta_d && p <= th.theta_p) return ScanClass::Horizontal;
  if (d <= th.theta_d_prime && (p >= th.theta_p_prime || p <= th.theta_p)) return ScanClass::Vertical;
  return ScanClass::Mixed;
}

}  // namespace

ScanClass classify_scanner(const std::vector<RecordRow>& sender_records, const ScanThresholds& th) {
  if (sender_records.size() < std::max<std::size_t>(th.min_packets, 1))
    throw InsufficientData("need at least " + std::to_string(std::max<std::size_t>(th.min_packets, 1)) +
                           " records, got " + std::to_string(sender_records.size()));
  std::unordered_set<std::uint32_t> hosts;
  std::unordered_set<std::uint16_t> ports;
  for (const auto& r : sender_records) {
    hosts.insert(r.dst_ip.value);
    ports.insert(r.dst_port);
  }
  return classify_counts(hosts.size(), ports.size(), th);
}

std::vector<ScannerRow> classify_senders(const std::vector<RecordRow>& records, const ScanThresholds& th,
                                         bool incoming_only, const AnalyticsContext& ctx) {
  struct Acc {
    std::size_t packets = 0;
    std::unordered_set<std::uint32_t> hosts;
    std::unordered_set<std::uint16_t> ports;
  };
  std::map<std::uint32_t, Acc> by_src;
  for (const auto& r : records) {
    if (incoming_only && !incoming(r)) continue;
    Acc& a = by_src[r.src_ip.value];
    ++a.packets;
    a.hosts.insert(incoming(r) ? internal_destination(r, ctx).value : r.dst_ip.value);
    a.ports.insert(r.dst_port);
  }
  std::vector<ScannerRow> out;
  for (const auto& [src, a] : by_src) {
    if (a.packets < std::max<std::size_t>(th.min_packets, 1)) continue;
    out.push_back({Ipv4(src), a.packets, a.hosts.size(), a.ports.size(),
                   classify_counts(a.hosts.size(), a.ports.size(), th)});
  }
  return out;
}

std::vector<CcdfPoint> sender_ccdf(const std::vector<RecordRow>& records, const AnalyticsContext& ctx) {
  std::unordered_map<std::uint32_t, std::unordered_set<std::uint32_t>> senders;
  for (const auto& r : records)
    if (incoming(r)) senders[internal_destination(r, ctx).value].insert(r.src_ip.value);
  std::map<std::size_t, std::size_t> histogram;
  for (const auto& [_, s] : senders) ++histogram[s.size()];
  std::vector<CcdfPoint> out;
  const double n = static_cast<double>(senders.size());
  std::size_t at_least = senders.size();
  for (const auto& [v, count] : histogram) {
    out.push_back({v, static_cast<double>(at_least) / n});
    at_least -= count;
  }
  return out;
}

}  // namespace errmon
