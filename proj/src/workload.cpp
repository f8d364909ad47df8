#include "errmon/workload.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "errmon/flow.hpp"
#include "errmon/packet.hpp"

namespace errmon {

std::vector<DelayComponent> parse_delay_mixture(const std::string& text) {
  std::vector<DelayComponent> out;
  std::istringstream parts(text);
  std::string part;
  while (std::getline(parts, part, ';')) {
    std::istringstream ps(part);
    std::vector<std::string> tok;
    for (std::string t; ps >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw ConfigError("delay component '" + part + "' needs: weight kind param [param]");
    DelayComponent c;
    try {
      c.weight = std::stod(tok[0]);
      c.a = std::stod(tok[2]);
      if (tok.size() > 3) c.b = std::stod(tok[3]);
    } catch (const std::exception&) {
      throw ConfigError("delay component '" + part + "' has a non-numeric field");
    }
    const std::string& kind = tok[1];
    std::size_t want = 4;
    if (kind == "const") {
      c.kind = DelayComponent::Kind::Constant;
      want = 3;
    } else if (kind == "uniform") {
      c.kind = DelayComponent::Kind::Uniform;
    } else if (kind == "exp") {
      c.kind = DelayComponent::Kind::Exponential;
      want = 3;
    } else if (kind == "lognormal") {
      c.kind = DelayComponent::Kind::LogNormal;
    } else {
      throw ConfigError("unknown delay kind '" + kind + "'");
    }
    if (tok.size() != want) throw ConfigError("delay component '" + part + "' has the wrong number of fields");
    if (c.weight <= 0) throw ConfigError("delay component weight must be positive");
    if (c.kind == DelayComponent::Kind::Uniform && !(c.b > c.a)) throw ConfigError("uniform delay needs hi > lo");
    if (c.kind != DelayComponent::Kind::LogNormal && c.a < 0) throw ConfigError("delays must be non-negative");
    out.push_back(c);
  }
  if (out.empty()) throw ConfigError("empty delay mixture");
  return out;
}

void WorkloadSpec::validate() const {
  auto frac = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  frac(answered_fraction, "answered_fraction");
  frac(incoming_fraction, "incoming_fraction");
  frac(tcp_fraction, "tcp_fraction");
  frac(udp_fraction, "udp_fraction");
  frac(tcp_data_opener_fraction, "tcp_data_opener_fraction");
  frac(duplicate_fraction, "duplicate_fraction");
  frac(icmp_error_fraction, "icmp_error_fraction");
  frac(whitelist_fraction, "whitelist_fraction");
  frac(impersonated_fraction, "impersonated_fraction");
  if (tcp_fraction + udp_fraction > 1.0 + 1e-12) throw ConfigError("tcp_fraction + udp_fraction exceeds 1");
  if (whitelist_fraction + impersonated_fraction > 1.0 + 1e-12)
    throw ConfigError("whitelist_fraction + impersonated_fraction exceeds 1");
  if (!(flow_rate > 0)) throw ConfigError("flow_rate must be positive");
  if (guard < 0 || guard >= reference_timeout) throw ConfigError("guard must lie in [0, reference_timeout)");
  if (followup_packets > 0 && !(followup_gap > 0)) throw ConfigError("followup_gap must be positive");
  if (payload_len > 1400) throw ConfigError("payload_len must be at most 1400");
  if (response_delay.empty()) throw ConfigError("response_delay is empty");
}

WorkloadSpec workload_from(const KeyValueFile& kv) {
  WorkloadSpec s;
  const std::string sec = "workload";
  if (auto v = kv.get_uint(sec, "seed")) s.seed = *v;
  if (auto v = kv.get_uint(sec, "flows")) s.flows = *v;
  if (auto v = kv.get_double(sec, "flow_rate")) s.flow_rate = *v;
  if (auto v = kv.get_double(sec, "start")) s.start = *v;
  if (auto v = kv.get_double(sec, "answered_fraction")) s.answered_fraction = *v;
  if (auto v = kv.get_string(sec, "response_delay")) {
    try {
      s.response_delay = parse_delay_mixture(*v);
    } catch (const ConfigError& e) {
      kv.fail(*kv.find(sec, "response_delay"), e.what());
    }
  }
  if (auto v = kv.get_double(sec, "guard")) s.guard = *v;
  if (auto v = kv.get_double(sec, "reference_timeout")) s.reference_timeout = *v;
  if (auto v = kv.get_double(sec, "incoming_fraction")) s.incoming_fraction = *v;
  if (auto v = kv.get_double(sec, "tcp_fraction")) s.tcp_fraction = *v;
  if (auto v = kv.get_double(sec, "udp_fraction")) s.udp_fraction = *v;
  if (auto v = kv.get_double(sec, "tcp_data_opener_fraction")) s.tcp_data_opener_fraction = *v;
  if (auto v = kv.get_double(sec, "duplicate_fraction")) s.duplicate_fraction = *v;
  if (auto v = kv.get_uint(sec, "max_duplicates")) s.max_duplicates = static_cast<std::uint32_t>(*v);
  if (auto v = kv.get_double(sec, "icmp_error_fraction")) s.icmp_error_fraction = *v;
  if (auto v = kv.get_double(sec, "whitelist_fraction")) s.whitelist_fraction = *v;
  if (auto v = kv.get_double(sec, "impersonated_fraction")) s.impersonated_fraction = *v;
  if (auto v = kv.get_uint(sec, "followup_packets")) s.followup_packets = static_cast<std::uint32_t>(*v);
  if (auto v = kv.get_double(sec, "followup_gap")) s.followup_gap = *v;
  if (auto v = kv.get_uint(sec, "payload_len")) s.payload_len = static_cast<std::uint32_t>(*v);
  if (auto v = kv.get_bool(sec, "unique_endpoints")) s.unique_endpoints = *v;
  if (auto v = kv.get_uint(sec, "external_pool")) s.external_pool = *v;
  if (auto v = kv.get_uint(sec, "internal_pool")) s.internal_pool = *v;
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(kv.origin() + ": [workload]: " + e.what());
  }
  return s;
}

namespace {

const std::uint16_t kTcpServices[] = {22, 23, 80, 443, 445, 3389, 5900, 8080};
const std::uint16_t kUdpServices[] = {53, 123, 161, 1900, 5060, 11211};

class Generator {
 public:
  Generator(const WorkloadSpec& spec, const Config& cfg)
      : spec_(spec), cfg_(cfg), rng_(spec.seed), internal_(cfg.network.internal_prefixes) {
    if (spec.external_pool > 0)
      for (std::size_t i = 0; i < spec.external_pool; ++i) external_pool_.push_back(random_external());
    for (const auto& s : cfg.network.impersonation_set)
      if (s.proto == to_u8(Proto::Tcp)) impersonated_.push_back(s.endpoint());
    for (const auto& e : cfg.switch_cfg.whitelist) whitelist_.push_back(e);
    if (spec.whitelist_fraction > 0 && whitelist_.empty())
      throw ConfigError("whitelist_fraction > 0 but the whitelist is empty");
    if (spec.impersonated_fraction > 0 && impersonated_.empty())
      throw ConfigError("impersonated_fraction > 0 but no TCP endpoint is impersonated");
    if (internal_.size() == 0) throw ConfigError("workload needs at least one internal prefix");
    double total = 0;
    for (const auto& c : spec.response_delay) total += c.weight;
    double acc = 0;
    for (const auto& c : spec.response_delay) cumulative_.push_back(acc += c.weight / total);
  }

  Workload run() {
    Workload w;
    std::exponential_distribution<double> gap(spec_.flow_rate);
    Seconds t = spec_.start;
    for (std::size_t i = 0; i < spec_.flows; ++i) {
      t += gap(rng_);
      make_flow(t, w);
    }
    std::stable_sort(w.packets.begin(), w.packets.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.ts < b.ts; });
    return w;
  }

 private:
  double uni() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool chance(double p) { return p > 0 && uni() < p; }
  template <typename T>
  T pick(const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng_)];
  }
  std::uint16_t ephemeral() { return static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1024, 65535)(rng_)); }

  Ipv4 random_external() {
    for (;;) {
      const Ipv4 ip(static_cast<std::uint32_t>(rng_()));
      const unsigned first = ip.value >> 24;
      if (first == 0 || first == 10 || first == 127 || first >= 224) continue;
      if (is_internal(ip, cfg_.network)) continue;
      return ip;
    }
  }
  Ipv4 external() { return external_pool_.empty() ? random_external() : pick(external_pool_); }
  Ipv4 internal() {
    std::uint64_t n = internal_.size();
    if (spec_.internal_pool > 0) n = std::min<std::uint64_t>(n, spec_.internal_pool);
    return internal_.address_at(static_cast<std::uint32_t>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_)));
  }

  bool claim(Endpoint ep, std::uint8_t proto) {
    if (!spec_.unique_endpoints) return true;
    return used_.insert(ep.packed() ^ (std::uint64_t{proto} << 56)).second;
  }

  /// Draws endpoints until one is unused.
  template <typename Make>
  Endpoint fresh(std::uint8_t proto, Make make) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Endpoint ep = make(attempt);
      if (claim(ep, proto)) return ep;
    }
    throw ConfigError("workload address space exhausted; enlarge the internal prefixes or reduce flows");
  }

  std::uint16_t service_port(std::uint8_t proto, int attempt) {
    if (attempt >= 32) return static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1, 65535)(rng_));
    if (proto == to_u8(Proto::Tcp))
      return kTcpServices[std::uniform_int_distribution<std::size_t>(0, std::size(kTcpServices) - 1)(rng_)];
    return kUdpServices[std::uniform_int_distribution<std::size_t>(0, std::size(kUdpServices) - 1)(rng_)];
  }

  double draw_delay_once() {
    const double u = uni();
    std::size_t i = 0;
    while (i + 1 < cumulative_.size() && u >= cumulative_[i]) ++i;
    const DelayComponent& c = spec_.response_delay[i];
    switch (c.kind) {
      case DelayComponent::Kind::Constant: return c.a;
      case DelayComponent::Kind::Uniform: return std::uniform_real_distribution<double>(c.a, c.b)(rng_);
      case DelayComponent::Kind::Exponential: return std::exponential_distribution<double>(1.0 / c.a)(rng_);
      case DelayComponent::Kind::LogNormal: return std::lognormal_distribution<double>(c.a, c.b)(rng_);
    }
    return c.a;
  }

  double draw_delay() {
    for (int i = 0; i < 1000; ++i) {
      const double d = draw_delay_once();
      if (spec_.guard <= 0 || std::abs(d - spec_.reference_timeout) >= spec_.guard) return d;
    }
    throw ConfigError("response_delay puts almost all mass inside the guard band");
  }

  PacketSpec base(Seconds ts, Endpoint from, Endpoint to, std::uint8_t proto) const {
    PacketSpec s;
    s.ts = ts;
    s.src = from.ip;
    s.dst = to.ip;
    s.proto = proto;
    if (proto != to_u8(Proto::Icmp)) {
      s.src_port = from.port;
      s.dst_port = to.port;
    }
    return s;
  }

  void make_flow(Seconds t0, Workload& w) {
    FlowTruth truth;
    truth.start = t0;
    const double kind = uni();
    truth.whitelisted = kind < spec_.whitelist_fraction;
    truth.impersonated = !truth.whitelisted && kind < spec_.whitelist_fraction + spec_.impersonated_fraction;

    std::uint8_t proto;
    const double pr = uni();
    if (truth.impersonated || pr < spec_.tcp_fraction)
      proto = to_u8(Proto::Tcp);
    else if (pr < spec_.tcp_fraction + spec_.udp_fraction)
      proto = to_u8(Proto::Udp);
    else
      proto = to_u8(Proto::Icmp);
    if (truth.whitelisted && proto == to_u8(Proto::Icmp)) proto = to_u8(Proto::Tcp);
    const bool echo = proto == to_u8(Proto::Icmp);

    Endpoint client, server;
    if (truth.whitelisted) {
      truth.incoming = false;
      server = pick(whitelist_);
      client = fresh(proto, [&](int) { return Endpoint{internal(), echo ? std::uint16_t{0} : ephemeral()}; });
    } else if (truth.impersonated) {
      truth.incoming = true;
      server = pick(impersonated_);
      client = fresh(proto, [&](int) { return Endpoint{external(), ephemeral()}; });
    } else {
      truth.incoming = chance(spec_.incoming_fraction);
      auto in_side = [&] { return truth.incoming ? internal() : external(); };
      auto out_side = [&] { return truth.incoming ? external() : internal(); };
      if (echo) {
        // The identifier stands in for both ports, so one draw covers both ends.
        for (int attempt = 0;; ++attempt) {
          if (attempt > 10000) throw ConfigError("workload address space exhausted");
          const auto id = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1, 65535)(rng_));
          client = {out_side(), id};
          server = {in_side(), id};
          if (!spec_.unique_endpoints) break;
          if (client == server) continue;
          const auto kc = client.packed() ^ (std::uint64_t{proto} << 56);
          const auto ks = server.packed() ^ (std::uint64_t{proto} << 56);
          if (used_.contains(kc) || used_.contains(ks)) continue;
          used_.insert(kc);
          used_.insert(ks);
          break;
        }
      } else {
        server = fresh(proto, [&](int attempt) { return Endpoint{in_side(), service_port(proto, attempt)}; });
        client = fresh(proto, [&](int) { return Endpoint{out_side(), ephemeral()}; });
      }
    }
    truth.initiator = client;
    truth.responder = server;

    truth.answered = !truth.impersonated && (truth.whitelisted || chance(spec_.answered_fraction));
    if (truth.answered) truth.delay = draw_delay();
    const Seconds ref = spec_.reference_timeout;
    const Seconds safe = ref - spec_.guard;
    const bool prompt = truth.answered && truth.delay < safe;

    // Request.
    PacketSpec req = base(t0, client, server, proto);
    const std::uint32_t isn = static_cast<std::uint32_t>(rng_());
    const std::uint16_t echo_id = client.port;
    if (proto == to_u8(Proto::Tcp)) {
      req.tcp_option_words = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 3)(rng_));
      if (!truth.impersonated && chance(spec_.tcp_data_opener_fraction)) {
        req.tcp_flags = tcp_flag::kPsh | tcp_flag::kAck;
        req.payload_len = spec_.payload_len;
      } else {
        req.tcp_flags = tcp_flag::kSyn;
      }
      req.tcp_seq = isn;
    } else if (proto == to_u8(Proto::Udp)) {
      req.payload_len = spec_.payload_len;
    } else {
      req.icmp_type = icmp_type::kEchoRequest;
      req.icmp_id = echo_id;
      req.icmp_seq = 1;
      req.payload_len = spec_.payload_len;
    }
    req.ip_option_words = chance(0.05) ? 1 : 0;
    const PacketRecord request = build_packet(req);
    truth.key = make_flow_key(request);
    w.packets.push_back(request);
    std::size_t count = 1;

    // Retransmissions of the request, all before the response (or, for
    // unanswered flows, clear of the expiry instant).
    if (!truth.whitelisted && chance(spec_.duplicate_fraction)) {
      const Seconds window = prompt ? truth.delay : safe;
      truth.duplicates = std::uniform_int_distribution<std::uint32_t>(1, std::max<std::uint32_t>(1, spec_.max_duplicates))(rng_);
      for (std::uint32_t d = 0; d < truth.duplicates; ++d) {
        PacketSpec dup = req;
        dup.ts = t0 + window * std::uniform_real_distribution<double>(0.01, 0.99)(rng_);
        w.packets.push_back(build_packet(dup));
        ++count;
      }
    }

    if (truth.answered) {
      PacketSpec rsp = base(t0 + truth.delay, server, client, proto);
      std::uint32_t server_seq = static_cast<std::uint32_t>(rng_());
      if (proto == to_u8(Proto::Tcp)) {
        rsp.tcp_flags = req.tcp_flags == tcp_flag::kSyn ? (tcp_flag::kSyn | tcp_flag::kAck) : tcp_flag::kAck;
        rsp.tcp_seq = server_seq;
        rsp.tcp_ack = isn + 1;
      } else if (proto == to_u8(Proto::Udp)) {
        rsp.payload_len = spec_.payload_len;
      } else {
        rsp.icmp_type = icmp_type::kEchoReply;
        rsp.icmp_id = echo_id;
        rsp.icmp_seq = 1;
        rsp.payload_len = spec_.payload_len;
      }
      w.packets.push_back(build_packet(rsp));
      ++count;

      if (prompt || truth.whitelisted) {
        Seconds t = t0 + truth.delay;
        for (std::uint32_t j = 0; j < spec_.followup_packets; ++j) {
          t += spec_.followup_gap;
          const bool forward = j % 2 == 0;
          PacketSpec f = forward ? base(t, client, server, proto) : base(t, server, client, proto);
          f.payload_len = spec_.payload_len;
          if (proto == to_u8(Proto::Tcp)) {
            f.tcp_flags = tcp_flag::kPsh | tcp_flag::kAck;
            f.tcp_seq = forward ? isn + 1 + j * spec_.payload_len : server_seq + 1 + j * spec_.payload_len;
          } else if (echo) {
            f.icmp_type = forward ? icmp_type::kEchoRequest : icmp_type::kEchoReply;
            f.icmp_id = echo_id;
            f.icmp_seq = static_cast<std::uint16_t>(2 + j / 2);
          }
          w.packets.push_back(build_packet(f));
          ++count;
        }
      }
    } else if (!truth.impersonated && !echo && chance(spec_.icmp_error_fraction)) {
      truth.icmp_error = true;
      const Seconds at = t0 + safe * std::uniform_real_distribution<double>(0.01, 0.99)(rng_);
      const std::uint8_t code = proto == to_u8(Proto::Udp) ? 3 : 1;
      w.packets.push_back(build_packet(icmp_error_spec(request, server.ip, icmp_type::kDestUnreachable, code, at)));
      ++count;
    }
    truth.packets = count;
    w.flows.push_back(truth);
  }

  const WorkloadSpec& spec_;
  const Config& cfg_;
  std::mt19937_64 rng_;
  AddressIndex internal_;
  std::vector<Ipv4> external_pool_;
  std::vector<Endpoint> impersonated_;
  std::vector<Endpoint> whitelist_;
  std::vector<double> cumulative_;
  std::unordered_set<std::uint64_t> used_;
};

}  // namespace

Workload generate_workload(const WorkloadSpec& spec, const Config& cfg) {
  spec.validate();
  return Generator(spec, cfg).run();
}

}  // namespace errmon
