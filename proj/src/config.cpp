#include "errmon/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace errmon {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find_first_of(", ", pos);
    auto item = trim(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!item.empty()) out.push_back(item);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::uint8_t> parse_proto(std::string_view s) {
  if (s == "tcp" || s == "TCP") return to_u8(Proto::Tcp);
  if (s == "udp" || s == "UDP") return to_u8(Proto::Udp);
  if (s == "icmp" || s == "ICMP") return to_u8(Proto::Icmp);
  return std::nullopt;
}

}  // namespace

void Timers::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("timer '") + name + "' must be strictly positive");
  };
  positive(detection_timeout, "dt");
  positive(detection_timeout_impersonated, "dt_impersonated");
  positive(t_inst, "t_inst");
  positive(t_alive, "t_alive");
  positive(check_period, "p_d");
  positive(max_check_depth, "d_max");
  positive(clean_fraction, "alpha_ht");
  positive(batch_size, "k_batch");
  positive(query_interval, "query_interval");
  positive(rule_ttl, "rule_ttl");
  positive(clean_interval, "clean_interval");
  if (clean_fraction > 1.0) throw ConfigError("timer 'alpha_ht' must be at most 1");
  if (!(detection_timeout_impersonated < detection_timeout))
    throw ConfigError("timer 'dt_impersonated' must be smaller than 'dt'");
}

bool is_internal(Ipv4 ip, const NetworkConfig& cfg) {
  return std::any_of(cfg.internal_prefixes.begin(), cfg.internal_prefixes.end(),
                     [ip](const Cidr& c) { return c.contains(ip); });
}

bool NetworkConfig::is_telescope(Ipv4 ip) const {
  return std::any_of(telescope_prefixes.begin(), telescope_prefixes.end(),
                     [ip](const Cidr& c) { return c.contains(ip); });
}

void NetworkConfig::validate() const {
  timers.validate();
  for (const auto& t : telescope_prefixes) {
    const bool covered = std::any_of(internal_prefixes.begin(), internal_prefixes.end(), [&](const Cidr& c) {
      return c.prefix_len <= t.prefix_len && c.contains(t.network);
    });
    if (!covered) throw ConfigError("telescope prefix " + t.to_string() + " is not inside an internal prefix");
  }
  for (const auto& s : impersonation_set)
    if (!is_internal(s.ip, *this)) throw ConfigError("impersonated endpoint " + s.to_string() + " is not internal");
}

AddressIndex::AddressIndex(const std::vector<Cidr>& prefixes) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> spans;
  for (const auto& c : prefixes)
    spans.emplace_back(c.first().value, static_cast<std::uint32_t>(c.first().value + (c.size() - 1)));
  std::sort(spans.begin(), spans.end());
  for (const auto& [lo, hi] : spans) {
    if (!ranges_.empty() && std::uint64_t{lo} <= std::uint64_t{ranges_.back().hi} + 1) {
      if (hi > ranges_.back().hi) {
        size_ += hi - ranges_.back().hi;
        ranges_.back().hi = hi;
      }
      continue;
    }
    ranges_.push_back({lo, hi, size_});
    size_ += std::uint64_t{hi} - lo + 1;
  }
}

std::optional<std::uint32_t> AddressIndex::index_of(Ipv4 ip) const {
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), ip.value,
                             [](std::uint32_t v, const Range& r) { return v < r.lo; });
  if (it == ranges_.begin()) return std::nullopt;
  --it;
  if (ip.value > it->hi) return std::nullopt;
  return static_cast<std::uint32_t>(it->base + (ip.value - it->lo));
}

Ipv4 AddressIndex::address_at(std::uint32_t index) const {
  for (const auto& r : ranges_)
    if (index < r.base + (std::uint64_t{r.hi} - r.lo + 1)) return Ipv4(static_cast<std::uint32_t>(r.lo + (index - r.base)));
  return Ipv4{};
}

KeyValueFile KeyValueFile::parse(std::string_view text, std::string origin) {
  KeyValueFile kv;
  kv.origin_ = std::move(origin);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = kv.origin_ + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      kv.sections_[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "empty key");
    auto& sec = kv.sections_[section];
    if (sec.contains(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    sec[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no, false};
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) { return parse(read_file(path), path); }

std::string KeyValueFile::base_dir() const {
  auto slash = origin_.rfind('/');
  return slash == std::string::npos ? std::string(".") : origin_.substr(0, slash);
}

const KeyValueFile::Entry* KeyValueFile::find(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto e = s->second.find(key);
  if (e == s->second.end()) return nullptr;
  e->second.used = true;
  return &e->second;
}

void KeyValueFile::fail(const Entry& e, const std::string& what) const {
  throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": " + what);
}

std::optional<std::string> KeyValueFile::get_string(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) return std::nullopt;
  return e->value;
}

std::optional<double> KeyValueFile::get_double(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(e->value.c_str(), &end);
  if (e->value.empty() || *end != '\0') fail(*e, "'" + key + "' expects a number, got '" + e->value + "'");
  return v;
}

std::optional<std::uint64_t> KeyValueFile::get_uint(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) return std::nullopt;
  std::uint64_t v = 0;
  std::string_view s = e->value;
  int base = 10;
  if (s.starts_with("0x") || s.starts_with("0X")) {
    s.remove_prefix(2);
    base = 16;
  }
  auto [next, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (s.empty() || ec != std::errc{} || next != s.data() + s.size())
    fail(*e, "'" + key + "' expects a non-negative integer, got '" + e->value + "'");
  return v;
}

std::optional<bool> KeyValueFile::get_bool(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) return std::nullopt;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  fail(*e, "'" + key + "' expects a boolean, got '" + e->value + "'");
}

void KeyValueFile::reject_unused() const {
  for (const auto& [name, sec] : sections_)
    for (const auto& [key, e] : sec)
      if (!e.used) fail(e, "unknown key '" + key + "' in section [" + name + "]");
}

std::vector<Cidr> parse_cidr_list(std::string_view text) {
  std::vector<Cidr> out;
  for (auto item : split_list(text)) {
    auto c = Cidr::parse(item);
    if (!c) throw ConfigError("malformed CIDR '" + std::string(item) + "'");
    out.push_back(*c);
  }
  return out;
}

std::optional<std::uint32_t> parse_hex_key(std::string_view text) {
  if (text.starts_with("0x") || text.starts_with("0X")) text.remove_prefix(2);
  if (text.empty() || text.size() > 8) return std::nullopt;
  std::uint32_t v = 0;
  auto [next, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc{} || next != text.data() + text.size()) return std::nullopt;
  return v;
}

std::vector<Endpoint> parse_whitelist(std::string_view text, const std::string& origin) {
  std::vector<Endpoint> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto comma = line.find(',');
    auto ip = Ipv4::parse(trim(line.substr(0, comma)));
    unsigned port = 0;
    bool ok = ip.has_value() && comma != std::string_view::npos;
    if (ok) {
      auto p = trim(line.substr(comma + 1));
      auto [next, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
      ok = ec == std::errc{} && next == p.data() + p.size() && port <= 65535 && !p.empty();
    }
    if (!ok) throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'ip,port'");
    out.push_back({*ip, static_cast<std::uint16_t>(port)});
  }
  return out;
}

std::vector<Endpoint> load_whitelist(const std::string& path) { return parse_whitelist(read_file(path), path); }

void Config::validate() const {
  network.validate();
  if (switch_cfg.dynamic_capacity == 0) throw ConfigError("switch dynamic_capacity must be positive");
  if (fsd.hash_buckets == 0 || fsd.ring_capacity == 0 || fsd.buffer_capacity == 0)
    throw ConfigError("fsd table sizes must be positive");
  if (control.max_attempts == 0) throw ConfigError("control max_attempts must be positive");
  if (!switch_cfg.whitelist_internal)
    for (const auto& ep : switch_cfg.whitelist)
      if (is_internal(ep.ip, network))
        throw ConfigError("whitelist entry " + ep.to_string() + " is internal; set whitelist_internal = true");
}

Config config_from(const KeyValueFile& kv) {
  Config cfg;
  auto& net = cfg.network;
  auto& t = net.timers;

  auto wrap = [&](const char* section, const char* key, auto&& fn) {
    const auto* e = kv.find(section, key);
    if (!e) return;
    try {
      fn(e->value);
    } catch (const ConfigError& err) {
      kv.fail(*e, err.what());
    }
  };

  wrap("network", "internal", [&](const std::string& v) { net.internal_prefixes = parse_cidr_list(v); });
  wrap("network", "telescope", [&](const std::string& v) { net.telescope_prefixes = parse_cidr_list(v); });
  wrap("network", "impersonate", [&](const std::string& v) {
    for (auto item : split_list(v)) {
      // ip:port/proto
      auto colon = item.find(':');
      auto slash = item.find('/');
      auto ip = Ipv4::parse(item.substr(0, colon));
      std::optional<std::uint8_t> proto;
      unsigned port = 0;
      if (ip && colon != std::string_view::npos) {
        auto port_text = item.substr(colon + 1, slash == std::string_view::npos ? std::string_view::npos : slash - colon - 1);
        auto [next, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || next != port_text.data() + port_text.size() || port > 65535) ip.reset();
        proto = slash == std::string_view::npos ? std::optional<std::uint8_t>(to_u8(Proto::Tcp))
                                                : parse_proto(item.substr(slash + 1));
      }
      if (!ip || !proto) throw ConfigError("malformed impersonation endpoint '" + std::string(item) + "'");
      net.impersonation_set.insert(ServiceKey{*ip, static_cast<std::uint16_t>(port), *proto});
    }
  });
  wrap("network", "anonymization_key", [&](const std::string& v) {
    auto key = parse_hex_key(v);
    if (!key) throw ConfigError("anonymization_key expects up to 8 hex digits");
    net.anonymization_key = *key;
  });
  if (auto v = kv.get_bool("network", "anonymize")) net.anonymize = *v;

  if (auto v = kv.get_double("timers", "dt")) t.detection_timeout = *v;
  if (auto v = kv.get_double("timers", "dt_impersonated")) t.detection_timeout_impersonated = *v;
  if (auto v = kv.get_double("timers", "t_inst")) t.t_inst = *v;
  if (auto v = kv.get_double("timers", "t_alive")) t.t_alive = *v;
  if (auto v = kv.get_double("timers", "p_d")) t.check_period = *v;
  if (auto v = kv.get_uint("timers", "d_max")) t.max_check_depth = static_cast<std::uint32_t>(*v);
  if (auto v = kv.get_double("timers", "alpha_ht")) t.clean_fraction = *v;
  if (auto v = kv.get_uint("timers", "k_batch")) t.batch_size = static_cast<std::uint32_t>(*v);
  if (auto v = kv.get_double("timers", "query_interval")) t.query_interval = *v;
  if (auto v = kv.get_double("timers", "rule_ttl")) t.rule_ttl = *v;
  if (auto v = kv.get_double("timers", "clean_interval")) t.clean_interval = *v;

  auto& sw = cfg.switch_cfg;
  if (auto v = kv.get_uint("switch", "dynamic_capacity")) sw.dynamic_capacity = *v;
  if (auto v = kv.get_uint("switch", "mirror_queue_capacity")) sw.mirror_queue_capacity = *v;
  if (auto v = kv.get_uint("switch", "notify_queue_capacity")) sw.notify_queue_capacity = *v;
  if (auto v = kv.get_bool("switch", "whitelist_internal")) sw.whitelist_internal = *v;
  wrap("switch", "whitelist_file", [&](const std::string& v) {
    auto path = (!v.empty() && v.front() == '/') ? v : kv.base_dir() + "/" + v;
    sw.whitelist = load_whitelist(path);
  });

  auto& fsd = cfg.fsd;
  if (auto v = kv.get_uint("fsd", "hash_buckets")) fsd.hash_buckets = *v;
  if (auto v = kv.get_uint("fsd", "ring_capacity")) fsd.ring_capacity = *v;
  if (auto v = kv.get_uint("fsd", "buffer_capacity")) fsd.buffer_capacity = *v;
  if (auto v = kv.get_bool("fsd", "store_duplicates")) fsd.store_duplicates = *v;
  if (auto v = kv.get_uint("fsd", "hash_seed")) fsd.hash_seed = *v;
  if (auto v = kv.get_double("fsd", "cost_per_packet")) fsd.cost.per_packet = *v;
  if (auto v = kv.get_double("fsd", "cost_per_descriptor")) fsd.cost.per_descriptor = *v;
  if (auto v = kv.get_double("fsd", "cost_per_clean_bucket")) fsd.cost.per_clean_bucket = *v;
  if (auto v = kv.get_double("fsd", "metrics_interval")) fsd.metrics_interval = *v;

  auto& ctl = cfg.control;
  if (auto v = kv.get_double("control", "install_base")) ctl.install_latency.base = *v;
  if (auto v = kv.get_double("control", "install_per_rule")) ctl.install_latency.per_rule = *v;
  if (auto v = kv.get_double("control", "install_quadratic")) ctl.install_latency.quadratic = *v;
  if (auto v = kv.get_double("control", "delete_base")) ctl.delete_latency.base = *v;
  if (auto v = kv.get_double("control", "delete_per_rule")) ctl.delete_latency.per_rule = *v;
  if (auto v = kv.get_double("control", "delete_quadratic")) ctl.delete_latency.quadratic = *v;
  if (auto v = kv.get_uint("control", "queue_capacity")) ctl.queue_capacity = *v;
  if (auto v = kv.get_uint("control", "max_attempts")) ctl.max_attempts = static_cast<std::uint32_t>(*v);
  if (auto v = kv.get_double("control", "backoff_base")) ctl.backoff_base = *v;
  if (auto v = kv.get_double("control", "failure_probability")) ctl.failure_probability = *v;
  if (auto v = kv.get_uint("control", "failure_seed")) ctl.failure_seed = *v;

  if (auto v = kv.get_bool("responder", "enabled")) cfg.responder.enabled = *v;
  if (auto v = kv.get_uint("responder", "isn_seed")) cfg.responder.isn_seed = *v;
  if (auto v = kv.get_uint("responder", "max_connections")) cfg.responder.max_connections = *v;

  if (const char* env = std::getenv(kAnonKeyEnv); env && *env) {
    auto key = parse_hex_key(env);
    if (!key) throw ConfigError(std::string(kAnonKeyEnv) + " expects up to 8 hex digits");
    net.anonymization_key = *key;
  }

  // Report the offending line for invariant violations where possible.
  try {
    net.timers.validate();
  } catch (const ConfigError& err) {
    const std::string msg = err.what();
    for (const char* key : {"dt_impersonated", "dt", "t_inst", "t_alive", "p_d", "d_max", "alpha_ht", "k_batch",
                            "query_interval", "rule_ttl", "clean_interval"}) {
      if (msg.find(std::string("'") + key + "'") != std::string::npos)
        if (const auto* e = kv.find("timers", key)) kv.fail(*e, msg);
    }
    throw ConfigError(kv.origin() + ": " + msg);
  }
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(kv.origin() + ": " + err.what());
  }
  return cfg;
}

Config load_config(const std::string& path) {
  auto kv = KeyValueFile::load(path);
  return config_from(kv);
}

}  // namespace errmon
