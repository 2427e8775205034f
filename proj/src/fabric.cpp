#include "sliceqos/fabric.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <type_traits>

namespace sliceqos {

namespace {

constexpr double kEps = 1e-9;

template <typename Row, typename Getter>
void check_partition(const std::vector<Row>& rows, Getter range_of, const char* what) {
  std::array<int, kDscpCount> hits{};
  for (const auto& row : rows) {
    const DscpRange r = range_of(row);
    if (r.lo < 0 || r.hi >= kDscpCount || r.lo > r.hi) {
      throw Error(Errc::MappingGap, std::string(what) + ": bad DSCP range " + std::to_string(r.lo) + "-" +
                                        std::to_string(r.hi));
    }
    for (int d = r.lo; d <= r.hi; ++d) ++hits[static_cast<std::size_t>(d)];
  }
  for (int d = 0; d < kDscpCount; ++d) {
    const int n = hits[static_cast<std::size_t>(d)];
    if (n == 0) throw Error(Errc::MappingGap, std::string(what) + ": DSCP " + std::to_string(d) + " not covered");
    if (n > 1) throw Error(Errc::MappingGap, std::string(what) + ": DSCP " + std::to_string(d) + " mapped twice");
  }
}

// Unconfigured ports get eight unshaped queues with q2 as the default.
std::vector<EgressQueueConfig> unconfigured_queues() {
  std::vector<EgressQueueConfig> qs;
  for (int q = 1; q <= kQueueCount; ++q) {
    EgressQueueConfig cfg;
    cfg.queue = QueueId(q);
    cfg.uncapped = true;
    cfg.is_default = (q == 2);
    qs.push_back(cfg);
  }
  return qs;
}

void normalize_port(const SwitchId& sw, PortConfig& port) {
  const std::string where = sw + "/" + port.id;
  if (!(port.bandwidth_mbps > 0.0)) throw Error(Errc::InvalidConfig, where + ": port bandwidth must be > 0");
  if (port.queues.empty()) port.queues = unconfigured_queues();

  std::array<std::optional<EgressQueueConfig>, kQueueCount> slots;
  for (const auto& q : port.queues) {
    if (slots[q.queue.index()]) {
      throw Error(Errc::InvalidConfig, where + ": queue q" + std::to_string(q.queue.value()) + " listed twice");
    }
    if (q.capacity_mbps < 0.0) throw Error(Errc::InvalidConfig, where + ": negative queue capacity");
    if (!(q.buffer_kb > 0.0)) throw Error(Errc::InvalidConfig, where + ": queue buffer must be > 0");
    slots[q.queue.index()] = q;
  }

  std::vector<EgressQueueConfig> full;
  double capped = 0.0;
  int uncapped = 0;
  int defaults = 0;
  for (int q = 1; q <= kQueueCount; ++q) {
    auto& slot = slots[static_cast<std::size_t>(q - 1)];
    EgressQueueConfig cfg;
    if (slot) {
      cfg = *slot;
    } else {
      cfg.queue = QueueId(q);
    }
    if (cfg.uncapped) {
      ++uncapped;
    } else {
      capped += cfg.capacity_mbps;
    }
    if (cfg.is_default) ++defaults;
    full.push_back(cfg);
  }
  if (defaults == 0) throw Error(Errc::NoDefaultQueue, where + ": no default queue");
  if (defaults > 1) throw Error(Errc::InvalidConfig, where + ": more than one default queue");
  if (capped > port.bandwidth_mbps + kEps) {
    throw Error(Errc::InvalidConfig, where + ": queue capacities exceed port bandwidth");
  }
  const double residual = uncapped > 0 ? std::max(0.0, port.bandwidth_mbps - capped) / uncapped : 0.0;
  for (auto& cfg : full) {
    if (cfg.uncapped) cfg.capacity_mbps = residual;
  }
  port.queues = std::move(full);
}

}  // namespace

// --- mapping tables -------------------------------------------------------

L3MappingTable L3MappingTable::standard() {
  L3MappingTable t;
  for (int q = 1; q <= kQueueCount; ++q) {
    t.rows.push_back({DscpRange{8 * (q - 1), 8 * q - 1}, QueueId(q)});
  }
  return t;
}

L2MappingTable L2MappingTable::standard() {
  L2MappingTable t = conventional();
  t.dscp_to_cos[0].cos = Cos(1);
  return t;
}

L2MappingTable L2MappingTable::conventional() {
  L2MappingTable t;
  for (int c = 0; c < kCosCount; ++c) {
    t.dscp_to_cos.push_back({DscpRange{8 * c, 8 * c + 7}, Cos(c)});
    t.cos_to_queue[static_cast<std::size_t>(c)] = QueueId(c + 1);
  }
  return t;
}

void validate_mapping(const MappingTable& table) {
  if (const auto* l3 = std::get_if<L3MappingTable>(&table)) {
    check_partition(l3->rows, [](const L3MappingTable::Row& r) { return r.range; }, "L3 mapping");
  } else {
    const auto& l2 = std::get<L2MappingTable>(table);
    check_partition(l2.dscp_to_cos, [](const L2MappingTable::Row& r) { return r.range; }, "L2 mapping");
  }
}

QueueId classify_l3(const L3MappingTable& table, Dscp dscp) {
  for (const auto& row : table.rows) {
    if (row.range.contains(dscp.value())) return row.queue;
  }
  throw Error(Errc::MappingGap, "DSCP " + std::to_string(dscp.value()) + " not covered");
}

Cos dscp_to_cos(const L2MappingTable& table, Dscp dscp) {
  for (const auto& row : table.dscp_to_cos) {
    if (row.range.contains(dscp.value())) return row.cos;
  }
  throw Error(Errc::MappingGap, "DSCP " + std::to_string(dscp.value()) + " not covered");
}

QueueId classify_l2(const L2MappingTable& table, Dscp dscp) {
  return table.cos_to_queue[static_cast<std::size_t>(dscp_to_cos(table, dscp).value())];
}

QueueId classify(const MappingTable& table, Dscp dscp) {
  return std::visit(
      [&](const auto& t) -> QueueId {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, L3MappingTable>) {
          return classify_l3(t, dscp);
        } else {
          return classify_l2(t, dscp);
        }
      },
      table);
}

std::bitset<kDscpCount> dscps_for_queue(const MappingTable& table, QueueId queue) {
  std::bitset<kDscpCount> set;
  for (int d = 0; d < kDscpCount; ++d) {
    if (classify(table, Dscp(d)) == queue) set.set(static_cast<std::size_t>(d));
  }
  return set;
}

DscpRange run_containing(const std::bitset<kDscpCount>& set, int dscp) {
  int lo = dscp;
  int hi = dscp;
  while (lo > 0 && set.test(static_cast<std::size_t>(lo - 1))) --lo;
  while (hi + 1 < kDscpCount && set.test(static_cast<std::size_t>(hi + 1))) ++hi;
  return {lo, hi};
}

Dscp apply_rewrites(std::span<const RewriteRule> rules, const SwitchId& sw, const PortId& egress_port, Dscp dscp) {
  for (const auto& rule : rules) {
    if (rule.sw == sw && rule.egress_port == egress_port && rule.match_dscp == dscp) return rule.set_dscp;
  }
  return dscp;
}

// --- ports and switches ----------------------------------------------------

const EgressQueueConfig& PortConfig::default_queue() const {
  for (const auto& q : queues) {
    if (q.is_default) return q;
  }
  throw Error(Errc::NoDefaultQueue, "port " + id + " has no default queue");
}

double PortConfig::ceiling_mbps(QueueId q) const {
  const auto& cfg = queue(q);
  return cfg.uncapped ? bandwidth_mbps : std::min(cfg.capacity_mbps, bandwidth_mbps);
}

const PortConfig* SwitchConfig::find_port(const PortId& port) const {
  for (const auto& p : ports) {
    if (p.id == port) return &p;
  }
  return nullptr;
}

const PortConfig& SwitchConfig::port(const PortId& port) const {
  if (const auto* p = find_port(port)) return *p;
  throw Error(Errc::InvalidConfig, "switch " + id + " has no port " + port);
}

bool SwitchConfig::serves_subnet_of(const std::string& ip) const {
  return std::any_of(subnets.begin(), subnets.end(), [&](const std::string& s) { return in_subnet(ip, s); });
}

// --- fabric ----------------------------------------------------------------

Fabric Fabric::build(FabricConfig config) {
  Fabric f;
  for (std::size_t i = 0; i < config.switches.size(); ++i) {
    auto& sw = config.switches[i];
    if (sw.id.empty()) throw Error(Errc::InvalidConfig, "switch with empty id");
    if (!f.switch_index_.emplace(sw.id, i).second) throw Error(Errc::DuplicateSwitchId, sw.id);
    if (!(sw.ring_bandwidth_mbps > 0.0)) throw Error(Errc::InvalidConfig, sw.id + ": ring bandwidth must be > 0");
    if (sw.latency_ms < 0.0) throw Error(Errc::InvalidConfig, sw.id + ": negative latency");

    std::set<PortId> port_ids;
    for (auto& port : sw.ports) {
      if (!port_ids.insert(port.id).second) throw Error(Errc::InvalidConfig, sw.id + ": duplicate port " + port.id);
      normalize_port(sw.id, port);
    }
    validate_mapping(sw.mapping);
    if (sw.layer == Layer::L2 && std::holds_alternative<L3MappingTable>(sw.mapping)) {
      throw Error(Errc::InvalidConfig, sw.id + ": L2 switch needs an L2 mapping table");
    }
    if (sw.layer == Layer::L3 && std::holds_alternative<L2MappingTable>(sw.mapping)) {
      throw Error(Errc::InvalidConfig, sw.id + ": L3 switch needs an L3 mapping table");
    }
    for (const auto& [mac, port] : sw.mac_table) {
      if (!port_ids.count(port)) throw Error(Errc::InvalidConfig, sw.id + ": MAC table port " + port + " does not exist");
    }
    if (sw.layer == Layer::L2 && (!sw.arp_table.empty() || !sw.ip_table.empty())) {
      throw Error(Errc::InvalidConfig, sw.id + ": ARP/IP tables only exist on L3 switches");
    }
    std::set<std::pair<PortId, int>> rule_keys;
    for (auto& rule : sw.rewrites) {
      if (rule.sw.empty()) rule.sw = sw.id;
      if (rule.sw != sw.id) throw Error(Errc::InvalidConfig, sw.id + ": rewrite rule names switch " + rule.sw);
      if (!port_ids.count(rule.egress_port)) {
        throw Error(Errc::InvalidConfig, sw.id + ": rewrite rule on unknown port " + rule.egress_port);
      }
      if (!rule_keys.emplace(rule.egress_port, rule.match_dscp.value()).second) {
        throw Error(Errc::InvalidConfig, sw.id + ": two rewrite rules for one (port, DSCP)");
      }
    }
    if (!sw.mac.empty()) f.by_mac_.emplace(sw.mac, i);
    if (!sw.ip.empty()) f.by_ip_.emplace(sw.ip, i);
  }

  auto port_exists = [&](const PortRef& r) {
    auto it = f.switch_index_.find(r.sw);
    return it != f.switch_index_.end() && config.switches[it->second].find_port(r.port) != nullptr;
  };

  std::set<PortRef> used;
  for (const auto& link : config.links) {
    for (const auto* end : {&link.a, &link.b}) {
      if (!port_exists(*end)) throw Error(Errc::DanglingLink, end->sw + "/" + end->port);
      if (!used.insert(*end).second) throw Error(Errc::InvalidConfig, "port " + end->sw + "/" + end->port + " linked twice");
    }
    f.peers_.emplace(link.a, link.b);
    f.peers_.emplace(link.b, link.a);
  }

  for (std::size_t i = 0; i < config.endpoints.size(); ++i) {
    const auto& ep = config.endpoints[i];
    if (!f.endpoint_index_.emplace(ep.id, i).second) throw Error(Errc::InvalidConfig, "duplicate endpoint " + ep.id);
    if (!port_exists({ep.attached_switch, ep.attached_port})) {
      throw Error(Errc::DanglingLink, "endpoint " + ep.id + " attached to " + ep.attached_switch + "/" + ep.attached_port);
    }
    if (used.count({ep.attached_switch, ep.attached_port})) {
      throw Error(Errc::InvalidConfig, "endpoint " + ep.id + " attached to an inter-switch port");
    }
  }

  f.config_ = std::move(config);
  return f;
}

const SwitchConfig* Fabric::find_switch(const SwitchId& id) const {
  auto it = switch_index_.find(id);
  return it == switch_index_.end() ? nullptr : &config_.switches[it->second];
}

const SwitchConfig& Fabric::switch_at(const SwitchId& id) const {
  if (const auto* sw = find_switch(id)) return *sw;
  throw Error(Errc::InvalidConfig, "unknown switch " + id);
}

std::size_t Fabric::switch_index(const SwitchId& id) const {
  auto it = switch_index_.find(id);
  if (it == switch_index_.end()) throw Error(Errc::InvalidConfig, "unknown switch " + id);
  return it->second;
}

const Endpoint* Fabric::find_endpoint(const std::string& id) const {
  auto it = endpoint_index_.find(id);
  return it == endpoint_index_.end() ? nullptr : &config_.endpoints[it->second];
}

const Endpoint& Fabric::endpoint(const std::string& id) const {
  if (const auto* ep = find_endpoint(id)) return *ep;
  throw Error(Errc::UnknownEndpoint, id);
}

std::optional<PortRef> Fabric::peer(const PortRef& port) const {
  auto it = peers_.find(port);
  if (it == peers_.end()) return std::nullopt;
  return it->second;
}

const SwitchConfig* Fabric::switch_by_mac(const std::string& mac) const {
  auto it = by_mac_.find(mac);
  return it == by_mac_.end() ? nullptr : &config_.switches[it->second];
}

const SwitchConfig* Fabric::switch_by_ip(const std::string& ip) const {
  auto it = by_ip_.find(ip);
  return it == by_ip_.end() ? nullptr : &config_.switches[it->second];
}

std::vector<RewriteRule> Fabric::static_rewrites() const {
  std::vector<RewriteRule> rules;
  for (const auto& sw : config_.switches) rules.insert(rules.end(), sw.rewrites.begin(), sw.rewrites.end());
  return rules;
}

// --- forwarding -------------------------------------------------------------

namespace {

// Element physically attached to `port`: the endpoint `dest` when it hangs
// off that port, else the linked switch.
NextHop adjacent(const Fabric& fabric, const PortRef& port, const Endpoint& dest) {
  if (fabric.hosts_endpoint(port, dest)) return {port.port, dest.id, true};
  if (auto p = fabric.peer(port)) return {port.port, p->sw, false};
  throw Error(Errc::NoRoute, port.sw + "/" + port.port + " leads nowhere toward " + dest.id);
}

PortId mac_port(const SwitchConfig& sw, const std::string& mac, const std::string& what) {
  auto it = sw.mac_table.find(mac);
  if (it == sw.mac_table.end()) throw Error(Errc::StaleArp, sw.id + ": no MAC table entry for " + what);
  return it->second;
}

}  // namespace

NextHop next_hop(const Fabric& fabric, const SwitchId& sw_id, const Endpoint& dest, const std::string& src_subnet) {
  const SwitchConfig& sw = fabric.switch_at(sw_id);

  if (sw.layer == Layer::L2) {
    auto it = sw.mac_table.find(dest.mac);
    if (it == sw.mac_table.end()) throw Error(Errc::NoRoute, sw.id + ": no MAC table entry for " + dest.id);
    return adjacent(fabric, {sw.id, it->second}, dest);
  }

  if (in_subnet(dest.ip, src_subnet) || sw.serves_subnet_of(dest.ip)) {
    auto arp = sw.arp_table.find(dest.ip);
    if (arp == sw.arp_table.end()) throw Error(Errc::StaleArp, sw.id + ": no ARP entry for " + dest.ip);
    const PortId port = mac_port(sw, arp->second, dest.ip);
    return {port, dest.id, true};
  }

  const Route* best = nullptr;
  for (const auto& route : sw.ip_table) {
    if (in_subnet(dest.ip, route.prefix) && (!best || route.prefix.size() > best->prefix.size())) best = &route;
  }
  if (!best) throw Error(Errc::NoRoute, sw.id + ": no route to " + dest.ip);
  auto arp = sw.arp_table.find(best->next_hop);
  if (arp == sw.arp_table.end()) throw Error(Errc::StaleArp, sw.id + ": no ARP entry for next hop " + best->next_hop);
  const PortId port = mac_port(sw, arp->second, best->next_hop);
  const SwitchConfig* router = fabric.switch_by_ip(best->next_hop);
  if (!router) throw Error(Errc::NoRoute, sw.id + ": next hop " + best->next_hop + " is not a known switch");
  return {port, router->id, false};
}

}  // namespace sliceqos
