#include "sliceqos/topology_json.hpp"

#include <fstream>

namespace sliceqos {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw Error(Errc::ParseError, std::string("missing key '") + key + "'");
  return obj.at(key);
}

Layer parse_layer(const std::string& s) {
  if (s == "L3" || s == "l3") return Layer::L3;
  if (s == "L2" || s == "l2") return Layer::L2;
  throw Error(Errc::ParseError, "unknown layer '" + s + "'");
}

EgressPolicy parse_policy(const std::string& s) {
  if (s == "strict") return EgressPolicy::Strict;
  if (s == "round_robin" || s == "rr") return EgressPolicy::RoundRobin;
  throw Error(Errc::ParseError, "unknown egress policy '" + s + "'");
}

DscpRange parse_range(const json& row) {
  return {require(row, "dscp_lo").get<int>(), require(row, "dscp_hi").get<int>()};
}

EgressQueueConfig parse_queue(const json& q, double port_bw) {
  EgressQueueConfig cfg;
  cfg.queue = QueueId(require(q, "queue").get<int>());
  cfg.buffer_kb = q.value("buffer_kb", 512.0);
  cfg.is_default = q.value("is_default", q.value("default", false));
  if (q.contains("capacity_mbps")) {
    cfg.capacity_mbps = q.at("capacity_mbps").get<double>();
  } else if (q.contains("capacity_pct")) {
    cfg.capacity_mbps = port_bw * q.at("capacity_pct").get<double>() / 100.0;
  } else {
    cfg.uncapped = true;
  }
  if (q.value("uncapped", false)) cfg.uncapped = true;
  return cfg;
}

MappingTable parse_mapping(const json& m, Layer layer) {
  if (layer == Layer::L3) {
    if (m.is_string()) {
      if (m.get<std::string>() != "standard") throw Error(Errc::ParseError, "unknown L3 table preset");
      return L3MappingTable::standard();
    }
    L3MappingTable t;
    for (const auto& row : require(m, "entries")) {
      t.rows.push_back({parse_range(row), QueueId(require(row, "queue").get<int>())});
    }
    return t;
  }

  L2MappingTable t = L2MappingTable::standard();
  if (m.is_string()) {
    const auto name = m.get<std::string>();
    if (name == "conventional") return L2MappingTable::conventional();
    if (name != "standard") throw Error(Errc::ParseError, "unknown L2 table preset '" + name + "'");
    return t;
  }
  if (m.contains("dscp_to_cos")) {
    const auto& d2c = m.at("dscp_to_cos");
    if (d2c.is_string()) {
      const auto name = d2c.get<std::string>();
      if (name == "conventional") {
        t.dscp_to_cos = L2MappingTable::conventional().dscp_to_cos;
      } else if (name != "standard") {
        throw Error(Errc::ParseError, "unknown dscp_to_cos preset '" + name + "'");
      }
    } else {
      t.dscp_to_cos.clear();
      for (const auto& row : d2c) t.dscp_to_cos.push_back({parse_range(row), Cos(require(row, "cos").get<int>())});
    }
  }
  if (m.contains("cos_to_queue")) {
    const auto& c2q = m.at("cos_to_queue");
    if (!c2q.is_array() || c2q.size() != kCosCount) {
      throw Error(Errc::MappingGap, "cos_to_queue must list a queue for each CoS 0-7");
    }
    for (std::size_t c = 0; c < kCosCount; ++c) t.cos_to_queue[c] = QueueId(c2q[c].get<int>());
  }
  return t;
}

SwitchConfig parse_switch(const json& s) {
  SwitchConfig sw;
  sw.id = require(s, "id").get<std::string>();
  sw.layer = parse_layer(s.value("layer", std::string("L3")));
  sw.mac = s.value("mac", std::string());
  sw.ip = s.value("ip", std::string());
  sw.subnets = s.value("subnets", std::vector<std::string>{});
  sw.ring_bandwidth_mbps = s.value("ring_bandwidth_mbps", 1000.0);
  sw.egress_policy = parse_policy(s.value("egress_policy", std::string("strict")));
  sw.latency_ms = s.value("latency_ms", 0.0);

  const json templ = s.value("queues", json::array());
  for (const auto& p : require(s, "ports")) {
    PortConfig port;
    port.id = require(p, "id").get<std::string>();
    port.bandwidth_mbps = p.value("bandwidth_mbps", 1000.0);
    const json& queues = p.contains("queues") ? p.at("queues") : templ;
    for (const auto& q : queues) port.queues.push_back(parse_queue(q, port.bandwidth_mbps));
    sw.ports.push_back(std::move(port));
  }

  if (s.contains("mapping")) {
    sw.mapping = parse_mapping(s.at("mapping"), sw.layer);
  } else if (sw.layer == Layer::L2) {
    sw.mapping = L2MappingTable::standard();
  }

  sw.mac_table = s.value("mac_table", std::map<std::string, PortId>{});
  sw.arp_table = s.value("arp_table", std::map<std::string, std::string>{});
  for (const auto& r : s.value("ip_table", json::array())) {
    sw.ip_table.push_back({require(r, "prefix").get<std::string>(), require(r, "next_hop").get<std::string>()});
  }
  for (const auto& r : s.value("rewrites", json::array())) {
    sw.rewrites.push_back({r.value("switch", sw.id), require(r, "egress_port").get<std::string>(),
                           Dscp(require(r, "match_dscp").get<int>()), Dscp(require(r, "set_dscp").get<int>())});
  }
  return sw;
}

PortRef parse_port_ref(const json& j) {
  return {require(j, "switch").get<std::string>(), require(j, "port").get<std::string>()};
}

json range_json(const DscpRange& r) { return {{"dscp_lo", r.lo}, {"dscp_hi", r.hi}}; }

}  // namespace

std::string to_string(Layer layer) { return layer == Layer::L2 ? "L2" : "L3"; }

std::string to_string(EgressPolicy policy) {
  return policy == EgressPolicy::Strict ? "strict" : "round_robin";
}

FabricConfig parse_topology(const json& doc) {
  try {
    FabricConfig cfg;
    for (const auto& s : require(doc, "switches")) cfg.switches.push_back(parse_switch(s));
    for (const auto& l : doc.value("links", json::array())) {
      cfg.links.push_back({parse_port_ref(require(l, "a")), parse_port_ref(require(l, "b"))});
    }
    for (const auto& e : doc.value("endpoints", json::array())) {
      Endpoint ep;
      ep.id = require(e, "id").get<std::string>();
      ep.ip = e.value("ip", std::string());
      ep.mac = e.value("mac", std::string());
      ep.subnet = e.value("subnet", std::string());
      ep.attached_switch = require(e, "attached_switch").get<std::string>();
      ep.attached_port = require(e, "attached_port").get<std::string>();
      cfg.endpoints.push_back(std::move(ep));
    }
    return cfg;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

Fabric build_fabric(const json& doc) { return Fabric::build(parse_topology(doc)); }

json to_json(const FabricConfig& config) {
  json switches = json::array();
  for (const auto& sw : config.switches) {
    json s;
    s["id"] = sw.id;
    s["layer"] = to_string(sw.layer);
    s["mac"] = sw.mac;
    s["ip"] = sw.ip;
    s["subnets"] = sw.subnets;
    s["ring_bandwidth_mbps"] = sw.ring_bandwidth_mbps;
    s["egress_policy"] = to_string(sw.egress_policy);
    s["latency_ms"] = sw.latency_ms;
    json ports = json::array();
    for (const auto& p : sw.ports) {
      json queues = json::array();
      for (const auto& q : p.queues) {
        json jq = {{"queue", q.queue.value()}, {"buffer_kb", q.buffer_kb}, {"is_default", q.is_default}};
        if (q.uncapped) {
          jq["uncapped"] = true;
        } else {
          jq["capacity_mbps"] = q.capacity_mbps;
        }
        queues.push_back(std::move(jq));
      }
      ports.push_back({{"id", p.id}, {"bandwidth_mbps", p.bandwidth_mbps}, {"queues", std::move(queues)}});
    }
    s["ports"] = std::move(ports);

    if (const auto* l3 = std::get_if<L3MappingTable>(&sw.mapping)) {
      json entries = json::array();
      for (const auto& row : l3->rows) {
        json r = range_json(row.range);
        r["queue"] = row.queue.value();
        entries.push_back(std::move(r));
      }
      s["mapping"] = {{"entries", std::move(entries)}};
    } else {
      const auto& l2 = std::get<L2MappingTable>(sw.mapping);
      json d2c = json::array();
      for (const auto& row : l2.dscp_to_cos) {
        json r = range_json(row.range);
        r["cos"] = row.cos.value();
        d2c.push_back(std::move(r));
      }
      json c2q = json::array();
      for (const auto& q : l2.cos_to_queue) c2q.push_back(q.value());
      s["mapping"] = {{"dscp_to_cos", std::move(d2c)}, {"cos_to_queue", std::move(c2q)}};
    }

    s["mac_table"] = sw.mac_table;
    s["arp_table"] = sw.arp_table;
    json routes = json::array();
    for (const auto& r : sw.ip_table) routes.push_back({{"prefix", r.prefix}, {"next_hop", r.next_hop}});
    s["ip_table"] = std::move(routes);
    json rewrites = json::array();
    for (const auto& r : sw.rewrites) {
      rewrites.push_back({{"switch", r.sw},
                          {"egress_port", r.egress_port},
                          {"match_dscp", r.match_dscp.value()},
                          {"set_dscp", r.set_dscp.value()}});
    }
    s["rewrites"] = std::move(rewrites);
    switches.push_back(std::move(s));
  }

  json links = json::array();
  for (const auto& l : config.links) {
    links.push_back({{"a", {{"switch", l.a.sw}, {"port", l.a.port}}}, {"b", {{"switch", l.b.sw}, {"port", l.b.port}}}});
  }
  json endpoints = json::array();
  for (const auto& e : config.endpoints) {
    endpoints.push_back({{"id", e.id},
                         {"ip", e.ip},
                         {"mac", e.mac},
                         {"subnet", e.subnet},
                         {"attached_switch", e.attached_switch},
                         {"attached_port", e.attached_port}});
  }
  return {{"switches", std::move(switches)}, {"links", std::move(links)}, {"endpoints", std::move(endpoints)}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace sliceqos
