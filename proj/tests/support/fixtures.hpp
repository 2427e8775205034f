#pragma once

// Small hand-built fabrics shared by the unit tests.

#include <string>

#include <json.hpp>

#include "sliceqos/fabric.hpp"
#include "sliceqos/topology_json.hpp"

namespace fixtures {

using nlohmann::json;

inline json queues_1_2_5_8() {
  return json::array({{{"queue", 1}, {"capacity_mbps", 300}},
                      {{"queue", 2}, {"is_default", true}},
                      {{"queue", 5}, {"capacity_mbps", 150}},
                      {{"queue", 8}, {"capacity_mbps", 350}}});
}

// Three L3 switches in a row, standard 8-per-queue tables.
// ue (10.1.0.1) at S1/p1, app (10.3.0.1) at S3/p2; S1/p2 -- S2/p1, S2/p2 -- S3/p1.
inline json chain_topology() {
  const json q = queues_1_2_5_8();
  json s1 = {{"id", "S1"}, {"layer", "L3"}, {"mac", "m-s1"}, {"ip", "10.0.0.1"}, {"subnets", {"10.1."}},
             {"latency_ms", 1}, {"queues", q},
             {"ports", {{{"id", "p1"}}, {{"id", "p2"}}}},
             {"mac_table", {{"m-ue", "p1"}, {"m-s2", "p2"}}},
             {"arp_table", {{"10.1.0.1", "m-ue"}, {"10.0.0.2", "m-s2"}}},
             {"ip_table", {{{"prefix", "10.3."}, {"next_hop", "10.0.0.2"}}}}};
  json s2 = {{"id", "S2"}, {"layer", "L3"}, {"mac", "m-s2"}, {"ip", "10.0.0.2"}, {"latency_ms", 1}, {"queues", q},
             {"ports", {{{"id", "p1"}}, {{"id", "p2"}}}},
             {"mac_table", {{"m-s1", "p1"}, {"m-s3", "p2"}}},
             {"arp_table", {{"10.0.0.1", "m-s1"}, {"10.0.0.3", "m-s3"}}},
             {"ip_table", {{{"prefix", "10.3."}, {"next_hop", "10.0.0.3"}}, {{"prefix", "10.1."}, {"next_hop", "10.0.0.1"}}}}};
  json s3 = {{"id", "S3"}, {"layer", "L3"}, {"mac", "m-s3"}, {"ip", "10.0.0.3"}, {"subnets", {"10.3."}},
             {"latency_ms", 1}, {"queues", q},
             {"ports", {{{"id", "p1"}}, {{"id", "p2"}}}},
             {"mac_table", {{"m-s2", "p1"}, {"m-app", "p2"}}},
             {"arp_table", {{"10.0.0.2", "m-s2"}, {"10.3.0.1", "m-app"}}},
             {"ip_table", {{{"prefix", "10.1."}, {"next_hop", "10.0.0.2"}}}}};
  return {{"switches", {s1, s2, s3}},
          {"links",
           {{{"a", {{"switch", "S1"}, {"port", "p2"}}}, {"b", {{"switch", "S2"}, {"port", "p1"}}}},
            {{"a", {{"switch", "S2"}, {"port", "p2"}}}, {"b", {{"switch", "S3"}, {"port", "p1"}}}}}},
          {"endpoints",
           {{{"id", "ue"}, {"ip", "10.1.0.1"}, {"mac", "m-ue"}, {"subnet", "10.1."}, {"attached_switch", "S1"},
             {"attached_port", "p1"}},
            {{"id", "app"}, {"ip", "10.3.0.1"}, {"mac", "m-app"}, {"subnet", "10.3."}, {"attached_switch", "S3"},
             {"attached_port", "p2"}}}}};
}

inline sliceqos::Fabric chain_fabric() { return sliceqos::build_fabric(chain_topology()); }

// One switch, one port, nothing else configured.
inline json minimal_topology() {
  return {{"switches", {{{"id", "S1"}, {"ports", {{{"id", "p1"}}}}}}}};
}

// L2 table of the L2/L3 mismatch figure: 0-7 -> CoS 1, 8-15 -> CoS 0, the
// rest floor(dscp/8); CoS c -> q(c+1).
inline sliceqos::L2MappingTable figure_l2_table() {
  sliceqos::L2MappingTable t = sliceqos::L2MappingTable::standard();
  t.dscp_to_cos.clear();
  t.dscp_to_cos.push_back({{0, 7}, sliceqos::Cos(1)});
  t.dscp_to_cos.push_back({{8, 15}, sliceqos::Cos(0)});
  for (int c = 2; c < 8; ++c) t.dscp_to_cos.push_back({{8 * c, 8 * c + 7}, sliceqos::Cos(c)});
  return t;
}

}  // namespace fixtures
