#include "sliceqos/path.hpp"

#include <map>
#include <set>

namespace sliceqos {

std::vector<std::pair<SwitchId, PortId>> forward_pass(const Fabric& fabric, const Endpoint& from, const Endpoint& to) {
  std::vector<std::pair<SwitchId, PortId>> out;
  std::set<SwitchId> seen;
  auto visit = [&](const SwitchId& sw) {
    if (!seen.insert(sw).second) throw Error(Errc::RoutingLoop, "switch " + sw + " repeats on the path to " + to.id);
  };

  SwitchId current = from.attached_switch;
  while (true) {
    visit(current);
    const NextHop hop = next_hop(fabric, current, to, from.subnet);
    out.emplace_back(current, hop.egress_port);

    // Bridge across any L2 segment until the next router or the endpoint.
    const bool to_endpoint = hop.reaches_endpoint();
    const SwitchId target = to_endpoint ? SwitchId{} : hop.toward;
    std::string target_mac = to.mac;
    if (!to_endpoint) target_mac = fabric.switch_at(target).mac;

    PortRef at{current, hop.egress_port};
    while (true) {
      if (to_endpoint && fabric.hosts_endpoint(at, to)) return out;
      const auto peer = fabric.peer(at);
      if (!peer) throw Error(Errc::NoRoute, at.sw + "/" + at.port + " does not lead toward " + to.id);
      if (!to_endpoint && peer->sw == target) break;

      const SwitchConfig& bridge = fabric.switch_at(peer->sw);
      visit(bridge.id);
      const auto entry = bridge.mac_table.find(target_mac);
      if (entry == bridge.mac_table.end()) {
        throw Error(Errc::NoRoute, bridge.id + ": no MAC table entry toward " + (to_endpoint ? to.id : target));
      }
      out.emplace_back(bridge.id, entry->second);
      at = {bridge.id, entry->second};
    }
    current = target;
  }
}

Path discover_path(const Fabric& fabric, const Endpoint& src, const Endpoint& dst) {
  const auto forward = forward_pass(fabric, src, dst);

  std::map<SwitchId, PortId> reverse_egress;
  try {
    for (const auto& [sw, port] : forward_pass(fabric, dst, src)) reverse_egress.emplace(sw, port);
  } catch (const Error&) {
    // No usable return route; ingress ports come from the links alone.
  }

  Path path{{}, src, dst};
  for (std::size_t i = 0; i < forward.size(); ++i) {
    const auto& [sw, egress] = forward[i];
    PortId by_link;
    if (i == 0) {
      by_link = src.attached_port;
    } else {
      const auto peer = fabric.peer({forward[i - 1].first, forward[i - 1].second});
      by_link = peer ? peer->port : PortId{};
    }
    PortId ingress = by_link;
    if (auto it = reverse_egress.find(sw); it != reverse_egress.end() && it->second == by_link) ingress = it->second;
    path.hops.push_back({sw, ingress, egress});
  }
  return path;
}

}  // namespace sliceqos
