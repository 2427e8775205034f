#pragma once

#include <string>
#include <vector>

#include "sliceqos/fabric.hpp"

namespace sliceqos {

struct Hop {
  SwitchId sw;
  PortId ingress_port;
  PortId egress_port;
  bool operator==(const Hop&) const = default;
};

/// Switches from the RAN gateway (first hop) to the switch serving `dst`.
struct Path {
  std::vector<Hop> hops;
  Endpoint src;
  Endpoint dst;
  bool operator==(const Path&) const = default;
};

/// Forward pass from `from` toward `to`: one (switch, egress port) per switch
/// crossed, L2 switches between routers included. Throws NoRoute, StaleArp or
/// RoutingLoop.
std::vector<std::pair<SwitchId, PortId>> forward_pass(const Fabric& fabric, const Endpoint& from, const Endpoint& to);

/// Port-level path discovery starting at the switch `src` is attached to.
/// Egress ports come from the forward pass, ingress ports from the reverse
/// pass (dst toward src); where routing is asymmetric and the reverse pass
/// does not cross a switch, the ingress port is read off the link instead.
Path discover_path(const Fabric& fabric, const Endpoint& src, const Endpoint& dst);

}  // namespace sliceqos
