#pragma once

#include <array>
#include <limits>
#include <span>
#include <vector>

#include "sliceqos/fabric.hpp"

namespace sliceqos {

/// Per-queue scheduler input, indexed by QueueId::index().
struct QueueDemand {
  double demand_mbps = 0.0;  // arrivals plus backlog drain rate
  double capacity_mbps = 0.0;
  double ceiling_mbps = std::numeric_limits<double>::infinity();
};

using QueueRates = std::array<double, kQueueCount>;

/// Highest queue first; each queue takes min(demand, ceiling, what is left).
QueueRates serve_strict(const std::array<QueueDemand, kQueueCount>& queues, double port_bw_mbps);

/// Every queue first gets min(demand, capacity) (scaled down if that alone
/// exceeds the port). Leftover bandwidth is water-filled over queues still
/// below min(demand, ceiling), in proportion to their capacities.
QueueRates serve_round_robin(const std::array<QueueDemand, kQueueCount>& queues, double port_bw_mbps);

QueueRates serve(EgressPolicy policy, const std::array<QueueDemand, kQueueCount>& queues, double port_bw_mbps);

/// Traffic offered to a switch's internal ring by one flow, split by marking.
struct RingOffer {
  double green_mbps = 0.0;
  double yellow_mbps = 0.0;
  double unreserved_mbps = 0.0;  // traffic with no ingress policer

  double total() const { return green_mbps + yellow_mbps + unreserved_mbps; }
};

/// Admitted rate per offer. Tiers are admitted in order green, yellow,
/// unreserved; a tier that does not fit in what is left is admitted
/// proportionally.
std::vector<double> ingress_ring_admit(double ring_bandwidth_mbps, std::span<const RingOffer> offers);

}  // namespace sliceqos
