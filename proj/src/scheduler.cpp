#include "sliceqos/scheduler.hpp"

#include <algorithm>
#include <numeric>

namespace sliceqos {

namespace {

constexpr double kEps = 1e-12;

double target(const QueueDemand& q) { return std::max(0.0, std::min(q.demand_mbps, q.ceiling_mbps)); }

}  // namespace

QueueRates serve_strict(const std::array<QueueDemand, kQueueCount>& queues, double port_bw_mbps) {
  QueueRates served{};
  double left = port_bw_mbps;
  for (int i = kQueueCount - 1; i >= 0; --i) {
    served[i] = std::min(target(queues[i]), left);
    left -= served[i];
  }
  return served;
}

QueueRates serve_round_robin(const std::array<QueueDemand, kQueueCount>& queues, double port_bw_mbps) {
  QueueRates served{};
  QueueRates goal{};
  for (int i = 0; i < kQueueCount; ++i) {
    goal[i] = target(queues[i]);
    served[i] = std::min(goal[i], std::max(0.0, queues[i].capacity_mbps));
  }
  const double guaranteed = std::accumulate(served.begin(), served.end(), 0.0);
  if (guaranteed >= port_bw_mbps) {
    if (guaranteed > 0.0) {
      for (auto& s : served) s *= port_bw_mbps / guaranteed;
    }
    return served;
  }

  double left = port_bw_mbps - guaranteed;
  while (left > kEps) {
    std::array<double, kQueueCount> weight{};
    bool any_weighted = false;
    bool any_hungry = false;
    for (int i = 0; i < kQueueCount; ++i) {
      if (goal[i] - served[i] <= kEps) continue;
      any_hungry = true;
      if (queues[i].capacity_mbps > 0.0) any_weighted = true;
    }
    if (!any_hungry) break;
    double total_weight = 0.0;
    for (int i = 0; i < kQueueCount; ++i) {
      if (goal[i] - served[i] <= kEps) continue;
      weight[i] = any_weighted ? std::max(0.0, queues[i].capacity_mbps) : 1.0;
      total_weight += weight[i];
    }

    // Grow all hungry queues until one saturates or the port is exhausted.
    double step = left / total_weight;
    for (int i = 0; i < kQueueCount; ++i) {
      if (weight[i] > 0.0) step = std::min(step, (goal[i] - served[i]) / weight[i]);
    }
    const bool exhausts = step >= left / total_weight;
    for (int i = 0; i < kQueueCount; ++i) {
      if (weight[i] <= 0.0) continue;
      served[i] += step * weight[i];
      if (goal[i] - served[i] <= kEps) served[i] = goal[i];
    }
    left = exhausts ? 0.0 : left - step * total_weight;
  }
  return served;
}

QueueRates serve(EgressPolicy policy, const std::array<QueueDemand, kQueueCount>& queues, double port_bw_mbps) {
  return policy == EgressPolicy::RoundRobin ? serve_round_robin(queues, port_bw_mbps)
                                            : serve_strict(queues, port_bw_mbps);
}

std::vector<double> ingress_ring_admit(double ring_bandwidth_mbps, std::span<const RingOffer> offers) {
  std::vector<double> admitted(offers.size(), 0.0);
  double left = ring_bandwidth_mbps;
  const auto tier = [&](double RingOffer::*member) {
    double total = 0.0;
    for (const auto& o : offers) total += o.*member;
    if (total <= 0.0) return;
    const double scale = total <= left ? 1.0 : left / total;
    for (std::size_t i = 0; i < offers.size(); ++i) admitted[i] += offers[i].*member * scale;
    left = std::max(0.0, left - total * scale);
  };
  tier(&RingOffer::green_mbps);
  tier(&RingOffer::yellow_mbps);
  tier(&RingOffer::unreserved_mbps);
  return admitted;
}

}  // namespace sliceqos
