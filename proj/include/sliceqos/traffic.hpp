#pragma once

// Fluid simulation of flows through the fabric. Each tick a switch polices
// its ingress ports, admits traffic through its internal ring, classifies it
// into egress queues and runs the port schedulers.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sliceqos/fabric.hpp"
#include "sliceqos/path.hpp"
#include "sliceqos/scheduler.hpp"
#include "sliceqos/trtcm.hpp"

namespace sliceqos {

enum class FlowKind { Ran, Lan };

struct TimeWindow {
  double start_s = 0.0;
  double end_s = 0.0;
  bool contains(double t) const { return start_s <= t && t < end_s; }
  bool operator==(const TimeWindow&) const = default;
};

struct FlowSpec {
  std::string id;
  std::string src;  // endpoint ids
  std::string dst;
  double demand_mbps = 0.0;
  std::optional<Dscp> dscp;  // unmarked traffic goes to the default queue
  FlowKind kind = FlowKind::Lan;
  double gbr_mbps = 0.0;  // RAN flows only
  std::vector<TimeWindow> active_windows;

  bool is_ran() const { return kind == FlowKind::Ran; }
  bool active_at(double t) const;
  /// Throws InvalidConfig on a non-positive demand or a RAN flow without GBR.
  void validate() const;
  bool operator==(const FlowSpec&) const = default;
};

struct RoutedFlow {
  FlowSpec spec;
  Path path;
};

std::vector<RoutedFlow> route_flows(const Fabric& fabric, std::span<const FlowSpec> flows);

enum class PolicerMode { PerFlow, Aggregate };

/// trTCM on one ingress port covering the listed flows.
struct IngressPolicer {
  TrTcmConfig config;
  std::set<std::string> flows;
  PolicerMode mode = PolicerMode::PerFlow;
  bool operator==(const IngressPolicer&) const = default;
};

/// Everything the control plane can change at run time.
struct NetworkPolicies {
  std::map<PortRef, IngressPolicer> ingress;
  std::set<PortRef> round_robin;  // egress ports switched to RoundRobin
  std::vector<RewriteRule> rewrites;
  std::map<std::string, Dscp> initial_dscp;  // per flow, overrides the marking
  bool operator==(const NetworkPolicies&) const = default;
};

struct FlowTick {
  double offered_mbps = 0.0;
  double delivered_mbps = 0.0;
  double dropped_mbps = 0.0;
  double delay_ms = 0.0;
  bool operator==(const FlowTick&) const = default;
};

struct QueueTick {
  PortRef port;
  QueueId queue;
  double offered_mbps = 0.0;  // admitted into the queue this tick
  double served_mbps = 0.0;
  double dropped_mbps = 0.0;
  double backlog_kb = 0.0;  // at the end of the tick
  bool operator==(const QueueTick&) const = default;
};

struct TickMetrics {
  double time_s = 0.0;  // tick start
  std::vector<FlowTick> flows;  // aligned with the engine's flow list
  std::vector<QueueTick> queues;
  bool operator==(const TickMetrics&) const = default;
};

struct MetricsSeries {
  double tick_ms = 100.0;
  std::vector<std::string> flow_ids;
  std::vector<TickMetrics> records;
  bool operator==(const MetricsSeries&) const = default;
};

/// Per-DSCP rates at an interface; unmarked traffic is kept apart.
struct DscpRates {
  std::array<double, kDscpCount> marked{};
  double unmarked = 0.0;

  double total() const;
  bool operator==(const DscpRates&) const = default;
};

class Engine {
 public:
  /// Throws UnroutedFlow for a flow with an empty path.
  Engine(Fabric fabric, std::vector<RoutedFlow> flows);

  /// Advances one tick of dt_s. `active` is aligned with flows().
  TickMetrics step(const std::vector<bool>& active, const NetworkPolicies& policies, double dt_s);

  const Fabric& fabric() const { return fabric_; }
  const std::vector<RoutedFlow>& flows() const { return flows_; }
  double time_s() const { return time_s_; }

  /// Mean per-DSCP arrival rate at an egress interface over the last
  /// window_s of simulated time (less at start-up). Throws UnknownInterface.
  DscpRates recent_rates(const PortRef& iface, double window_s) const;

 private:
  struct FlowHop {
    std::size_t sw;
    PortRef ingress;
    std::size_t egress_iface;
  };
  struct QueueState {
    std::map<std::size_t, double> backlog_mb;  // keyed by flow-hop slot
  };

  std::size_t slot(std::size_t flow, std::size_t hop) const { return hop_offset_[flow] + hop; }

  Fabric fabric_;
  std::vector<RoutedFlow> flows_;
  std::vector<std::vector<FlowHop>> hops_;
  std::vector<std::size_t> hop_offset_;
  std::vector<std::size_t> order_;  // switch processing order
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> at_switch_;  // (flow, hop)

  std::map<PortRef, std::size_t> iface_index_;
  std::vector<PortRef> ifaces_;
  std::vector<std::size_t> iface_port_;  // port index on its switch
  std::vector<bool> iface_used_;
  std::vector<std::array<QueueState, kQueueCount>> queues_;

  std::map<std::pair<PortRef, std::string>, TrTcmState> policer_state_;
  std::vector<double> prev_departure_;

  // Cumulative arrival volume (Mb) per interface, one snapshot per tick.
  std::vector<std::vector<std::array<double, kDscpCount + 1>>> arrivals_;
  std::vector<double> tick_end_;
  double time_s_ = 0.0;
};

/// Runs flows for duration_s with fixed policies. tick_ms must divide every
/// window boundary. The seed is recorded for reproducibility; the fluid model
/// itself draws no random numbers.
MetricsSeries simulate(const Fabric& fabric, std::span<const RoutedFlow> flows, const NetworkPolicies& policies,
                       double duration_s, double tick_ms, std::uint64_t seed = 0);

/// Number of ticks in duration_s; throws InvalidConfig unless it is a whole number.
std::size_t tick_count(double duration_s, double tick_ms);

/// Whether the flow is active during tick `tick`; window edges are rounded to
/// whole ticks.
bool active_in_tick(const FlowSpec& flow, std::size_t tick, double tick_ms);

}  // namespace sliceqos
