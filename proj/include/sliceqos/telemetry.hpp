#pragma once

// sFlow-style 1-in-N sampling at egress interfaces and per-queue load
// estimation.

#include <cstdint>
#include <map>
#include <vector>

#include "sliceqos/fabric.hpp"
#include "sliceqos/traffic.hpp"

namespace sliceqos {

struct SamplingSettings {
  std::uint32_t n = 100;
  double window_s = 10.0;
  double packet_size_b = 1250.0;

  /// Throws InvalidConfig unless n >= 1 and window and packet size are positive.
  void validate() const;
};

struct SampleSet {
  PortRef interface;
  std::uint32_t n = 100;
  double window_s = 10.0;
  double packet_size_b = 1250.0;
  std::map<int, std::uint64_t> counts;  // DSCP -> sampled packets
  std::uint64_t unmarked = 0;           // sampled packets without a DSCP marking
};

struct QueueStatus {
  SwitchId sw;
  PortId port;
  QueueId queue;
  double capacity_mbps = 0.0;
  double estimated_load_mbps = 0.0;
  double spare_mbps = 0.0;
};

/// Packets seen at `rate_mbps` over window_s, rounded to whole packets.
std::uint64_t packets_in_window(double rate_mbps, const SamplingSettings& settings);

/// Each packet is kept with probability 1/n; deterministic for a given seed.
SampleSet sample_flows(const PortRef& interface, const DscpRates& true_rates, const SamplingSettings& settings,
                       std::uint64_t seed);

/// count * n * packet_size * 8 / window, in Mbps.
DscpRates estimated_rates(const SampleSet& samples);

/// Per-queue load at the sampled interface. `exclude` holds known rates to
/// take off the per-DSCP estimates first (clamped at zero). Unmarked traffic
/// counts against the port's default queue. Throws UnknownInterface.
std::vector<QueueStatus> estimate_queue_load(const Fabric& fabric, const SampleSet& samples,
                                             const DscpRates* exclude = nullptr);

/// Latest sample set per interface.
using TelemetrySnapshot = std::map<PortRef, SampleSet>;

}  // namespace sliceqos
