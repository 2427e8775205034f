#include "sliceqos/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sliceqos {

namespace {

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t packets, std::uint32_t n) {
  if (packets == 0) return 0;
  if (n == 1) return packets;
  std::binomial_distribution<std::uint64_t> dist(packets, 1.0 / static_cast<double>(n));
  return dist(rng);
}

}  // namespace

void SamplingSettings::validate() const {
  if (n < 1) throw Error(Errc::InvalidConfig, "sampling ratio n must be >= 1");
  if (!(window_s > 0.0)) throw Error(Errc::InvalidConfig, "sampling window must be positive");
  if (!(packet_size_b > 0.0)) throw Error(Errc::InvalidConfig, "packet size must be positive");
}

std::uint64_t packets_in_window(double rate_mbps, const SamplingSettings& settings) {
  if (!(rate_mbps > 0.0)) return 0;
  return static_cast<std::uint64_t>(std::llround(rate_mbps * 1e6 * settings.window_s / (8.0 * settings.packet_size_b)));
}

SampleSet sample_flows(const PortRef& interface, const DscpRates& true_rates, const SamplingSettings& settings,
                       std::uint64_t seed) {
  settings.validate();
  SampleSet out{interface, settings.n, settings.window_s, settings.packet_size_b, {}, 0};
  std::mt19937_64 rng(seed);
  for (int d = 0; d < kDscpCount; ++d) {
    const std::uint64_t count = draw(rng, packets_in_window(true_rates.marked[d], settings), settings.n);
    if (count > 0) out.counts[d] = count;
  }
  out.unmarked = draw(rng, packets_in_window(true_rates.unmarked, settings), settings.n);
  return out;
}

DscpRates estimated_rates(const SampleSet& samples) {
  const double per_sample = static_cast<double>(samples.n) * samples.packet_size_b * 8.0 / samples.window_s / 1e6;
  DscpRates rates;
  for (const auto& [d, count] : samples.counts) {
    if (d < 0 || d >= kDscpCount) throw Error(Errc::InvalidConfig, "sampled DSCP out of range");
    rates.marked[d] = static_cast<double>(count) * per_sample;
  }
  rates.unmarked = static_cast<double>(samples.unmarked) * per_sample;
  return rates;
}

std::vector<QueueStatus> estimate_queue_load(const Fabric& fabric, const SampleSet& samples, const DscpRates* exclude) {
  const SwitchConfig* sw = fabric.find_switch(samples.interface.sw);
  const PortConfig* port = sw ? sw->find_port(samples.interface.port) : nullptr;
  if (!port) throw Error(Errc::UnknownInterface, samples.interface.sw + "/" + samples.interface.port);

  DscpRates rates = estimated_rates(samples);
  if (exclude) {
    for (int d = 0; d < kDscpCount; ++d) rates.marked[d] = std::max(0.0, rates.marked[d] - exclude->marked[d]);
    rates.unmarked = std::max(0.0, rates.unmarked - exclude->unmarked);
  }

  std::array<double, kQueueCount> load{};
  for (int d = 0; d < kDscpCount; ++d) {
    if (rates.marked[d] > 0.0) load[classify(sw->mapping, Dscp(d)).index()] += rates.marked[d];
  }
  load[port->default_queue().queue.index()] += rates.unmarked;

  std::vector<QueueStatus> out;
  for (const auto& q : port->queues) {
    const double l = load[q.queue.index()];
    out.push_back({sw->id, port->id, q.queue, q.capacity_mbps, l, std::max(0.0, q.capacity_mbps - l)});
  }
  return out;
}

}  // namespace sliceqos
