#include "sliceqos/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace sliceqos {

namespace {

constexpr std::size_t kUnmarkedKey = kDscpCount;

long long ticks_for(double seconds, double tick_ms, const char* what) {
  const double x = seconds * 1000.0 / tick_ms;
  const long long n = std::llround(x);
  if (std::abs(x - static_cast<double>(n)) > 1e-6) {
    throw Error(Errc::InvalidConfig, std::string(what) + " " + std::to_string(seconds) + " s is not a multiple of the " +
                                         std::to_string(tick_ms) + " ms tick");
  }
  return n;
}

}  // namespace

bool FlowSpec::active_at(double t) const {
  return std::any_of(active_windows.begin(), active_windows.end(), [t](const TimeWindow& w) { return w.contains(t); });
}

void FlowSpec::validate() const {
  if (!(demand_mbps > 0.0)) throw Error(Errc::InvalidConfig, "flow " + id + ": demand_mbps must be positive");
  if (is_ran() && !(gbr_mbps > 0.0)) throw Error(Errc::InvalidConfig, "RAN flow " + id + ": gbr_mbps must be positive");
  for (const auto& w : active_windows) {
    if (!(w.start_s < w.end_s)) throw Error(Errc::InvalidConfig, "flow " + id + ": empty active window");
  }
}

double DscpRates::total() const { return std::accumulate(marked.begin(), marked.end(), unmarked); }

std::vector<RoutedFlow> route_flows(const Fabric& fabric, std::span<const FlowSpec> flows) {
  std::vector<RoutedFlow> out;
  out.reserve(flows.size());
  for (const auto& f : flows) {
    out.push_back({f, discover_path(fabric, fabric.endpoint(f.src), fabric.endpoint(f.dst))});
  }
  return out;
}

std::size_t tick_count(double duration_s, double tick_ms) {
  if (!(tick_ms > 0.0)) throw Error(Errc::InvalidConfig, "tick_ms must be positive");
  if (duration_s < 0.0) throw Error(Errc::InvalidConfig, "duration must not be negative");
  return static_cast<std::size_t>(ticks_for(duration_s, tick_ms, "duration"));
}

bool active_in_tick(const FlowSpec& flow, std::size_t tick, double tick_ms) {
  const auto t = static_cast<long long>(tick);
  for (const auto& w : flow.active_windows) {
    if (std::llround(w.start_s * 1000.0 / tick_ms) <= t && t < std::llround(w.end_s * 1000.0 / tick_ms)) return true;
  }
  return false;
}

Engine::Engine(Fabric fabric, std::vector<RoutedFlow> flows) : fabric_(std::move(fabric)), flows_(std::move(flows)) {
  const auto switches = fabric_.switches();
  for (std::size_t s = 0; s < switches.size(); ++s) {
    for (const auto& p : switches[s].ports) {
      iface_index_.emplace(PortRef{switches[s].id, p.id}, ifaces_.size());
      ifaces_.push_back({switches[s].id, p.id});
      iface_port_.push_back(static_cast<std::size_t>(&p - switches[s].ports.data()));
    }
  }
  iface_used_.assign(ifaces_.size(), false);
  queues_.resize(ifaces_.size());
  at_switch_.resize(switches.size());

  std::size_t slots = 0;
  for (std::size_t f = 0; f < flows_.size(); ++f) {
    const auto& path = flows_[f].path;
    if (path.hops.empty()) throw Error(Errc::UnroutedFlow, "flow " + flows_[f].spec.id + " has no path");
    hop_offset_.push_back(slots);
    std::vector<FlowHop> hops;
    for (std::size_t k = 0; k < path.hops.size(); ++k) {
      const auto& h = path.hops[k];
      const auto it = iface_index_.find({h.sw, h.egress_port});
      if (it == iface_index_.end()) throw Error(Errc::UnknownInterface, h.sw + "/" + h.egress_port);
      iface_used_[it->second] = true;
      const std::size_t s = fabric_.switch_index(h.sw);
      hops.push_back({s, {h.sw, h.ingress_port}, it->second});
      at_switch_[s].emplace_back(f, k);
    }
    slots += hops.size();
    hops_.push_back(std::move(hops));
  }
  prev_departure_.assign(slots, 0.0);

  // Upstream switches first; a cycle is broken at its lowest switch index.
  std::vector<std::set<std::size_t>> succ(switches.size());
  std::vector<std::size_t> indegree(switches.size(), 0);
  for (const auto& hops : hops_) {
    for (std::size_t k = 0; k + 1 < hops.size(); ++k) {
      if (succ[hops[k].sw].insert(hops[k + 1].sw).second) ++indegree[hops[k + 1].sw];
    }
  }
  std::set<std::size_t> ready;
  std::set<std::size_t> remaining;
  for (std::size_t s = 0; s < switches.size(); ++s) {
    remaining.insert(s);
    if (indegree[s] == 0) ready.insert(s);
  }
  while (!remaining.empty()) {
    std::size_t s = ready.empty() ? *remaining.begin() : *ready.begin();
    ready.erase(s);
    remaining.erase(s);
    order_.push_back(s);
    for (std::size_t t : succ[s]) {
      if (!remaining.count(t)) continue;
      if (indegree[t] > 0 && --indegree[t] == 0) ready.insert(t);
    }
  }

  arrivals_.resize(ifaces_.size());
  for (std::size_t i = 0; i < ifaces_.size(); ++i) {
    if (iface_used_[i]) arrivals_[i].push_back({});
  }
  tick_end_.push_back(0.0);
}

TickMetrics Engine::step(const std::vector<bool>& active, const NetworkPolicies& policies, double dt_s) {
  if (active.size() != flows_.size()) throw Error(Errc::InvalidConfig, "activity vector does not match the flow list");
  if (!(dt_s > 0.0)) throw Error(Errc::InvalidConfig, "tick must be positive");

  const auto switches = fabric_.switches();
  std::vector<RewriteRule> rules = fabric_.static_rewrites();
  rules.insert(rules.end(), policies.rewrites.begin(), policies.rewrites.end());

  // DSCP seen by each hop's classifier, and the queue it selects.
  const std::size_t slots = prev_departure_.size();
  std::vector<std::optional<Dscp>> dscp(slots);
  std::vector<QueueId> queue(slots);
  for (std::size_t f = 0; f < flows_.size(); ++f) {
    std::optional<Dscp> d = flows_[f].spec.dscp;
    if (auto it = policies.initial_dscp.find(flows_[f].spec.id); it != policies.initial_dscp.end()) d = it->second;
    for (std::size_t k = 0; k < hops_[f].size(); ++k) {
      const auto& sw = switches[hops_[f][k].sw];
      const PortRef& egress = ifaces_[hops_[f][k].egress_iface];
      dscp[slot(f, k)] = d;
      queue[slot(f, k)] = d ? classify(sw.mapping, *d) : sw.ports[iface_port_[hops_[f][k].egress_iface]].default_queue().queue;
      if (d) d = apply_rewrites(rules, egress.sw, egress.port, *d);
    }
  }

  TickMetrics out;
  out.time_s = time_s_;
  out.flows.resize(flows_.size());
  for (std::size_t f = 0; f < flows_.size(); ++f) out.flows[f].offered_mbps = active[f] ? flows_[f].spec.demand_mbps : 0.0;

  std::vector<double> departure(slots, 0.0);
  std::vector<bool> done(switches.size(), false);
  std::vector<std::array<double, kDscpCount + 1>> tick_arrivals(ifaces_.size());
  std::vector<std::array<double, kQueueCount>> queue_delay_ms(ifaces_.size());

  for (const std::size_t s : order_) {
    const SwitchConfig& sw = switches[s];
    const auto& entries = at_switch_[s];
    if (entries.empty()) continue;

    std::vector<double> arriving(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto [f, k] = entries[e];
      if (k == 0) {
        arriving[e] = out.flows[f].offered_mbps;
      } else {
        const std::size_t up = slot(f, k - 1);
        arriving[e] = done[hops_[f][k - 1].sw] ? departure[up] : prev_departure_[up];
      }
    }

    // Ingress policing.
    std::vector<RingOffer> offers(entries.size());
    std::map<PortRef, std::vector<std::size_t>> aggregate;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto [f, k] = entries[e];
      const PortRef& ingress = hops_[f][k].ingress;
      const auto it = policies.ingress.find(ingress);
      if (it == policies.ingress.end() || !it->second.flows.count(flows_[f].spec.id)) {
        offers[e].unreserved_mbps = arriving[e];
        continue;
      }
      if (it->second.mode == PolicerMode::Aggregate) {
        aggregate[ingress].push_back(e);
        continue;
      }
      auto [state, fresh] = policer_state_.try_emplace({ingress, flows_[f].spec.id}, TrTcmState::full(it->second.config));
      const Colored c = police_trtcm(it->second.config, state->second, arriving[e], dt_s);
      offers[e] = {c.green_mbps, c.yellow_mbps, 0.0};
      out.flows[f].dropped_mbps += c.red_mbps;
    }
    for (const auto& [ingress, members] : aggregate) {
      const IngressPolicer& policer = policies.ingress.at(ingress);
      double total = 0.0;
      for (std::size_t e : members) total += arriving[e];
      auto [state, fresh] = policer_state_.try_emplace({ingress, std::string()}, TrTcmState::full(policer.config));
      const Colored c = police_trtcm(policer.config, state->second, total, dt_s);
      for (std::size_t e : members) {
        const double share = total > 0.0 ? arriving[e] / total : 0.0;
        offers[e] = {c.green_mbps * share, c.yellow_mbps * share, 0.0};
        out.flows[entries[e].first].dropped_mbps += c.red_mbps * share;
      }
    }

    // Internal ring.
    const std::vector<double> admitted = ingress_ring_admit(sw.ring_bandwidth_mbps, offers);

    // Enqueue: per egress interface and queue, (slot, arriving volume in Mb).
    std::map<std::size_t, std::array<std::map<std::size_t, double>, kQueueCount>> enqueued;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto [f, k] = entries[e];
      out.flows[f].dropped_mbps += offers[e].total() - admitted[e];
      const std::size_t sl = slot(f, k);
      const std::size_t iface = hops_[f][k].egress_iface;
      const double volume = admitted[e] * dt_s;
      enqueued[iface][queue[sl].index()][sl] += volume;
      tick_arrivals[iface][dscp[sl] ? static_cast<std::size_t>(dscp[sl]->value()) : kUnmarkedKey] += volume;
    }
    for (std::size_t e = 0; e < entries.size(); ++e) {
      enqueued.try_emplace(hops_[entries[e].first][entries[e].second].egress_iface);
    }

    // Egress scheduling.
    for (auto& [iface, per_queue] : enqueued) {
      const PortConfig& port = sw.ports[iface_port_[iface]];
      auto& states = queues_[iface];
      std::array<QueueDemand, kQueueCount> demand{};
      std::array<double, kQueueCount> available{};
      for (int q = 0; q < kQueueCount; ++q) {
        double a = 0.0;
        for (const auto& [sl, b] : states[q].backlog_mb) a += b;
        for (const auto& [sl, v] : per_queue[q]) a += v;
        available[q] = a;
        const auto& cfg = port.queues[q];
        demand[q] = {a / dt_s, cfg.capacity_mbps, port.ceiling_mbps(cfg.queue)};
      }
      const EgressPolicy policy =
          policies.round_robin.count(ifaces_[iface]) ? EgressPolicy::RoundRobin : sw.egress_policy;
      const QueueRates rate = serve(policy, demand, port.bandwidth_mbps);

      for (int q = 0; q < kQueueCount; ++q) {
        const auto& cfg = port.queues[q];
        const double avail = available[q];
        const double served = std::min(avail, rate[q] * dt_s);
        const double phi = avail > 0.0 ? served / avail : 0.0;
        const double residual = avail - served;
        const double excess = std::max(0.0, residual - kb_to_mb(cfg.buffer_kb));

        double new_arrivals_left = 0.0;
        for (const auto& [sl, v] : per_queue[q]) new_arrivals_left += v * (1.0 - phi);

        std::map<std::size_t, double> held = std::move(states[q].backlog_mb);
        for (const auto& [sl, v] : per_queue[q]) held[sl] += 0.0;
        std::map<std::size_t, double> next;
        double arrived = 0.0;
        double backlog = 0.0;
        for (const auto& [sl, b] : held) {
          const auto in = per_queue[q].find(sl);
          const double a = in == per_queue[q].end() ? 0.0 : in->second;
          arrived += a;
          const double total = b + a;
          const double sent = phi * total;
          double drop = 0.0;
          if (excess > 0.0) {
            drop = new_arrivals_left > 0.0 ? excess * a * (1.0 - phi) / new_arrivals_left
                                           : excess * (total - sent) / residual;
          }
          departure[sl] += sent / dt_s;
          const std::size_t f = std::upper_bound(hop_offset_.begin(), hop_offset_.end(), sl) - hop_offset_.begin() - 1;
          out.flows[f].dropped_mbps += drop / dt_s;
          const double left = total - sent - drop;
          if (left > 1e-15) {
            next[sl] = left;
            backlog += left;
          }
        }
        states[q].backlog_mb = std::move(next);

        double delay_s = 0.0;
        if (backlog > 0.0) {
          double drain = rate[q];
          if (!(drain > 0.0)) drain = port.ceiling_mbps(cfg.queue);
          if (!(drain > 0.0)) drain = port.bandwidth_mbps;
          delay_s = backlog / drain;
        }
        queue_delay_ms[iface][q] = delay_s * 1000.0;
        out.queues.push_back({ifaces_[iface], cfg.queue, arrived / dt_s, served / dt_s, excess / dt_s, mb_to_kb(backlog)});
      }
    }

    for (const auto& [f, k] : entries) {
      out.flows[f].delay_ms += queue_delay_ms[hops_[f][k].egress_iface][queue[slot(f, k)].index()] + sw.latency_ms;
    }
    done[s] = true;
  }

  for (std::size_t f = 0; f < flows_.size(); ++f) {
    out.flows[f].delivered_mbps = departure[slot(f, hops_[f].size() - 1)];
    if (!active[f]) out.flows[f].delay_ms = 0.0;
  }
  std::sort(out.queues.begin(), out.queues.end(),
            [](const QueueTick& a, const QueueTick& b) { return std::tie(a.port, a.queue) < std::tie(b.port, b.queue); });

  prev_departure_ = std::move(departure);
  for (std::size_t i = 0; i < ifaces_.size(); ++i) {
    if (!iface_used_[i]) continue;
    auto next = arrivals_[i].back();
    for (std::size_t d = 0; d <= kDscpCount; ++d) next[d] += tick_arrivals[i][d];
    arrivals_[i].push_back(next);
  }
  time_s_ += dt_s;
  tick_end_.push_back(time_s_);
  return out;
}

DscpRates Engine::recent_rates(const PortRef& iface, double window_s) const {
  const auto it = iface_index_.find(iface);
  if (it == iface_index_.end()) throw Error(Errc::UnknownInterface, iface.sw + "/" + iface.port);
  DscpRates rates;
  if (!iface_used_[it->second] || tick_end_.size() < 2) return rates;

  const auto& cumulative = arrivals_[it->second];
  const std::size_t last = tick_end_.size() - 1;
  const auto first_it = std::lower_bound(tick_end_.begin(), tick_end_.end(), time_s_ - window_s - 1e-9);
  const std::size_t first = static_cast<std::size_t>(first_it - tick_end_.begin());
  const double span = tick_end_[last] - tick_end_[first];
  if (!(span > 0.0)) return rates;
  for (int d = 0; d < kDscpCount; ++d) rates.marked[d] = (cumulative[last][d] - cumulative[first][d]) / span;
  rates.unmarked = (cumulative[last][kUnmarkedKey] - cumulative[first][kUnmarkedKey]) / span;
  return rates;
}

MetricsSeries simulate(const Fabric& fabric, std::span<const RoutedFlow> flows, const NetworkPolicies& policies,
                       double duration_s, double tick_ms, std::uint64_t /*seed*/) {
  const std::size_t ticks = tick_count(duration_s, tick_ms);
  for (const auto& f : flows) {
    for (const auto& w : f.spec.active_windows) {
      ticks_for(w.start_s, tick_ms, "window start");
      ticks_for(w.end_s, tick_ms, "window end");
    }
  }

  Engine engine(fabric, {flows.begin(), flows.end()});
  MetricsSeries series;
  series.tick_ms = tick_ms;
  for (const auto& f : flows) series.flow_ids.push_back(f.spec.id);
  series.records.reserve(ticks);

  std::vector<bool> active(flows.size());
  for (std::size_t t = 0; t < ticks; ++t) {
    for (std::size_t f = 0; f < flows.size(); ++f) active[f] = active_in_tick(flows[f].spec, t, tick_ms);
    TickMetrics m = engine.step(active, policies, tick_ms / 1000.0);
    m.time_s = static_cast<double>(t) * tick_ms / 1000.0;
    series.records.push_back(std::move(m));
  }
  return series;
}

}  // namespace sliceqos
