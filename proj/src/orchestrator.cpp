#include "sliceqos/orchestrator.hpp"

#include <algorithm>

namespace sliceqos {

using nlohmann::json;

namespace {

constexpr double kSpareSlack = 1e-9;

int lowest(const DscpSet& set) {
  for (int d = 0; d < kDscpCount; ++d) {
    if (set.test(d)) return d;
  }
  return -1;
}

PortRef egress_of(const Hop& h) { return {h.sw, h.egress_port}; }
PortRef ingress_of(const Hop& h) { return {h.sw, h.ingress_port}; }

TrTcmConfig reservation(std::span<const double> gbrs, double cbs_kb, double pbs_kb) {
  if (gbrs.empty()) throw Error(Errc::InvalidConfig, "no GBR values to derive a reservation from");
  const auto [lo, hi] = std::minmax_element(gbrs.begin(), gbrs.end());
  TrTcmConfig cfg{*lo, *hi, cbs_kb, pbs_kb};
  cfg.validate();
  return cfg;
}

}  // namespace

FeasibilityResult feasibility_check(const Fabric& fabric, const Path& path, double gbr_mbps,
                                    const QueueStatusMap& statuses, const DscpUsage& used) {
  std::vector<PerSwitchChoice> choices;
  for (const auto& hop : path.hops) {
    const PortRef iface = egress_of(hop);
    const auto it = statuses.find(iface);
    if (it == statuses.end()) throw Error(Errc::InvalidConfig, "no queue status for " + hop.sw + "/" + hop.egress_port);
    const SwitchConfig& sw = fabric.switch_at(hop.sw);

    const QueueStatus* best = nullptr;
    DscpSet best_set;
    for (const auto& st : it->second) {
      if (st.spare_mbps + kSpareSlack < gbr_mbps) continue;
      const DscpSet set = dscps_for_queue(sw.mapping, st.queue);
      if (set.none()) continue;
      if (!best || st.spare_mbps > best->spare_mbps ||
          (st.spare_mbps == best->spare_mbps && st.queue > best->queue)) {
        best = &st;
        best_set = set;
      }
    }
    if (!best) return Infeasible{hop.sw, hop.egress_port};

    DscpSet free = best_set;
    if (auto u = used.find(iface); u != used.end()) free &= ~u->second;
    const int d = lowest(free.any() ? free : best_set);
    choices.push_back({hop.sw, hop.egress_port, best->queue, run_containing(best_set, d), Dscp(d), best_set});
  }
  return choices;
}

Compatibility compatibility_check(std::span<const PerSwitchChoice> choices, const DscpSet& avoid) {
  DscpSet common;
  common.set();
  for (const auto& c : choices) common &= c.dscps;
  if (common.none()) return NeedsRewrites{};
  const DscpSet free = common & ~avoid;
  return CommonDscp{Dscp(lowest(free.any() ? free : common))};
}

DscpPlan build_plan(const Path& path, std::vector<PerSwitchChoice> choices, const Compatibility& compatibility) {
  if (choices.size() != path.hops.size()) throw Error(Errc::InvalidConfig, "one choice per hop is required");
  DscpPlan plan;
  if (const auto* common = std::get_if<CommonDscp>(&compatibility)) {
    for (auto& c : choices) {
      c.chosen_dscp = common->dscp;
      c.dscp_range = run_containing(c.dscps, common->dscp.value());
    }
    plan.initial_dscp = common->dscp;
  } else if (!choices.empty()) {
    plan.initial_dscp = choices.front().chosen_dscp;
    for (std::size_t i = 0; i + 1 < choices.size(); ++i) {
      if (choices[i].chosen_dscp == choices[i + 1].chosen_dscp) continue;
      plan.rewrites.push_back(
          {path.hops[i].sw, path.hops[i].egress_port, choices[i].chosen_dscp, choices[i + 1].chosen_dscp});
    }
  }
  plan.choices = std::move(choices);
  return plan;
}

std::vector<Dscp> replay(const Path& path, Dscp initial, std::span<const RewriteRule> rules) {
  std::vector<Dscp> seen;
  Dscp d = initial;
  for (const auto& hop : path.hops) {
    seen.push_back(d);
    d = apply_rewrites(rules, hop.sw, hop.egress_port, d);
  }
  return seen;
}

std::optional<std::size_t> first_incoherent_hop(const Path& path, const DscpPlan& plan,
                                                std::span<const RewriteRule> rules) {
  const auto seen = replay(path, plan.initial_dscp, rules);
  for (std::size_t i = 0; i < seen.size() && i < plan.choices.size(); ++i) {
    if (seen[i] != plan.choices[i].chosen_dscp) return i;
  }
  return std::nullopt;
}

PolicySet install_policies(const Path& path, std::span<const double> gbrs_mbps, double cbs_kb, double pbs_kb) {
  const TrTcmConfig cfg = reservation(gbrs_mbps, cbs_kb, pbs_kb);
  PolicySet out;
  for (const auto& hop : path.hops) {
    out.ingress[ingress_of(hop)] = cfg;
    out.round_robin.insert(egress_of(hop));
  }
  return out;
}

Orchestrator::Orchestrator(Fabric fabric, OrchestratorSettings settings)
    : fabric_(std::move(fabric)), settings_(settings) {
  if (settings_.hysteresis < 1) throw Error(Errc::InvalidConfig, "hysteresis must be at least 1");
}

std::vector<RewriteRule> Orchestrator::installed_rewrites(const std::string& except) const {
  std::vector<RewriteRule> rules;
  for (const auto& [id, e] : admitted_) {
    if (id == except) continue;
    for (const auto& r : e.plan.rewrites) {
      if (std::find(rules.begin(), rules.end(), r) == rules.end()) rules.push_back(r);
    }
  }
  return rules;
}

DscpUsage Orchestrator::usage_except(const std::string& self) const {
  DscpUsage used;
  for (const auto& [id, e] : admitted_) {
    if (id == self) continue;
    for (std::size_t k = 0; k < e.path.hops.size(); ++k) {
      used[egress_of(e.path.hops[k])].set(static_cast<std::size_t>(e.plan.choices[k].chosen_dscp.value()));
    }
  }
  return used;
}

QueueStatusMap Orchestrator::statuses_for(const Path& path, const TelemetrySnapshot& snapshot,
                                          const std::string& self) const {
  QueueStatusMap out;
  for (const auto& hop : path.hops) {
    const PortRef iface = egress_of(hop);
    if (out.count(iface)) continue;
    SampleSet samples;
    samples.interface = iface;
    samples.n = 1;
    if (auto it = snapshot.find(iface); it != snapshot.end()) samples = it->second;

    // Orchestrated flows are known exactly: their sampled share is replaced
    // by the committed GBR (and dropped entirely for the flow being planned).
    DscpRates known;
    std::array<double, kQueueCount> committed{};
    for (const auto& [id, e] : admitted_) {
      for (std::size_t k = 0; k < e.path.hops.size(); ++k) {
        if (egress_of(e.path.hops[k]) != iface) continue;
        known.marked[e.plan.choices[k].chosen_dscp.value()] += e.flow.gbr_mbps;
        if (id != self) committed[e.plan.choices[k].queue.index()] += e.flow.gbr_mbps;
      }
    }
    auto statuses = estimate_queue_load(fabric_, samples, &known);
    for (auto& st : statuses) {
      st.estimated_load_mbps += committed[st.queue.index()];
      st.spare_mbps = std::max(0.0, st.capacity_mbps - st.estimated_load_mbps);
    }
    out.emplace(iface, std::move(statuses));
  }
  return out;
}

AdmissionResult Orchestrator::plan_for(const FlowSpec& flow, const Path& path, const TelemetrySnapshot& snapshot) const {
  DscpUsage used = usage_except(flow.id);
  // Codepoints carried by traffic we do not control are avoided too, so a
  // rewrite rule never remarks somebody else's packets.
  for (const auto& hop : path.hops) {
    const PortRef iface = egress_of(hop);
    const auto it = snapshot.find(iface);
    if (it == snapshot.end()) continue;
    DscpSet ours;
    for (const auto& [id, e] : admitted_) {
      for (std::size_t k = 0; k < e.path.hops.size(); ++k) {
        if (egress_of(e.path.hops[k]) == iface) ours.set(static_cast<std::size_t>(e.plan.choices[k].chosen_dscp.value()));
      }
    }
    for (const auto& [d, count] : it->second.counts) {
      if (count > 0 && !ours.test(static_cast<std::size_t>(d))) used[iface].set(static_cast<std::size_t>(d));
    }
  }
  const auto feasible = feasibility_check(fabric_, path, flow.gbr_mbps, statuses_for(path, snapshot, flow.id), used);
  if (const auto* bad = std::get_if<Infeasible>(&feasible)) return BestEffort{bad->sw, bad->port};

  DscpSet avoid;
  for (const auto& hop : path.hops) {
    if (auto u = used.find(egress_of(hop)); u != used.end()) avoid |= u->second;
  }
  auto choices = std::get<std::vector<PerSwitchChoice>>(feasible);
  const Compatibility compat = compatibility_check(choices, avoid);
  DscpPlan plan = build_plan(path, std::move(choices), compat);

  std::vector<RewriteRule> rules = fabric_.static_rewrites();
  const std::vector<RewriteRule> others = installed_rewrites(flow.id);
  rules.insert(rules.end(), others.begin(), others.end());

  // A new rule may not contradict an installed one.
  for (const auto& r : plan.rewrites) {
    for (const auto& o : rules) {
      if (o.sw == r.sw && o.egress_port == r.egress_port && o.match_dscp == r.match_dscp && o.set_dscp != r.set_dscp) {
        return BestEffort{r.sw, r.egress_port};
      }
    }
  }
  for (const auto& r : plan.rewrites) {
    if (std::find(rules.begin(), rules.end(), r) == rules.end()) rules.push_back(r);
  }
  if (const auto bad = first_incoherent_hop(path, plan, rules)) {
    return BestEffort{path.hops[*bad].sw, path.hops[*bad].egress_port};
  }
  // Nor may it reroute a flow that is already admitted.
  for (const auto& [id, e] : admitted_) {
    if (id == flow.id) continue;
    if (first_incoherent_hop(e.path, e.plan, rules)) {
      const auto& at = plan.rewrites.empty() ? path.hops.front() : Hop{plan.rewrites.front().sw, {}, plan.rewrites.front().egress_port};
      return BestEffort{at.sw, at.egress_port};
    }
  }

  std::vector<double> gbrs{flow.gbr_mbps};
  for (const auto& [id, e] : admitted_) {
    if (id != flow.id) gbrs.push_back(e.flow.gbr_mbps);
  }
  return Admitted{std::move(plan), install_policies(path, gbrs, settings_.cbs_kb, settings_.pbs_kb), path};
}

AdmissionResult Orchestrator::admit_flow(const FlowSpec& flow, const TelemetrySnapshot& snapshot) {
  if (!flow.is_ran()) throw Error(Errc::InvalidConfig, "only RAN flows are orchestrated (" + flow.id + ")");
  flow.validate();
  const Path path = discover_path(fabric_, fabric_.endpoint(flow.src), fabric_.endpoint(flow.dst));
  AdmissionResult result = plan_for(flow, path, snapshot);
  if (auto* ok = std::get_if<Admitted>(&result)) {
    admitted_[flow.id] = {flow, path, ok->plan, 0};
  } else {
    admitted_.erase(flow.id);
  }
  return result;
}

void Orchestrator::release(const std::string& flow_id) { admitted_.erase(flow_id); }

std::vector<PlanUpdate> Orchestrator::monitor(const TelemetrySnapshot& snapshot) {
  std::vector<PlanUpdate> updates;
  std::vector<std::string> ids;
  for (const auto& [id, e] : admitted_) ids.push_back(id);

  for (const auto& id : ids) {
    Entry& e = admitted_.at(id);
    const QueueStatusMap statuses = statuses_for(e.path, snapshot, id);
    bool holds = true;
    for (std::size_t k = 0; k < e.path.hops.size() && holds; ++k) {
      for (const auto& st : statuses.at(egress_of(e.path.hops[k]))) {
        if (st.queue == e.plan.choices[k].queue && st.spare_mbps + kSpareSlack < e.flow.gbr_mbps) holds = false;
      }
    }
    if (holds) {
      e.strikes = 0;
      continue;
    }
    if (++e.strikes < settings_.hysteresis) continue;
    e.strikes = 0;

    const AdmissionResult next = plan_for(e.flow, e.path, snapshot);
    if (const auto* ok = std::get_if<Admitted>(&next)) {
      if (ok->plan == e.plan) continue;
      e.plan = ok->plan;
      updates.push_back({id, ok->plan});
    } else {
      updates.push_back({id, std::get<BestEffort>(next)});
      admitted_.erase(id);
    }
  }
  return updates;
}

PolicySet Orchestrator::policies() const {
  std::map<PortRef, std::vector<double>> gbrs;
  PolicySet out;
  for (const auto& [id, e] : admitted_) {
    for (const auto& hop : e.path.hops) {
      gbrs[ingress_of(hop)].push_back(e.flow.gbr_mbps);
      out.round_robin.insert(egress_of(hop));
    }
  }
  for (const auto& [port, g] : gbrs) out.ingress[port] = reservation(g, settings_.cbs_kb, settings_.pbs_kb);
  return out;
}

NetworkPolicies Orchestrator::network_policies() const {
  const PolicySet set = policies();
  NetworkPolicies out;
  for (const auto& [port, cfg] : set.ingress) out.ingress[port] = {cfg, {}, settings_.policer_mode};
  for (const auto& [id, e] : admitted_) {
    for (const auto& hop : e.path.hops) out.ingress.at(ingress_of(hop)).flows.insert(id);
    out.initial_dscp[id] = e.plan.initial_dscp;
  }
  out.round_robin = set.round_robin;
  out.rewrites = installed_rewrites();
  return out;
}

AdmissionResult admit_flow(const Fabric& fabric, const FlowSpec& flow, const TelemetrySnapshot& snapshot) {
  Orchestrator orchestrator(fabric);
  return orchestrator.admit_flow(flow, snapshot);
}

json to_json(const DscpPlan& plan) {
  json rewrites = json::array();
  for (const auto& r : plan.rewrites) {
    rewrites.push_back({{"switch", r.sw},
                        {"egress_port", r.egress_port},
                        {"match_dscp", r.match_dscp.value()},
                        {"set_dscp", r.set_dscp.value()}});
  }
  json choices = json::array();
  for (const auto& c : plan.choices) {
    choices.push_back({{"switch", c.sw},
                       {"egress_port", c.egress_port},
                       {"queue", c.queue.value()},
                       {"dscp_lo", c.dscp_range.lo},
                       {"dscp_hi", c.dscp_range.hi},
                       {"chosen_dscp", c.chosen_dscp.value()}});
  }
  return {{"initial_dscp", plan.initial_dscp.value()}, {"rewrites", std::move(rewrites)}, {"choices", std::move(choices)}};
}

json to_json(const PolicySet& policies) {
  json ingress = json::array();
  for (const auto& [port, cfg] : policies.ingress) {
    ingress.push_back({{"switch", port.sw},
                       {"port", port.port},
                       {"cir_mbps", cfg.cir_mbps},
                       {"pir_mbps", cfg.pir_mbps},
                       {"cbs_kb", cfg.cbs_kb},
                       {"pbs_kb", cfg.pbs_kb}});
  }
  json egress = json::array();
  for (const auto& port : policies.round_robin) {
    egress.push_back({{"switch", port.sw}, {"port", port.port}, {"policy", "round_robin"}});
  }
  return {{"ingress", std::move(ingress)}, {"egress", std::move(egress)}};
}

json to_json(const AdmissionResult& result) {
  if (const auto* be = std::get_if<BestEffort>(&result)) {
    return {{"status", "best_effort"}, {"offending_switch", be->offending_switch}, {"offending_port", be->offending_port}};
  }
  const auto& ok = std::get<Admitted>(result);
  json hops = json::array();
  for (const auto& h : ok.path.hops) {
    hops.push_back({{"switch", h.sw}, {"ingress_port", h.ingress_port}, {"egress_port", h.egress_port}});
  }
  return {{"status", "admitted"}, {"path", std::move(hops)}, {"plan", to_json(ok.plan)}, {"policies", to_json(ok.policies)}};
}

}  // namespace sliceqos
