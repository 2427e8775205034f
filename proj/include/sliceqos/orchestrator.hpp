#pragma once

// Control plane: feasibility and compatibility analysis, DSCP plans with
// rewrite rules, ingress/egress policies, admission and monitoring.

#include <bitset>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sliceqos/fabric.hpp"
#include "sliceqos/path.hpp"
#include "sliceqos/telemetry.hpp"
#include "sliceqos/traffic.hpp"

namespace sliceqos {

using DscpSet = std::bitset<kDscpCount>;

struct PerSwitchChoice {
  SwitchId sw;
  PortId egress_port;
  QueueId queue;
  DscpRange dscp_range;  // run of consecutive codepoints around chosen_dscp
  Dscp chosen_dscp;
  DscpSet dscps;  // every codepoint this switch maps into `queue`
  bool operator==(const PerSwitchChoice&) const = default;
};

struct Infeasible {
  SwitchId sw;
  PortId port;
  bool operator==(const Infeasible&) const = default;
};

using FeasibilityResult = std::variant<std::vector<PerSwitchChoice>, Infeasible>;

/// Queue statuses per egress interface.
using QueueStatusMap = std::map<PortRef, std::vector<QueueStatus>>;

/// DSCPs already taken by orchestrated flows, per egress interface.
using DscpUsage = std::map<PortRef, DscpSet>;

/// Per hop, the queue with the largest spare >= gbr (ties to the higher
/// queue) and the lowest codepoint mapping to it that no other orchestrated
/// flow uses at that interface. Throws InvalidConfig if a hop has no status.
FeasibilityResult feasibility_check(const Fabric& fabric, const Path& path, double gbr_mbps,
                                    const QueueStatusMap& statuses, const DscpUsage& used = {});

struct CommonDscp {
  Dscp dscp;
  bool operator==(const CommonDscp&) const = default;
};
struct NeedsRewrites {
  bool operator==(const NeedsRewrites&) const = default;
};
using Compatibility = std::variant<CommonDscp, NeedsRewrites>;

/// Lowest codepoint every hop maps into its chosen queue, preferring one not
/// in `avoid`.
Compatibility compatibility_check(std::span<const PerSwitchChoice> choices, const DscpSet& avoid = {});

struct DscpPlan {
  Dscp initial_dscp;
  std::vector<RewriteRule> rewrites;
  std::vector<PerSwitchChoice> choices;
  bool operator==(const DscpPlan&) const = default;
};

/// With a common DSCP every choice is pinned to it and no rewrites are
/// needed; otherwise one rule per hop whose successor expects another DSCP.
DscpPlan build_plan(const Path& path, std::vector<PerSwitchChoice> choices, const Compatibility& compatibility);

/// The DSCP each hop's classifier sees when `initial` is replayed through
/// `rules` along the path.
std::vector<Dscp> replay(const Path& path, Dscp initial, std::span<const RewriteRule> rules);

/// Index of the first hop whose classifier does not see its chosen DSCP, if any.
std::optional<std::size_t> first_incoherent_hop(const Path& path, const DscpPlan& plan,
                                                std::span<const RewriteRule> rules);

struct PolicySet {
  std::map<PortRef, TrTcmConfig> ingress;
  std::set<PortRef> round_robin;
  bool operator==(const PolicySet&) const = default;
};

/// trTCM with cir = min(gbrs), pir = max(gbrs) at every ingress port of the
/// path and RoundRobin at every egress port. Throws InvalidConfig on an
/// empty or non-positive gbr set.
PolicySet install_policies(const Path& path, std::span<const double> gbrs_mbps, double cbs_kb = 64.0,
                           double pbs_kb = 64.0);

struct Admitted {
  DscpPlan plan;
  PolicySet policies;
  Path path;
};
struct BestEffort {
  SwitchId offending_switch;
  PortId offending_port;
  bool operator==(const BestEffort&) const = default;
};
using AdmissionResult = std::variant<Admitted, BestEffort>;

struct PlanUpdate {
  std::string flow_id;
  std::variant<DscpPlan, BestEffort> update;
};

struct OrchestratorSettings {
  PolicerMode policer_mode = PolicerMode::PerFlow;
  double cbs_kb = 64.0;
  double pbs_kb = 64.0;
  // Consecutive infeasible monitor checks before a plan is changed.
  int hysteresis = 2;
};

class Orchestrator {
 public:
  explicit Orchestrator(Fabric fabric, OrchestratorSettings settings = {});

  /// Admits (or re-plans) a RAN flow against the snapshot. On BestEffort no
  /// state is kept for the flow. Throws NoRoute and friends from path
  /// discovery, InvalidConfig for a LAN flow.
  AdmissionResult admit_flow(const FlowSpec& flow, const TelemetrySnapshot& snapshot);

  /// One monitoring round over every admitted flow. A plan is replaced (or
  /// the flow demoted) only after `hysteresis` consecutive rounds in which
  /// its queues lack spare >= gbr.
  std::vector<PlanUpdate> monitor(const TelemetrySnapshot& snapshot);

  /// Drops a flow's plan and policies.
  void release(const std::string& flow_id);

  struct Entry {
    FlowSpec flow;
    Path path;
    DscpPlan plan;
    int strikes = 0;
  };
  const std::map<std::string, Entry>& admitted() const { return admitted_; }
  const Fabric& fabric() const { return fabric_; }

  /// Union of the policies of every admitted flow.
  PolicySet policies() const;
  /// Policies in the form the simulation engine consumes.
  NetworkPolicies network_policies() const;
  /// All rewrite rules currently installed for admitted flows.
  std::vector<RewriteRule> installed_rewrites(const std::string& except = {}) const;

 private:
  QueueStatusMap statuses_for(const Path& path, const TelemetrySnapshot& snapshot, const std::string& self) const;
  DscpUsage usage_except(const std::string& self) const;
  AdmissionResult plan_for(const FlowSpec& flow, const Path& path, const TelemetrySnapshot& snapshot) const;

  Fabric fabric_;
  OrchestratorSettings settings_;
  std::map<std::string, Entry> admitted_;
};

/// Stateless admission of a single flow.
AdmissionResult admit_flow(const Fabric& fabric, const FlowSpec& flow, const TelemetrySnapshot& snapshot);

nlohmann::json to_json(const DscpPlan& plan);
nlohmann::json to_json(const PolicySet& policies);
nlohmann::json to_json(const AdmissionResult& result);

}  // namespace sliceqos
