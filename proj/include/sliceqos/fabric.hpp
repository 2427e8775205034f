#pragma once

// Static model of the switch fabric: switches, ports, egress queues, DSCP/CoS
// mapping tables, forwarding tables and DSCP rewrite rules. A Fabric is
// validated once in Fabric::build and immutable afterwards.

#include <array>
#include <bitset>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sliceqos/error.hpp"

namespace sliceqos {

inline constexpr int kDscpCount = 64;
inline constexpr int kCosCount = 8;
inline constexpr int kQueueCount = 8;

/// 6-bit DiffServ codepoint.
class Dscp {
 public:
  Dscp() = default;
  explicit Dscp(int value) : value_(checked(value)) {}
  int value() const noexcept { return value_; }
  auto operator<=>(const Dscp&) const = default;

 private:
  static int checked(int v) {
    if (v < 0 || v >= kDscpCount) throw Error(Errc::InvalidConfig, "DSCP out of range: " + std::to_string(v));
    return v;
  }
  int value_ = 0;
};

/// 3-bit 802.1p class of service.
class Cos {
 public:
  Cos() = default;
  explicit Cos(int value) : value_(checked(value)) {}
  int value() const noexcept { return value_; }
  auto operator<=>(const Cos&) const = default;

 private:
  static int checked(int v) {
    if (v < 0 || v >= kCosCount) throw Error(Errc::InvalidConfig, "CoS out of range: " + std::to_string(v));
    return v;
  }
  int value_ = 0;
};

/// Egress queue number q1..q8. Higher number means higher priority.
class QueueId {
 public:
  QueueId() = default;
  explicit QueueId(int value) : value_(checked(value)) {}
  int value() const noexcept { return value_; }
  std::size_t index() const noexcept { return static_cast<std::size_t>(value_ - 1); }
  auto operator<=>(const QueueId&) const = default;

 private:
  static int checked(int v) {
    if (v < 1 || v > kQueueCount) throw Error(Errc::InvalidConfig, "queue out of range: q" + std::to_string(v));
    return v;
  }
  int value_ = 1;
};

using SwitchId = std::string;
using PortId = std::string;

struct PortRef {
  SwitchId sw;
  PortId port;
  auto operator<=>(const PortRef&) const = default;
};

enum class Layer { L2, L3 };
enum class EgressPolicy { Strict, RoundRobin };

struct DscpRange {
  int lo = 0;
  int hi = 0;
  bool contains(int dscp) const noexcept { return lo <= dscp && dscp <= hi; }
  auto operator<=>(const DscpRange&) const = default;
};

struct EgressQueueConfig {
  QueueId queue;
  // Preset share of the port. For uncapped queues this is the residual port
  // share left by the capped queues.
  double capacity_mbps = 0.0;
  double buffer_kb = 512.0;
  bool is_default = false;
  // Uncapped queues are not shaped and may use the whole port bandwidth.
  bool uncapped = false;
  bool operator==(const EgressQueueConfig&) const = default;
};

struct PortConfig {
  PortId id;
  double bandwidth_mbps = 1000.0;
  // Exactly kQueueCount entries after Fabric::build, indexed by QueueId::index().
  std::vector<EgressQueueConfig> queues;

  const EgressQueueConfig& queue(QueueId q) const { return queues.at(q.index()); }
  const EgressQueueConfig& default_queue() const;
  /// Service ceiling: capacity for shaped queues, port bandwidth otherwise.
  double ceiling_mbps(QueueId q) const;
  bool operator==(const PortConfig&) const = default;
};

struct L3MappingTable {
  struct Row {
    DscpRange range;
    QueueId queue;
    bool operator==(const Row&) const = default;
  };
  std::vector<Row> rows;

  /// Queue i serves DSCP [8(i-1), 8i-1].
  static L3MappingTable standard();
  bool operator==(const L3MappingTable&) const = default;
};

struct L2MappingTable {
  struct Row {
    DscpRange range;
    Cos cos;
    bool operator==(const Row&) const = default;
  };
  std::vector<Row> dscp_to_cos;
  std::array<QueueId, kCosCount> cos_to_queue{};

  /// DSCP 0-7 -> CoS 1, other ranges CoS floor(dscp/8); CoS c -> q(c+1).
  static L2MappingTable standard();
  /// CoS floor(dscp/8) for every range; CoS c -> q(c+1).
  static L2MappingTable conventional();
  bool operator==(const L2MappingTable&) const = default;
};

using MappingTable = std::variant<L3MappingTable, L2MappingTable>;

/// Throws MappingGap unless the DSCP ranges partition 0-63.
void validate_mapping(const MappingTable& table);

QueueId classify_l3(const L3MappingTable& table, Dscp dscp);
Cos dscp_to_cos(const L2MappingTable& table, Dscp dscp);
QueueId classify_l2(const L2MappingTable& table, Dscp dscp);
QueueId classify(const MappingTable& table, Dscp dscp);

/// All codepoints that classify into `queue`.
std::bitset<kDscpCount> dscps_for_queue(const MappingTable& table, QueueId queue);

/// The maximal run of consecutive members of `set` containing `dscp`.
DscpRange run_containing(const std::bitset<kDscpCount>& set, int dscp);

struct RewriteRule {
  SwitchId sw;
  PortId egress_port;
  Dscp match_dscp;
  Dscp set_dscp;
  bool operator==(const RewriteRule&) const = default;
};

/// Egress rewrite at (sw, egress_port): set_dscp of the matching rule, or dscp
/// unchanged. Rules installed on other switches or ports are never consulted.
Dscp apply_rewrites(std::span<const RewriteRule> rules, const SwitchId& sw, const PortId& egress_port, Dscp dscp);

struct Route {
  std::string prefix;
  std::string next_hop;
  bool operator==(const Route&) const = default;
};

struct SwitchConfig {
  SwitchId id;
  Layer layer = Layer::L3;
  std::string mac;
  std::string ip;
  std::vector<std::string> subnets;
  std::vector<PortConfig> ports;
  MappingTable mapping = L3MappingTable::standard();
  double ring_bandwidth_mbps = 1000.0;
  EgressPolicy egress_policy = EgressPolicy::Strict;
  double latency_ms = 0.0;
  std::map<std::string, PortId> mac_table;
  std::map<std::string, std::string> arp_table;
  std::vector<Route> ip_table;
  std::vector<RewriteRule> rewrites;

  const PortConfig* find_port(const PortId& port) const;
  const PortConfig& port(const PortId& port) const;
  bool serves_subnet_of(const std::string& ip) const;
  bool operator==(const SwitchConfig&) const = default;
};

struct Endpoint {
  std::string id;
  std::string ip;
  std::string mac;
  std::string subnet;
  SwitchId attached_switch;
  PortId attached_port;
  bool operator==(const Endpoint&) const = default;
};

struct Link {
  PortRef a;
  PortRef b;
  bool operator==(const Link&) const = default;
};

struct FabricConfig {
  std::vector<SwitchConfig> switches;
  std::vector<Link> links;
  std::vector<Endpoint> endpoints;
  bool operator==(const FabricConfig&) const = default;
};

/// Addresses are opaque strings; an address belongs to a subnet when the
/// subnet string is a prefix of it.
inline bool in_subnet(const std::string& ip, const std::string& subnet) {
  return !subnet.empty() && ip.compare(0, subnet.size(), subnet) == 0;
}

class Fabric {
 public:
  Fabric() = default;

  /// Validates and normalizes the config. Throws DuplicateSwitchId,
  /// DanglingLink, MappingGap, NoDefaultQueue or InvalidConfig.
  static Fabric build(FabricConfig config);

  const FabricConfig& config() const noexcept { return config_; }
  std::span<const SwitchConfig> switches() const noexcept { return config_.switches; }
  std::span<const Endpoint> endpoints() const noexcept { return config_.endpoints; }

  const SwitchConfig* find_switch(const SwitchId& id) const;
  const SwitchConfig& switch_at(const SwitchId& id) const;
  std::size_t switch_index(const SwitchId& id) const;

  const Endpoint* find_endpoint(const std::string& id) const;
  const Endpoint& endpoint(const std::string& id) const;

  /// Port on the other end of a switch-to-switch link.
  std::optional<PortRef> peer(const PortRef& port) const;
  bool hosts_endpoint(const PortRef& port, const Endpoint& ep) const {
    return ep.attached_switch == port.sw && ep.attached_port == port.port;
  }

  const SwitchConfig* switch_by_mac(const std::string& mac) const;
  const SwitchConfig* switch_by_ip(const std::string& ip) const;

  /// Rewrite rules configured statically on every switch.
  std::vector<RewriteRule> static_rewrites() const;

  bool operator==(const Fabric& other) const { return config_ == other.config_; }

 private:
  FabricConfig config_;
  std::unordered_map<std::string, std::size_t> switch_index_;
  std::unordered_map<std::string, std::size_t> endpoint_index_;
  std::map<PortRef, PortRef> peers_;
  std::unordered_map<std::string, std::size_t> by_mac_;
  std::unordered_map<std::string, std::size_t> by_ip_;
};

/// Destination of a forwarding decision: an adjacent switch or the endpoint.
struct NextHop {
  PortId egress_port;
  std::string toward;  // switch id, or endpoint id when to_endpoint
  bool to_endpoint = false;
  bool reaches_endpoint() const { return to_endpoint; }
};

/// One forwarding decision on `sw` toward `dest`. On an L3 switch ARP+MAC is
/// used when dest is in `src_subnet` or in one of the switch's subnets, the IP
/// table otherwise (toward = the next-hop router). On an L2 switch the MAC
/// table is used directly. Throws NoRoute or StaleArp.
NextHop next_hop(const Fabric& fabric, const SwitchId& sw, const Endpoint& dest,
                 const std::string& src_subnet = {});

}  // namespace sliceqos
